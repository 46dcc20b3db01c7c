"""Random-walk-with-drift latent trajectories and the forward simulator.

Each subplot starts at ``eta0 = h'alpha + zeta`` and moves every year by
``x'beta + xi + eps``; only the start and end years are ever observed.
Years live on one calendar grid shared by all plots, and ``active[i, t]``
marks the years that contribute to plot ``i``'s displacement (start, end].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError, DomainError
from .spatial import (
    HexLattice,
    IcarStructure,
    distance_matrix,
    icar_structure,
    sample_constrained_icar,
)
from .stickbreak import eta_to_simplex, sample_codes


@dataclass
class StudyDesign:
    """Plots, subplot lattice, survey intervals and model-scale covariates.

    h : (n_plots, n_subplots, P_h), first column the intercept.
    x : (n_plots, n_years, P_x) climate rows on the shared year grid, first
        column the intercept; entries outside a plot's interval are ignored.
    """

    plot_ids: list
    lat: np.ndarray
    lon: np.ndarray
    lattice: HexLattice
    start_year: np.ndarray
    end_year: np.ndarray
    h: np.ndarray
    x: np.ndarray
    h_names: tuple = ()
    x_names: tuple = ()

    def __post_init__(self):
        self.lat = np.asarray(self.lat, dtype=float)
        self.lon = np.asarray(self.lon, dtype=float)
        self.start_year = np.asarray(self.start_year, dtype=int)
        self.end_year = np.asarray(self.end_year, dtype=int)
        self.h = np.asarray(self.h, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        n = len(self.plot_ids)
        if len(set(self.plot_ids)) != n:
            raise DataError("plot ids must be unique")
        if np.any(self.start_year >= self.end_year):
            raise DataError("every plot needs start_year < end_year")
        if self.h.shape[:2] != (n, self.lattice.n_cells):
            raise DomainError(f"h has shape {self.h.shape}, expected ({n}, {self.lattice.n_cells}, P)",
                              code="DIMENSION")
        if self.x.shape[:2] != (n, self.n_years):
            raise DomainError(f"x has shape {self.x.shape}, expected ({n}, {self.n_years}, P)",
                              code="DIMENSION")
        missing = ~np.all(np.isfinite(self.x), axis=-1) & self.active
        if missing.any():
            i, t = np.argwhere(missing)[0]
            raise DataError(f"missing covariate year {self.years[t]} for plot {self.plot_ids[i]}")
        self.x = np.where(self.active[..., None], self.x, 0.0)

    @property
    def n_plots(self) -> int:
        return len(self.plot_ids)

    @property
    def n_subplots(self) -> int:
        return self.lattice.n_cells

    @property
    def first_year(self) -> int:
        return int(self.start_year.min()) + 1

    @property
    def n_years(self) -> int:
        return int(self.end_year.max()) - int(self.start_year.min())

    @property
    def years(self) -> np.ndarray:
        return self.first_year + np.arange(self.n_years)

    @property
    def active(self) -> np.ndarray:
        y = self.years[None, :]
        return (y > self.start_year[:, None]) & (y <= self.end_year[:, None])

    @property
    def durations(self) -> np.ndarray:
        return self.end_year - self.start_year

    @cached_property
    def D(self) -> np.ndarray:
        return distance_matrix(self.lat, self.lon)

    @cached_property
    def icar(self) -> IcarStructure:
        return icar_structure(self.lattice)

    @cached_property
    def overlap(self) -> np.ndarray:
        """Number of shared active years for each pair of plots."""
        a = self.active.astype(float)
        return a @ a.T

    @cached_property
    def x_sum(self) -> np.ndarray:
        """Climate rows summed over each plot's interval, (n_plots, P_x)."""
        return self.x.sum(axis=1)

    @property
    def phi_max(self) -> float:
        return float(self.D.max()) / 3.0


@dataclass
class TrajectoryParams:
    alpha: np.ndarray
    beta: np.ndarray
    sigma2_zeta: float
    sigma2_xi: float
    sigma2_eps: float
    phi: float

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if self.alpha.shape[1] != self.beta.shape[1]:
            raise DomainError("alpha and beta disagree on the number of states", code="DIMENSION")
        if min(self.sigma2_zeta, self.sigma2_xi, self.sigma2_eps) <= 0 or self.phi <= 0:
            raise DomainError("variances and phi must be positive", code="PARAMS")

    @property
    def n_states(self) -> int:
        return self.alpha.shape[1] + 1


@dataclass
class LatentField:
    """Latent components of every subplot trajectory (last axis: K-1).

    ``xi`` (n_plots, n_years, K-1) and ``eps`` (n_plots, n_subplots, n_years,
    K-1) hold the annual effects and are zero outside each plot's interval;
    they may be ``None`` when only the interval totals were kept.
    """

    eta0: np.ndarray
    zeta: np.ndarray
    delta_total: np.ndarray
    xi_total: np.ndarray
    eps_total: np.ndarray
    xi: np.ndarray | None = None
    eps: np.ndarray | None = None

    @property
    def eta_end(self) -> np.ndarray:
        return self.eta0 + self.delta_total


def initial_eta(h, alpha, zeta) -> np.ndarray:
    h, alpha, zeta = (np.asarray(a, dtype=float) for a in (h, alpha, zeta))
    if h.shape[-1] != alpha.shape[0]:
        raise DomainError(f"h has {h.shape[-1]} columns but alpha has {alpha.shape[0]} rows",
                          code="DIMENSION")
    out = h @ alpha
    if out.shape != zeta.shape:
        raise DomainError(f"zeta shape {zeta.shape} does not match {out.shape}", code="DIMENSION")
    return out + zeta


def drift_step(x, beta) -> np.ndarray:
    x, beta = np.asarray(x, dtype=float), np.asarray(beta, dtype=float)
    if x.shape[-1] != beta.shape[0]:
        raise DomainError(f"x has {x.shape[-1]} columns but beta has {beta.shape[0]} rows",
                          code="DIMENSION")
    return x @ beta


def accumulate(design: StudyDesign, params: TrajectoryParams, fields: LatentField,
               plot: int, subplot: int) -> np.ndarray:
    """Position at the end of the plot's interval from its annual components."""
    if fields.xi is None or fields.eps is None:
        raise DomainError("annual fields were not stored", code="NO_ANNUAL_FIELDS")
    act = design.active[plot]
    x = design.x[plot, act]
    if not np.all(np.isfinite(x)):
        raise DataError(f"missing covariate year for plot {design.plot_ids[plot]}")
    steps = drift_step(x, params.beta) + fields.xi[plot, act] + fields.eps[plot, subplot, act]
    return fields.eta0[plot, subplot] + steps.sum(axis=0)


@dataclass
class SimulationResult:
    """States are 0-based codes of shape (n_plots, n_subplots)."""

    y_start: np.ndarray
    y_end: np.ndarray
    fields: LatentField
    params: TrajectoryParams


def draw_annual_xi(design: StudyDesign, sigma2: float, phi: float, n_dims: int, rng) -> np.ndarray:
    """Plot-level effects (n_plots, n_years, n_dims), jointly Gaussian across plots each year.

    Every (year, dimension) slice is drawn over all plots and then masked, so
    plots sharing a year are correlated regardless of their start dates.
    """
    n = design.n_plots
    chol = np.linalg.cholesky(sigma2 * np.exp(-design.D / phi) + 1e-12 * np.eye(n))
    z = rng.standard_normal((design.n_years, n_dims, n))
    xi = np.einsum("ij,tkj->itk", chol, z)
    return np.where(design.active[..., None], xi, 0.0)


def draw_annual_eps(design: StudyDesign, sigma2: float, n_dims: int, rng) -> np.ndarray:
    """Subplot-level effects (n_plots, n_subplots, n_years, n_dims), each block summing to zero."""
    draws = sample_constrained_icar(design.icar, sigma2, rng,
                                    size=(design.n_plots, design.n_years, n_dims))
    eps = np.moveaxis(draws, -1, 1)
    return np.where(design.active[:, None, :, None], eps, 0.0)


def simulate_dataset(design: StudyDesign, params: TrajectoryParams, rng) -> SimulationResult:
    """Draw the latent field and one start/end observation per subplot."""
    k1 = params.n_states - 1
    if design.h.shape[-1] != params.alpha.shape[0] or design.x.shape[-1] != params.beta.shape[0]:
        raise DomainError("covariate columns do not match coefficient rows", code="DIMENSION")
    zeta = np.sqrt(params.sigma2_zeta) * rng.standard_normal((design.n_plots, design.n_subplots, k1))
    xi = draw_annual_xi(design, params.sigma2_xi, params.phi, k1, rng)
    eps = draw_annual_eps(design, params.sigma2_eps, k1, rng)

    eta0 = initial_eta(design.h, params.alpha, zeta)
    xi_total = xi.sum(axis=1)
    eps_total = eps.sum(axis=2)
    drift_total = drift_step(design.x_sum, params.beta)
    delta = drift_total[:, None, :] + xi_total[:, None, :] + eps_total
    fields = LatentField(eta0, zeta, delta, xi_total, eps_total, xi, eps)

    y_start = sample_codes(eta_to_simplex(eta0), rng)
    y_end = sample_codes(eta_to_simplex(fields.eta_end), rng)
    return SimulationResult(y_start, y_end, fields, params)
