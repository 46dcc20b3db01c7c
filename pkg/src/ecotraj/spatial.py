"""Spatial structure: plot-level geostatistics and subplot-level ICAR.

Plots are correlated through an exponential covariance on great-circle
distances.  Subplots form a hexagon of hexagonal cells whose adjacency defines
an intrinsic CAR precision ``R - W``; draws are made proper by constraining
each block to sum to zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StructureError

EARTH_RADIUS_KM = 6371.0088

# axial (q, r) offsets of the six neighbours, counter-clockwise from east
HEX_DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


@dataclass(frozen=True)
class PlotGeometry:
    plot_id: object
    lat: float
    lon: float

    def __post_init__(self):
        if not (abs(self.lat) <= 90 and abs(self.lon) <= 180):
            raise DomainError(f"invalid coordinates for plot {self.plot_id}", code="COORDINATES")


def geodesic_distance(a: PlotGeometry, b: PlotGeometry) -> float:
    """Great-circle distance in km (haversine on the mean-radius sphere)."""
    return float(_haversine(a.lat, a.lon, b.lat, b.lon))


def _haversine(lat1, lon1, lat2, lon2):
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def distance_matrix(lat, lon) -> np.ndarray:
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    d = _haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def exp_covariance(D, sigma2: float, phi: float) -> np.ndarray:
    if not sigma2 > 0 or not phi > 0:
        raise DomainError("exponential covariance needs sigma2 > 0 and phi > 0",
                          code="COVARIANCE_PARAMS")
    return sigma2 * np.exp(-np.asarray(D, dtype=float) / phi)


@dataclass(frozen=True)
class HexLattice:
    """Centered hexagon of hexagonal subplots.

    ``coords`` holds axial (q, r) pairs in spiral order: the centre cell
    first, then each ring starting from its south-west corner.
    """

    n_rings: int
    coords: np.ndarray
    W: np.ndarray
    R: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.W.shape[0]


def hex_spiral(n_rings: int) -> list[tuple[int, int]]:
    cells = [(0, 0)]
    for ring in range(1, n_rings + 1):
        q, r = -ring, ring  # scaled direction 4
        for d in range(6):
            for _ in range(ring):
                cells.append((q, r))
                dq, dr = HEX_DIRECTIONS[d]
                q, r = q + dq, r + dr
    return cells


def build_hex_lattice(n_rings: int) -> HexLattice:
    if n_rings < 0:
        raise DomainError("n_rings must be >= 0", code="LATTICE")
    coords = np.array(hex_spiral(n_rings), dtype=int).reshape(-1, 2)
    index = {tuple(c): i for i, c in enumerate(coords.tolist())}
    n = len(coords)
    W = np.zeros((n, n))
    for i, (q, r) in enumerate(coords.tolist()):
        for dq, dr in HEX_DIRECTIONS:
            j = index.get((q + dq, r + dr))
            if j is not None:
                W[i, j] = 1.0
    return HexLattice(n_rings, coords, W, np.diag(W.sum(axis=1)))


def lattice_from_edges(n_cells: int, edges) -> HexLattice:
    """Lattice from an explicit 0-based edge list (adjacency override)."""
    W = np.zeros((n_cells, n_cells))
    for a, b in edges:
        if a == b or not (0 <= a < n_cells and 0 <= b < n_cells):
            raise StructureError(f"invalid adjacency edge ({a}, {b})")
        W[a, b] = W[b, a] = 1.0
    return HexLattice(-1, np.zeros((n_cells, 2), dtype=int), W, np.diag(W.sum(axis=1)))


@dataclass(frozen=True)
class IcarStructure:
    """ICAR precision ``R - W`` and its generalized inverse on sum-zero vectors.

    ``basis`` is an orthonormal basis (n_S x n_S-1) of the sum-to-zero
    subspace made of the non-null eigenvectors; ``eigvals`` the matching
    eigenvalues of the precision.
    """

    precision: np.ndarray
    Q: np.ndarray
    basis: np.ndarray
    eigvals: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.precision.shape[0]


def icar_structure(lattice: HexLattice, tol: float = 1e-9) -> IcarStructure:
    prec = lattice.R - lattice.W
    vals, vecs = np.linalg.eigh(prec)
    null = vals < tol * max(1.0, vals.max(initial=0.0))
    if null.sum() != 1:
        raise StructureError(
            f"adjacency is disconnected: precision has {int(null.sum())} null directions")
    basis = vecs[:, ~null]
    lam = vals[~null]
    Q = (basis / lam) @ basis.T
    return IcarStructure(prec, 0.5 * (Q + Q.T), basis, lam)


def condition_by_kriging(z, cov_z_c, var_c, c_value, target=0.0):
    """Correct draws ``z`` so the linear functional ``c`` equals ``target``.

    ``z`` is (..., n); ``cov_z_c`` is Cov(z, c), shape (n, m); ``var_c`` is
    Var(c), (m, m); ``c_value`` holds the realised functional, (..., m).
    """
    gain = np.linalg.solve(var_c, np.asarray(cov_z_c).T)   # (m, n)
    return z + (np.asarray(target) - c_value) @ gain


def sample_constrained_icar(structure: IcarStructure, sigma2_eps: float, rng, size=None):
    """Sum-to-zero ICAR draws with covariance ``sigma2_eps * Q``.

    An unconstrained proper draw is taken with covariance
    ``sigma2 * (Q + 11'/n)`` (the ICAR plus a free level), then the level is
    removed by kriging on the constraint ``1'z = 0``.
    """
    if not sigma2_eps > 0:
        raise DomainError("sigma2_eps must be positive", code="COVARIANCE_PARAMS")
    n = structure.n_cells
    shape = () if size is None else tuple(np.atleast_1d(size))
    scale = np.sqrt(sigma2_eps)
    if n == 1:
        return np.zeros(shape + (1,))
    u = rng.standard_normal(shape + (n - 1,))
    level = rng.standard_normal(shape + (1,))
    z = scale * ((u / np.sqrt(structure.eigvals)) @ structure.basis.T
                 + level / np.sqrt(n))
    ones = np.ones((n, 1))
    cov_z_c = sigma2_eps * (structure.Q @ ones + ones)   # (Q + 11'/n) 1 = 1
    var_c = np.array([[sigma2_eps * n]])
    return condition_by_kriging(z, cov_z_c, var_c, z.sum(axis=-1, keepdims=True))


def latent_covariance(kind: str, a, b, *, sigma2: float, D=None, phi=None, Q=None) -> float:
    """Covariance between two annual random-effect entries.

    ``kind='xi'``: ``a``/``b`` are (plot, year) pairs, needs ``D`` and ``phi``.
    ``kind='eps'``: ``a``/``b`` are (plot, subplot, year) triples, needs ``Q``.
    """
    if kind == "xi":
        (i, t1), (j, t2) = a, b
        if t1 != t2:
            return 0.0
        if i == j:
            return float(sigma2)
        return float(sigma2 * np.exp(-D[i, j] / phi))
    if kind == "eps":
        (i, s, t1), (j, r, t2) = a, b
        if i != j:
            raise DomainError("subplot effects are defined within a plot only", code="CROSS_PLOT")
        if t1 != t2:
            return 0.0
        # the diagonal uses Q_ss, not 1: the sum-zero ICAR marginal variance
        return float(sigma2 * Q[s, r])
    raise DomainError(f"unknown random effect {kind!r}", code="KIND")
