"""Transition matrices from data and from the posterior predictive.

A transition matrix here is a row-normalised cross-tabulation of start state
against end state over subplots.  It is not a Markov kernel: it describes
one horizon and does not compose.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .spatial import sample_constrained_icar
from .stickbreak import eta_to_simplex, sample_codes


@dataclass
class TransitionMatrix:
    """K x K start-to-end probabilities.

    ``counts_basis`` holds the row denominators (subplot counts for an
    empirical matrix, the number of draws contributing to each row for a
    predictive one).  Rows without support are NaN and listed in ``flagged``.
    """

    M: np.ndarray
    counts_basis: np.ndarray
    labels: tuple = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    n_draws: int = 0
    flagged: dict = field(default_factory=dict)
    draws: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return self.M.shape[0]

    def long_rows(self):
        """(from, to, mean, lo, hi) records for heat-map plotting."""
        labels = self.labels or tuple(str(k + 1) for k in range(self.n_states))
        lo = self.lower if self.lower is not None else np.full_like(self.M, np.nan)
        hi = self.upper if self.upper is not None else np.full_like(self.M, np.nan)
        return [(labels[a], labels[b], self.M[a, b], lo[a, b], hi[a, b])
                for a in range(self.n_states) for b in range(self.n_states)]


def transition_counts(y_start, y_end, n_states) -> np.ndarray:
    """Integer cross-tabulation of paired 0-based state codes."""
    y0 = np.asarray(y_start, dtype=int).ravel()
    y1 = np.asarray(y_end, dtype=int).ravel()
    if y0.shape != y1.shape:
        raise DataError("start and end observations are not paired")
    return np.bincount(y0 * n_states + y1, minlength=n_states * n_states).reshape(n_states, n_states)


def _normalise_rows(counts):
    counts = np.asarray(counts, dtype=float)
    den = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, counts / den, np.nan), den[..., 0]


def empirical_transition_matrix(y_start, y_end, n_states=None, labels=()) -> TransitionMatrix:
    """Observed transition frequencies.  ``y_start``/``y_end`` may hold NaN-free codes only."""
    y0 = np.asarray(y_start)
    y1 = np.asarray(y_end)
    if y0.shape != y1.shape:
        bad = y0.shape if y0.size > y1.size else y1.shape
        raise DataError(f"unpaired observations: start {y0.shape} vs end {y1.shape} ({bad})")
    if n_states is None:
        n_states = len(labels) if labels else int(max(y0.max(), y1.max())) + 1
    counts = transition_counts(y0, y1, n_states)
    M, den = _normalise_rows(counts)
    flagged = {int(k): "no subplots start in this state" for k in np.flatnonzero(den == 0)}
    return TransitionMatrix(M, den, tuple(labels), flagged=flagged)


def empirical_from_dataset(ds) -> TransitionMatrix:
    st = ds.paired_states()
    return empirical_transition_matrix(st.y_start, st.y_end, ds.n_states, ds.labels)


# ---------------------------------------------------------------- scenarios
@dataclass(frozen=True)
class ClimateScenario:
    """Total climate change over a horizon, applied uniformly per year unless
    ``per_year`` supplies a raw (horizon, 2) path of (temp, precip) changes."""

    name: str
    horizon: int
    delta_temp: float
    delta_precip: float
    per_year: tuple | None = None

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ConfigError("scenario horizon must be at least one year")
        if self.per_year is not None and np.shape(self.per_year) != (self.horizon, 2):
            raise ConfigError(f"per-year path must have shape ({self.horizon}, 2)")

    def raw_rows(self) -> np.ndarray:
        if self.per_year is not None:
            return np.asarray(self.per_year, dtype=float)
        step = np.array([self.delta_temp, self.delta_precip], dtype=float) / self.horizon
        return np.tile(step, (self.horizon, 1))

    def echo(self) -> dict:
        return {"name": self.name, "time": self.horizon, "temp": self.delta_temp,
                "pcpt": self.delta_precip,
                "rule": "per-year" if self.per_year is not None else "uniform"}


SCENARIO_PRESETS = {
    "high-emission": ClimateScenario("high-emission", 120, 8.0, 2.0),
    "low-emission": ClimateScenario("low-emission", 120, 4.0, 2.0),
}


def get_scenario(name) -> ClimateScenario:
    try:
        return SCENARIO_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; presets: {', '.join(SCENARIO_PRESETS)}") from None


def build_scenario_covariates(dataset, scenario: ClimateScenario) -> np.ndarray:
    """Model-scale climate rows (horizon, P_x) for a scenario.

    Raw per-year changes go through the dataset's stored climate transform,
    so coefficients fitted on standardized covariates apply unchanged.  With
    ``dataset=None`` the raw rows are used with an intercept column.
    """
    raw = scenario.raw_rows()
    if dataset is None:
        return np.column_stack([np.ones(len(raw)), raw])
    return dataset.climate_to_model(raw)


def scenario_delta(samples, design, x_rows, rng, deterministic=False) -> np.ndarray:
    """Interval displacement under scenario covariates, one field per draw.

    The drift is the summed scenario rows times beta.  Unless
    ``deterministic``, the plot and subplot effects are redrawn over the
    horizon: their sums over T independent years have T times the annual
    covariance.
    """
    x_sum = np.asarray(x_rows, dtype=float).sum(axis=0)
    horizon = len(x_rows)
    q, n_i, n_s = samples.n_draws, design.n_plots, design.n_subplots
    k1 = samples.beta.shape[-1]
    drift = np.einsum("p,qpk->qk", x_sum, samples.beta)
    delta = np.broadcast_to(drift[:, None, None, :], (q, n_i, n_s, k1)).copy()
    if deterministic:
        return delta
    for j in range(q):
        cov = horizon * samples.sigma2_xi[j] * np.exp(-design.D / samples.phi[j])
        chol = np.linalg.cholesky(cov + 1e-12 * np.eye(n_i))
        delta[j] += (chol @ rng.standard_normal((n_i, k1)))[:, None, :]
        eps = sample_constrained_icar(design.icar, horizon * samples.sigma2_eps[j], rng, size=(n_i, k1))
        delta[j] += np.swapaxes(eps, -1, -2)
    return delta


# --------------------------------------------------------------- predictive
def predict_transition_matrix(samples, rng, *, delta=None, y_start=None, labels=(), level=0.95,
                              keep_draws=True) -> TransitionMatrix:
    """Posterior-predictive transition matrix.

    For each draw q a start state is sampled from ``eta0`` and an end state
    from ``eta0 + delta`` in every subplot; the cross-tabulation normalised by
    row is ``M^(q)``.  ``delta`` defaults to the fitted displacement.  Passing
    the observed ``y_start`` conditions on it instead of resampling (an
    extension, not the default procedure).
    """
    eta0 = np.asarray(samples.eta0, dtype=float)
    if eta0.shape[0] == 0:
        raise DomainError("no posterior draws to predict from", code="EMPTY")
    delta = samples.delta if delta is None else np.asarray(delta, dtype=float)
    if delta.shape != eta0.shape:
        raise DomainError(f"delta shape {delta.shape} does not match eta0 {eta0.shape}",
                          code="DIMENSION")
    q = eta0.shape[0]
    k = eta0.shape[-1] + 1
    if y_start is None:
        y0 = sample_codes(eta_to_simplex(eta0), rng)
    else:
        y0 = np.broadcast_to(np.asarray(y_start, dtype=int), eta0.shape[:-1])
    y1 = sample_codes(eta_to_simplex(eta0 + delta), rng)

    flat = (np.arange(q)[:, None] * k * k + (y0 * k + y1).reshape(q, -1)).ravel()
    counts = np.bincount(flat, minlength=q * k * k).reshape(q, k, k)
    per_draw, den = _normalise_rows(counts)
    support = (den > 0).sum(axis=0)
    flagged = {int(r): int(q - support[r]) for r in range(k) if support[r] < q}

    tail = (1.0 - level) / 2.0
    with warnings.catch_warnings():
        # all-NaN rows stay NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        M = np.nanmean(per_draw, axis=0)
        lo, hi = np.nanquantile(per_draw, [tail, 1.0 - tail], axis=0)
    return TransitionMatrix(M, support, tuple(labels), lo, hi, q, flagged,
                            per_draw if keep_draws else None)


def exact_toy_law(eta0, delta) -> np.ndarray:
    """Transition law targeted by the estimator when every draw has one subplot.

    With a single subplot, row a of ``M^(q)`` exists only when the sampled
    start is a, so the estimator converges to
    ``sum_q p0_a(q) pT_b(q) / sum_q p0_a(q)``.
    """
    p0 = eta_to_simplex(np.asarray(eta0, dtype=float))
    p1 = eta_to_simplex(np.asarray(eta0, dtype=float) + np.asarray(delta, dtype=float))
    joint = np.einsum("qa,qb->ab", p0.reshape(-1, p0.shape[-1]), p1.reshape(-1, p1.shape[-1]))
    return joint / joint.sum(axis=1, keepdims=True)


# ------------------------------------------------------------------- output
def write_matrix_csv(tm: TransitionMatrix, path) -> Path:
    labels = tm.labels or tuple(str(k + 1) for k in range(tm.n_states))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", *labels])
        for a, lab in enumerate(labels):
            w.writerow([lab, *(repr(float(v)) for v in tm.M[a])])
    return Path(path)


def write_long_csv(tm: TransitionMatrix, path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "mean", "lo", "hi"])
        for a, b, m, lo, hi in tm.long_rows():
            w.writerow([a, b, repr(float(m)), repr(float(lo)), repr(float(hi))])
    return Path(path)


def bundle(tm: TransitionMatrix, scenario: ClimateScenario | None = None, **extra) -> dict:
    nan_none = lambda a: None if a is None else [[None if np.isnan(v) else float(v) for v in r] for r in a]  # noqa: E731
    return {
        "labels": list(tm.labels),
        "M": nan_none(tm.M),
        "lower": nan_none(tm.lower),
        "upper": nan_none(tm.upper),
        "n_draws": tm.n_draws,
        "row_support": [float(v) for v in tm.counts_basis],
        "flagged_rows": {str(k): v for k, v in tm.flagged.items()},
        "scenario": scenario.echo() if scenario is not None else None,
        **extra,
    }
