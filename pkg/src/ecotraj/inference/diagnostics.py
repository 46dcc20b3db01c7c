"""Convergence summaries: split R-hat and autocorrelation-based ESS."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    lower: float
    upper: float
    ess: float
    rhat: float

    @property
    def mcse(self) -> float:
        return self.sd / np.sqrt(self.ess) if self.ess > 0 else float("nan")


def _as_chains(draws) -> np.ndarray:
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DomainError("draws must be (n_draws,) or (n_chains, n_draws)", code="DIMENSION")
    return x


def _split(x):
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, x.shape[1] - n:]], axis=0)


def split_rhat(draws) -> float:
    """Potential scale reduction on half-chains; floored at 1.

    Returns NaN (with a warning) when the within-chain variance is zero.
    """
    x = _split(_as_chains(draws))
    m, n = x.shape
    if n < 2:
        raise DomainError("need at least 4 draws per chain for split R-hat", code="TOO_FEW_DRAWS")
    w = x.var(axis=1, ddof=1).mean()
    if not w > 0:
        warnings.warn("zero within-chain variance; R-hat is undefined", RuntimeWarning)
        return float("nan")
    b = n * x.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(max(1.0, np.sqrt(var_plus / w)))


def _autocov(x):
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(draws) -> float:
    """Multi-chain ESS with Geyer's initial monotone positive-sequence truncation."""
    x = _as_chains(draws)
    m, n = x.shape
    if n < 4:
        raise DomainError("need at least 4 draws for ESS", code="TOO_FEW_DRAWS")
    acov = np.array([_autocov(c) for c in x])
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    if not w > 0:
        warnings.warn("zero variance chain; ESS is undefined", RuntimeWarning)
        return float("nan")
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # pair sums Gamma_t = rho_2t + rho_2t+1, kept while positive and non-increasing
    total = 0.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
    tau = -1.0 + 2.0 * total
    floor = 1.0 / np.log10(m * n) if m * n > 10 else 1.0
    return float(min(m * n / max(tau, floor), m * n))


def summarize(name, draws, level=0.95) -> ParameterSummary:
    x = _as_chains(draws)
    flat = x.ravel()
    if flat.size < 4:
        raise DomainError("need at least 4 retained draws", code="TOO_FEW_DRAWS")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(flat, [tail, 1.0 - tail])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        constant = not np.ptp(flat) > 0
    if constant:
        warnings.warn(f"{name}: constant draws; R-hat and ESS reported as NaN", RuntimeWarning)
        return ParameterSummary(name, float(flat.mean()), 0.0, float(lo), float(hi),
                                float("nan"), float("nan"))
    return ParameterSummary(name, float(flat.mean()), float(flat.std(ddof=1)), float(lo), float(hi),
                            effective_sample_size(x), split_rhat(x))
