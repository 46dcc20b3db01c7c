"""Exact Polya-Gamma PG(b, c) variates for integer b.

PG(1, c) draws use the alternating-series rejection sampler built on the
Jacobi-type density J*(1, z) with z = |c|/2 and PG = J*/4.  The proposal is a
mixture of a truncated inverse-Gaussian on (0, t] and an exponential tail on
(t, inf) with t = 0.64; acceptance is decided by partial sums of the series
representation, so no truncation error enters the draws.

All samplers are vectorised: the rejection loop only revisits the entries
that have not been accepted yet.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_ndtr

from .errors import DomainError
from .stickbreak import conditional_trials, one_hot

TRUNC = 0.64
_PI2_8 = np.pi ** 2 / 8.0


@dataclass(frozen=True)
class PGParams:
    b: int
    c: float = 0.0

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 0:
            raise DomainError(f"PG shape must be a non-negative integer, got {self.b}",
                              code="PG_SHAPE")
        if not np.isfinite(self.c):
            raise DomainError("PG tilt must be finite", code="NON_FINITE")


def pg_mean(b, c=0.0):
    """E[PG(b, c)] = b/(2c) tanh(c/2), with the limit b/4 at c = 0."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-6
    safe = np.where(small, 1.0, c)
    # series tanh(x)/x = 1 - x^2/3 near 0
    out = np.where(small, b / 4.0 * (1.0 - c ** 2 / 12.0), b / (2.0 * safe) * np.tanh(safe / 2.0))
    return out if out.ndim else float(out)


def pg_var(b, c=0.0):
    """Var[PG(b, c)]; limit b/24 at c = 0."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-3
    safe = np.where(small, 1.0, c)
    full = b / (4.0 * safe ** 3) * (np.sinh(safe) - safe) / np.cosh(safe / 2.0) ** 2
    out = np.where(small, b / 24.0 * (1.0 - c ** 2 / 10.0), full)
    return out if out.ndim else float(out)


def _series_coef(n, x):
    """n-th term a_n(x) of the J*(1, 0) density series (piecewise at TRUNC)."""
    k = (n + 0.5) * np.pi
    out = np.empty_like(x)
    right = x > TRUNC
    out[right] = k * np.exp(-0.5 * k * k * x[right])
    xl = x[~right]
    out[~right] = np.exp(-1.5 * (np.log(0.5 * np.pi) + np.log(xl)) + np.log(k)
                         - 2.0 * (n + 0.5) ** 2 / xl)
    return out


def _left_mass_ratio(z):
    """Probability of proposing from the exponential tail, p / (p + q)."""
    fz = _PI2_8 + 0.5 * z * z
    root = np.sqrt(1.0 / TRUNC)
    b = root * (TRUNC * z - 1.0)
    a = -root * (TRUNC * z + 1.0)
    x0 = np.log(fz) + fz * TRUNC
    xb = x0 - z + log_ndtr(b)
    xa = x0 + z + log_ndtr(a)
    log_q_over_p = np.log(4.0 / np.pi) + np.logaddexp(xb, xa)
    return expit(-log_q_over_p)


def _truncated_inverse_gaussian(z, rng):
    """IG(mean 1/z, shape 1) restricted to (0, TRUNC]; z >= 0 elementwise."""
    x = np.empty_like(z)
    mu = np.divide(1.0, z, out=np.full_like(z, np.inf), where=z > 0)

    # mean beyond the truncation point: chi-square proposal with IG acceptance
    idx = np.flatnonzero(mu > TRUNC)
    while idx.size:
        e1 = rng.standard_exponential(idx.size)
        e2 = rng.standard_exponential(idx.size)
        bad = e1 * e1 > 2.0 * e2 / TRUNC
        while np.any(bad):
            nb = int(bad.sum())
            e1[bad] = rng.standard_exponential(nb)
            e2[bad] = rng.standard_exponential(nb)
            bad = e1 * e1 > 2.0 * e2 / TRUNC
        cand = TRUNC / (1.0 + TRUNC * e1) ** 2
        alpha = np.exp(-0.5 * z[idx] ** 2 * cand)
        ok = rng.random(idx.size) <= alpha
        x[idx[ok]] = cand[ok]
        idx = idx[~ok]

    # mean inside: plain IG draws, reject anything past the truncation point
    idx = np.flatnonzero(mu <= TRUNC)
    while idx.size:
        m = mu[idx]
        y = rng.standard_normal(idx.size) ** 2
        cand = m + 0.5 * m * m * y - 0.5 * m * np.sqrt(4.0 * m * y + (m * y) ** 2)
        flip = rng.random(idx.size) > m / (m + cand)
        cand[flip] = m[flip] ** 2 / cand[flip]
        ok = cand <= TRUNC
        x[idx[ok]] = cand[ok]
        idx = idx[~ok]
    return x


def _pg1(c, rng):
    """PG(1, c) for a flat float array c."""
    z = 0.5 * np.abs(c)
    fz = _PI2_8 + 0.5 * z * z
    out = np.empty_like(z)
    pending = np.arange(z.size)
    while pending.size:
        zp = z[pending]
        use_tail = rng.random(pending.size) < _left_mass_ratio(zp)
        x = np.empty(pending.size)
        x[use_tail] = TRUNC + rng.standard_exponential(int(use_tail.sum())) / fz[pending][use_tail]
        if not use_tail.all():
            x[~use_tail] = _truncated_inverse_gaussian(zp[~use_tail], rng)

        s = _series_coef(0, x)
        y = rng.random(pending.size) * s
        accepted = np.zeros(pending.size, dtype=bool)
        live = np.ones(pending.size, dtype=bool)
        n = 0
        while live.any():
            n += 1
            li = np.flatnonzero(live)
            term = _series_coef(n, x[li])
            if n % 2:
                s[li] -= term
                hit = y[li] <= s[li]
                accepted[li[hit]] = True
                live[li[hit]] = False
            else:
                s[li] += term
                live[li[y[li] > s[li]]] = False
        out[pending[accepted]] = 0.25 * x[accepted]
        pending = pending[~accepted]
    return out


def pg_draw(b, c, rng: np.random.Generator):
    """Draw PG(b, c) elementwise; ``b`` broadcasts against ``c``.

    b = 0 yields exactly 0.  b > 1 is the b-fold sum of independent PG(1, c).
    """
    b_arr, c_arr = np.broadcast_arrays(np.asarray(b), np.asarray(c, dtype=float))
    if np.any(b_arr < 0) or np.any(b_arr != np.floor(b_arr)):
        raise DomainError("PG shape must be a non-negative integer", code="PG_SHAPE")
    if not np.all(np.isfinite(c_arr)):
        raise DomainError("PG tilt must be finite", code="NON_FINITE")
    b_flat = b_arr.astype(int).ravel()
    c_flat = c_arr.ravel()
    out = np.zeros(c_flat.size)
    reps = np.repeat(np.arange(c_flat.size), b_flat)
    if reps.size:
        np.add.at(out, reps, _pg1(c_flat[reps], rng))
    out = out.reshape(c_arr.shape)
    return out if out.ndim else float(out)


def kappa_of(state: int, n_states: int) -> np.ndarray:
    """kappa_k = y_k - N_k / 2 for one 1-based observation."""
    n = conditional_trials(state, n_states)
    y = one_hot(state, n_states)[:-1]
    return y - n / 2.0
