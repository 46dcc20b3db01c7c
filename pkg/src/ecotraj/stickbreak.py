"""Stick-breaking multinomial data model.

States are numbered ``1..K`` at the public surface (matching the dataset's
declared label order); vectorised helpers that take ``codes`` use 0-based
integers.  The last axis of every probability / logit array is the state axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError

# expit saturates to exactly 0/1 beyond this magnitude in float64
LOGIT_CLAMP = 36.0


@dataclass(frozen=True)
class StateObservation:
    """One classified subplot: ``state`` is 1-based in the label order."""

    plot: int
    subplot: int
    year: int
    state: int

    def one_hot(self, n_states: int) -> np.ndarray:
        return one_hot(self.state, n_states)


def one_hot(state: int, n_states: int) -> np.ndarray:
    _check_state(state, n_states)
    y = np.zeros(n_states, dtype=int)
    y[state - 1] = 1
    return y


def _check_state(state, n_states):
    if not 1 <= int(state) <= n_states:
        raise DomainError(f"state {state} outside 1..{n_states}", code="STATE_RANGE")


def _finite(a, name):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite values", code="NON_FINITE")
    return a


def inv_logit(eta):
    """Clamped logistic function; stays strictly inside (0, 1)."""
    return expit(np.clip(eta, -LOGIT_CLAMP, LOGIT_CLAMP))


def sb_inverse(ptilde) -> np.ndarray:
    """Map conditional probabilities (..., K-1) onto the simplex (..., K)."""
    ptilde = _finite(ptilde, "ptilde")
    if np.any((ptilde <= 0) | (ptilde >= 1)):
        raise DomainError("conditional probabilities must lie in (0, 1)", code="PTILDE_RANGE")
    return _stick(ptilde)


def _stick(ptilde):
    shape = ptilde.shape[:-1] + (ptilde.shape[-1] + 1,)
    p = np.empty(shape)
    remaining = np.ones(ptilde.shape[:-1])
    for k in range(ptilde.shape[-1]):
        p[..., k] = ptilde[..., k] * remaining
        remaining = remaining * (1.0 - ptilde[..., k])
    p[..., -1] = remaining
    return p


def sb_forward(p) -> np.ndarray:
    """Simplex (..., K) to conditional probabilities (..., K-1).

    The remaining stick is the tail sum ``sum_{r>=k} p_r`` rather than
    ``1 - sum_{r<k} p_r``; the two agree on the simplex but the tail sum keeps
    full relative precision when early states carry almost all the mass.
    """
    p = _finite(p, "p")
    if p.shape[-1] < 2:
        raise DomainError("need at least two states", code="STATE_RANGE")
    if np.any(p <= 0):
        raise DomainError("simplex point on the boundary has no logit preimage",
                          code="SIMPLEX_BOUNDARY")
    tail = np.cumsum(p[..., ::-1], axis=-1)[..., ::-1]
    return p[..., :-1] / tail[..., :-1]


def eta_to_simplex(eta) -> np.ndarray:
    """State probabilities from a logit-space location (..., K-1)."""
    eta = _finite(eta, "eta")
    return _stick(inv_logit(eta))


def conditional_trials(state: int, n_states: int) -> np.ndarray:
    """Binomial trial counts N_k (length K-1) of the conditional factorisation."""
    _check_state(state, n_states)
    return trials_from_codes(np.asarray(state - 1), n_states)


def trials_from_codes(codes, n_states: int) -> np.ndarray:
    """Vectorised N_k for 0-based state codes; output shape codes.shape + (K-1,)."""
    k = np.arange(n_states - 1)
    return (np.asarray(codes)[..., None] >= k).astype(int)


def successes_from_codes(codes, n_states: int) -> np.ndarray:
    """The first K-1 entries of the one-hot indicator."""
    k = np.arange(n_states - 1)
    return (np.asarray(codes)[..., None] == k).astype(int)


def sb_loglik(state: int, eta) -> float:
    """Log-likelihood of one observation as a product of conditional binomials."""
    eta = _finite(eta, "eta")
    n_states = eta.shape[-1] + 1
    _check_state(state, n_states)
    n = conditional_trials(state, n_states)
    y = one_hot(state, n_states)[:-1]
    # log Binom(y; N, sigma(eta)) with N in {0, 1}
    eta_c = np.clip(eta, -LOGIT_CLAMP, LOGIT_CLAMP)
    return float(np.sum(y * eta_c - n * np.logaddexp(0.0, eta_c)))


def sample_state(eta, rng: np.random.Generator) -> int | np.ndarray:
    """Draw 1-based states from MN(1, eta_to_simplex(eta)); vectorised over leading axes."""
    codes = sample_codes(eta_to_simplex(eta), rng)
    return int(codes) + 1 if np.ndim(codes) == 0 else codes + 1


def sample_codes(p, rng: np.random.Generator) -> np.ndarray:
    """0-based categorical draws from probability rows (..., K) by inversion."""
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(p.shape[:-1] + (1,))
    codes = np.sum(u * cdf[..., -1:] > cdf[..., :-1], axis=-1)
    return codes
