"""Univariate slice sampling with stepping out and shrinkage."""
from __future__ import annotations

import math


def slice_sample(x0, logf, rng, width=1.0, lower=-math.inf, upper=math.inf,
                 max_steps=50, logf_x0=None):
    """One slice-sampling update of a scalar with target ``exp(logf)``.

    The bracket is stepped out by ``width`` up to ``max_steps`` times (and
    never past ``lower``/``upper``), then shrunk towards ``x0`` until a point
    inside the slice is found.  Returns ``(x, logf(x))``.
    """
    fx0 = logf(x0) if logf_x0 is None else logf_x0
    log_y = fx0 + math.log(rng.random())

    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and left > lower and logf(left) > log_y:
        left -= width
        j -= 1
    while k > 0 and right < upper and logf(right) > log_y:
        right += width
        k -= 1
    left = max(left, lower)
    right = min(right, upper)

    while True:
        x1 = left + (right - left) * rng.random()
        f1 = logf(x1)
        if f1 > log_y:
            return x1, f1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-12 * max(1.0, abs(x0)):
            return x0, fx0
