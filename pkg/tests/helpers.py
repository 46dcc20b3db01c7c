"""Shared builders for the test-suite."""
import numpy as np

from ecotraj.spatial import build_hex_lattice
from ecotraj.trajectory import StudyDesign, TrajectoryParams

# Observed transition counts by subplot (rows c. 1980, columns c. 2010),
# order Forest, Tall, Low, Barren, Other.
SURVEY_LABELS = ("Forest", "Tall", "Low", "Barren", "Other")
SURVEY_COUNTS = np.array([
    [587, 0, 0, 0, 5],
    [15, 440, 0, 0, 0],
    [117, 66, 4043, 0, 4],
    [0, 0, 17, 1107, 4],
    [4, 4, 17, 26, 944],
])


def paired_codes_from_counts(counts, rng=None):
    """Expand a count table into paired (start, end) code arrays."""
    k = counts.shape[0]
    y0 = np.repeat(np.repeat(np.arange(k), k), counts.ravel())
    y1 = np.repeat(np.tile(np.arange(k), k), counts.ravel())
    if rng is not None:
        perm = rng.permutation(y0.size)
        y0, y1 = y0[perm], y1[perm]
    return y0, y1


def grid_design(rng, n_plots=6, n_rings=1, n_h=1, n_x=2, grid_cols=3, min_len=3, max_len=6):
    rows, cols = np.divmod(np.arange(n_plots), grid_cols)
    lattice = build_hex_lattice(n_rings)
    start = 2000 + rng.integers(0, 3, n_plots)
    end = start + rng.integers(min_len, max_len + 1, n_plots)
    n_years = end.max() - start.min()
    h = np.concatenate([np.ones((n_plots, lattice.n_cells, 1)),
                        rng.standard_normal((n_plots, lattice.n_cells, n_h))], axis=-1)
    x = np.concatenate([np.ones((n_plots, n_years, 1)),
                        rng.standard_normal((n_plots, n_years, n_x))], axis=-1)
    return StudyDesign([f"p{i}" for i in range(n_plots)], 65.0 + 0.3 * rows, -150.0 + 0.5 * cols,
                       lattice, start, end, h, x)


def small_params(k1=2, n_h=2, n_x=3):
    alpha = np.linspace(-0.5, 0.5, n_h * k1).reshape(n_h, k1)
    beta = np.linspace(-0.1, 0.1, n_x * k1).reshape(n_x, k1)
    return TrajectoryParams(alpha, beta, 0.2, 0.05, 0.05, 20.0)
