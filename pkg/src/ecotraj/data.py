"""Datasets of paired land-cover observations and their covariates.

A :class:`Dataset` keeps the raw tables exactly as read plus the fitted
covariate transforms, so saving and reloading reproduces it exactly.  Model
inputs (:class:`~ecotraj.trajectory.StudyDesign` and
:class:`~ecotraj.inference.PairedStates`) are built from it on demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .inference.gibbs import PairedStates
from .spatial import PlotGeometry, build_hex_lattice, lattice_from_edges
from .trajectory import StudyDesign, TrajectoryParams

SCHEMA_VERSION = 1
CLIMATE_COLUMNS = ("temp_change", "precip_change")


def beers_transform(aspect_deg):
    """Fold a compass aspect (degrees) onto [0, 2]: 2 for north-east, 0 for south-west."""
    return np.cos(np.radians(45.0 - np.asarray(aspect_deg, dtype=float))) + 1.0


@dataclass(frozen=True)
class ColumnTransform:
    name: str
    center: float
    scale: float

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.center) / self.scale

    @classmethod
    def fit(cls, name, values) -> "ColumnTransform":
        v = np.asarray(values, dtype=float).ravel()
        v = v[np.isfinite(v)]
        sd = v.std(ddof=1) if v.size > 1 else 0.0
        if not sd > 0:
            raise DataError(f"covariate column {name!r} has zero variance; cannot standardize")
        return cls(name, float(v.mean()), float(sd))


@dataclass
class Dataset:
    """Observation, geometry and covariate tables for one study.

    observations : list of (plot_id, subplot_id, year, state_label), subplot
        ids counted from 1 in lattice spiral order.
    landscape : column name -> raw values, (n_plots, n_subplots).
    climate : (plot_id, year) -> raw (temp_change, precip_change).
    transforms : fitted standardization for every covariate column; fitted
        from the raw tables when left empty.
    """

    labels: tuple
    n_rings: int
    plots: list
    observations: list
    landscape: dict
    climate: dict
    beers_columns: tuple = ()
    adjacency: list | None = None
    transforms: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.beers_columns = tuple(self.beers_columns)
        self.plots = [p if isinstance(p, PlotGeometry) else PlotGeometry(*p) for p in self.plots]
        self.landscape = {k: np.asarray(v, dtype=float) for k, v in self.landscape.items()}
        self.validate()
        if not self.transforms:
            self.transforms = self.fit_transforms()

    # ------------------------------------------------------------ structure
    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def plot_ids(self) -> list:
        return [p.plot_id for p in self.plots]

    @property
    def lattice(self):
        if self.adjacency is not None:
            n = build_hex_lattice(self.n_rings).n_cells if self.n_rings >= 0 else \
                1 + max(max(e) for e in self.adjacency)
            return lattice_from_edges(n, self.adjacency)
        return build_hex_lattice(self.n_rings)

    @property
    def n_subplots(self) -> int:
        return self.lattice.n_cells

    def validate(self):
        if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
            raise DataError("need at least two distinct state labels")
        ids = self.plot_ids
        if len(set(ids)) != len(ids):
            raise DataError("duplicate plot id in plot table")
        n_s = self.n_subplots
        index = {p: i for i, p in enumerate(ids)}
        label_set = set(self.labels)
        seen = {}
        for row, (plot, sub, year, lab) in enumerate(self.observations, start=1):
            if plot not in index:
                raise DataError(f"observation row {row}: unknown plot {plot!r}")
            if not 1 <= sub <= n_s:
                raise DataError(f"observation row {row}: subplot {sub} outside 1..{n_s}")
            if lab not in label_set:
                raise DataError(f"observation row {row}: unknown state {lab!r}")
            key = (plot, sub, year)
            if key in seen:
                raise DataError(f"observation row {row}: duplicate (plot, subplot, year) {key}")
            seen[key] = lab
        years = {}
        for plot, sub, year in seen:
            years.setdefault((plot, sub), set()).add(year)
        for plot in ids:
            ref = None
            for sub in range(1, n_s + 1):
                ys = years.get((plot, sub), set())
                if len(ys) != 2:
                    raise DataError(f"plot {plot!r} subplot {sub}: expected exactly two observation "
                                    f"years, found {len(ys)}")
                if ref is None:
                    ref = ys
                elif ys != ref:
                    raise DataError(f"plot {plot!r}: subplots observed in different years")
        for name, values in self.landscape.items():
            if values.shape != (len(ids), n_s):
                raise DataError(f"landscape column {name!r} has shape {values.shape}, "
                                f"expected ({len(ids)}, {n_s})")
        for name in self.beers_columns:
            if name not in self.landscape:
                raise DataError(f"Beers transform requested for unknown column {name!r}")

    def intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end survey years per plot."""
        ys = {}
        for plot, _, year, _ in self.observations:
            ys.setdefault(plot, set()).add(year)
        start = np.array([min(ys[p]) for p in self.plot_ids])
        end = np.array([max(ys[p]) for p in self.plot_ids])
        return start, end

    # ----------------------------------------------------------- covariates
    def landscape_raw(self, name) -> np.ndarray:
        v = self.landscape[name]
        return beers_transform(v) if name in self.beers_columns else v

    def climate_row(self, plot, year) -> tuple[float, float]:
        """Raw climate change values, carrying the earliest available year back.

        Years before a plot's first climate record reuse that first record;
        a gap after it is an error.
        """
        got = self.climate.get((plot, year))
        if got is not None:
            return got
        years = [y for (p, y) in self.climate if p == plot]
        if years and year < min(years):
            return self.climate[(plot, min(years))]
        raise DataError(f"missing climate year {year} for plot {plot!r}")

    def fit_transforms(self) -> dict:
        out = {name: ColumnTransform.fit(name, self.landscape_raw(name)) for name in self.landscape}
        start, end = self.intervals()
        rows = np.array([self.climate_row(p, y) for p, s, e in zip(self.plot_ids, start, end)
                         for y in range(s + 1, e + 1)], dtype=float).reshape(-1, 2)
        for j, name in enumerate(CLIMATE_COLUMNS):
            out[name] = ColumnTransform.fit(name, rows[:, j])
        return out

    def climate_to_model(self, raw) -> np.ndarray:
        """Map raw (..., 2) climate rows to model rows (..., 3) with intercept."""
        raw = np.asarray(raw, dtype=float)
        z = [self.transforms[name].apply(raw[..., j]) for j, name in enumerate(CLIMATE_COLUMNS)]
        return np.stack([np.ones(raw.shape[:-1]), *z], axis=-1)

    # --------------------------------------------------------- model inputs
    def design(self) -> StudyDesign:
        start, end = self.intervals()
        first, n_years = start.min() + 1, end.max() - start.min()
        raw = np.full((len(self.plots), n_years, 2), np.nan)
        for i, p in enumerate(self.plot_ids):
            for y in range(start[i] + 1, end[i] + 1):
                raw[i, y - first] = self.climate_row(p, y)
        x = self.climate_to_model(raw)
        names = list(self.landscape)
        h = np.stack([np.ones((len(self.plots), self.n_subplots))]
                     + [self.transforms[n].apply(self.landscape_raw(n)) for n in names], axis=-1)
        return StudyDesign(self.plot_ids, [p.lat for p in self.plots], [p.lon for p in self.plots],
                           self.lattice, start, end, h, x,
                           h_names=("intercept", *names), x_names=("intercept", *CLIMATE_COLUMNS))

    def paired_states(self) -> PairedStates:
        start, end = self.intervals()
        index = {p: i for i, p in enumerate(self.plot_ids)}
        code = {lab: k for k, lab in enumerate(self.labels)}
        y0 = np.zeros((len(self.plots), self.n_subplots), dtype=int)
        y1 = np.zeros_like(y0)
        for plot, sub, year, lab in self.observations:
            i = index[plot]
            (y0 if year == start[i] else y1)[i, sub - 1] = code[lab]
        return PairedStates(y0, y1, self.n_states)

    # ------------------------------------------------------------- equality
    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_land = (self.landscape.keys() == other.landscape.keys()
                     and all(np.array_equal(self.landscape[k], other.landscape[k])
                             for k in self.landscape))
        return (same_land and self.labels == other.labels and self.n_rings == other.n_rings
                and self.plots == other.plots
                and sorted(self.observations) == sorted(other.observations)
                and self.climate == other.climate and self.beers_columns == other.beers_columns
                and self.adjacency == other.adjacency and self.transforms == other.transforms
                and self.schema_version == other.schema_version)


# --------------------------------------------------------------- synthetic
DEFAULT_LABELS = ("Forest", "Shrub", "Open")


def default_truth() -> TrajectoryParams:
    """Generating parameters for simulation studies.

    The variances sit inside the central 90% of the default inverse-gamma
    priors, so recovery is judged where the priors give the truth support.
    """
    return TrajectoryParams(alpha=[[0.3, -0.5], [0.5, 0.4]],
                            beta=[[0.05, -0.05], [0.2, 0.1], [-0.1, 0.15]],
                            sigma2_zeta=0.3, sigma2_xi=0.3, sigma2_eps=0.3, phi=30.0)


def synthetic_tables(rng, n_plots=20, n_rings=1, grid_cols=5, base_year=1980):
    """Geometry, raw covariates and survey intervals for a simulated study.

    Plots sit on a regular grid half a degree apart in latitude and one degree
    in longitude; starts are staggered by up to two years and intervals last
    8 to 12 years.
    """
    rows, cols = np.divmod(np.arange(n_plots), grid_cols)
    ids = [f"P{i + 1:03d}" for i in range(n_plots)]
    plots = [PlotGeometry(p, float(66.5 + 0.5 * r), float(-158.0 + 1.0 * c))
             for p, r, c in zip(ids, rows, cols)]
    start = base_year + rng.integers(-2, 3, n_plots)
    end = start + rng.integers(8, 13, n_plots)
    n_s = build_hex_lattice(n_rings).n_cells
    landscape = {"elevation": np.round(rng.normal(300.0, 60.0, (n_plots, n_s)), 6)}
    climate = {}
    for p, s, e in zip(ids, start, end):
        for y in range(int(s) + 1, int(e) + 1):
            climate[(p, y)] = (round(float(rng.normal(0.05, 0.3)), 6),
                               round(float(rng.normal(0.01, 0.1)), 6))
    return plots, landscape, climate, start, end


def synthetic_dataset(rng, truth: TrajectoryParams | None = None, n_plots=20, n_rings=1,
                      labels=DEFAULT_LABELS):
    """Simulate a study; returns ``(dataset, simulation)``."""
    from .trajectory import simulate_dataset

    truth = truth or default_truth()
    if truth.n_states != len(labels):
        raise DataError(f"truth has {truth.n_states} states but {len(labels)} labels were given")
    plots, landscape, climate, start, end = synthetic_tables(rng, n_plots, n_rings)
    # placeholder states fix the survey years; the real ones are drawn below
    obs = [(p.plot_id, s + 1, int(y), labels[0]) for p, a, b in zip(plots, start, end)
           for s in range(build_hex_lattice(n_rings).n_cells) for y in (a, b)]
    ds = Dataset(labels, n_rings, plots, obs, landscape, climate)
    sim = simulate_dataset(ds.design(), truth, rng)
    obs = []
    for i, p in enumerate(plots):
        for s in range(ds.n_subplots):
            obs.append((p.plot_id, s + 1, int(start[i]), labels[sim.y_start[i, s]]))
            obs.append((p.plot_id, s + 1, int(end[i]), labels[sim.y_end[i, s]]))
    ds.observations = obs
    return ds, sim
