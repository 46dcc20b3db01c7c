"""Plain-text persistence: dataset directories, run config, samples and manifests.

Floats are written with ``repr`` (shortest round-trip form) so files are
byte-stable across runs and reload to the identical values.
"""
from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from . import __version__
from .data import CLIMATE_COLUMNS, SCHEMA_VERSION, ColumnTransform, Dataset
from .errors import ConfigError, DataError
from .inference.gibbs import McmcConfig, PosteriorSamples, Priors
from .spatial import PlotGeometry

DATASET_FILES = ("dataset.json", "observations.csv", "plots.csv", "landscape.csv", "climate.csv")


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _read_csv(path: Path, required):
    """Rows of a CSV file as dicts, with 1-based data-line numbers (header is line 1)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in required if c not in (reader.fieldnames or [])]
            if missing:
                raise DataError(f"{path.name}: missing column(s) {', '.join(missing)}")
            return [(n, row) for n, row in enumerate(reader, start=2)], list(reader.fieldnames)
    except FileNotFoundError as exc:
        raise DataError(f"missing file {path}") from exc


def _num(path, line, row, col, kind=float):
    try:
        return kind(row[col])
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path.name} line {line}: bad {col} value {row[col]!r}") from exc


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ----------------------------------------------------------------- dataset
def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        meta = json.loads((path / "dataset.json").read_text())
    except FileNotFoundError as exc:
        raise DataError(f"missing file {path / 'dataset.json'}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"dataset.json: {exc}") from exc
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported schema_version {meta.get('schema_version')!r}")
    labels = tuple(meta["labels"])

    p = path / "plots.csv"
    rows, _ = _read_csv(p, ("plot_id", "lat", "lon"))
    plots = []
    for line, r in rows:
        try:
            plots.append(PlotGeometry(r["plot_id"], _num(p, line, r, "lat"), _num(p, line, r, "lon")))
        except ValueError as exc:
            raise DataError(f"plots.csv line {line}: {exc}") from exc
    index = {g.plot_id: i for i, g in enumerate(plots)}

    p = path / "observations.csv"
    rows, _ = _read_csv(p, ("plot_id", "subplot_id", "year", "state_label"))
    obs = []
    for line, r in rows:
        if r["state_label"] not in labels:
            raise DataError(f"observations.csv line {line}: unknown state {r['state_label']!r}")
        if r["plot_id"] not in index:
            raise DataError(f"observations.csv line {line}: unknown plot {r['plot_id']!r}")
        obs.append((r["plot_id"], _num(p, line, r, "subplot_id", int), _num(p, line, r, "year", int),
                    r["state_label"]))

    adjacency = None
    if (path / "adjacency.csv").exists():
        p = path / "adjacency.csv"
        rows, _ = _read_csv(p, ("subplot_a", "subplot_b"))
        adjacency = [(_num(p, ln, r, "subplot_a", int) - 1, _num(p, ln, r, "subplot_b", int) - 1)
                     for ln, r in rows]

    p = path / "landscape.csv"
    rows, cols = _read_csv(p, ("plot_id", "subplot_id"))
    names = [c for c in cols if c not in ("plot_id", "subplot_id")]
    n_s = max((_num(p, ln, r, "subplot_id", int) for ln, r in rows), default=0)
    landscape = {n: np.full((len(plots), n_s), np.nan) for n in names}
    for line, r in rows:
        if r["plot_id"] not in index:
            raise DataError(f"landscape.csv line {line}: unknown plot {r['plot_id']!r}")
        i, s = index[r["plot_id"]], _num(p, line, r, "subplot_id", int) - 1
        for n in names:
            landscape[n][i, s] = _num(p, line, r, n)
    for n, v in landscape.items():
        if np.isnan(v).any():
            i, s = np.argwhere(np.isnan(v))[0]
            raise DataError(f"landscape.csv: no {n} value for plot {plots[i].plot_id!r} subplot {s + 1}")

    p = path / "climate.csv"
    rows, _ = _read_csv(p, ("plot_id", "year", *CLIMATE_COLUMNS))
    climate = {}
    for line, r in rows:
        key = (r["plot_id"], _num(p, line, r, "year", int))
        if key in climate:
            raise DataError(f"climate.csv line {line}: duplicate plot/year {key}")
        climate[key] = tuple(_num(p, line, r, c) for c in CLIMATE_COLUMNS)

    transforms = {n: ColumnTransform(n, t["center"], t["scale"])
                  for n, t in meta.get("transforms", {}).items()}
    return Dataset(labels, int(meta["n_rings"]), plots, obs, landscape, climate,
                   beers_columns=tuple(meta.get("beers_columns", ())), adjacency=adjacency,
                   transforms=transforms, schema_version=SCHEMA_VERSION)


def write_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": ds.schema_version,
        "labels": list(ds.labels),
        "n_rings": ds.n_rings,
        "landscape_columns": list(ds.landscape),
        "climate_columns": list(CLIMATE_COLUMNS),
        "beers_columns": list(ds.beers_columns),
        "transforms": {n: {"center": t.center, "scale": t.scale} for n, t in ds.transforms.items()},
    }
    (path / "dataset.json").write_text(json.dumps(meta, indent=2) + "\n")
    _write_csv(path / "plots.csv", ("plot_id", "lat", "lon"),
               [(g.plot_id, fmt(g.lat), fmt(g.lon)) for g in ds.plots])
    _write_csv(path / "observations.csv", ("plot_id", "subplot_id", "year", "state_label"),
               sorted(ds.observations, key=lambda o: (ds.plot_ids.index(o[0]), o[1], o[2])))
    names = list(ds.landscape)
    _write_csv(path / "landscape.csv", ("plot_id", "subplot_id", *names),
               [(g.plot_id, s + 1, *(fmt(ds.landscape[n][i, s]) for n in names))
                for i, g in enumerate(ds.plots) for s in range(ds.landscape[names[0]].shape[1])]
               if names else [])
    _write_csv(path / "climate.csv", ("plot_id", "year", *CLIMATE_COLUMNS),
               [(p, y, *(fmt(v) for v in vals)) for (p, y), vals in
                sorted(ds.climate.items(), key=lambda kv: (ds.plot_ids.index(kv[0][0]), kv[0][1]))])
    if ds.adjacency is not None:
        _write_csv(path / "adjacency.csv", ("subplot_a", "subplot_b"),
                   [(a + 1, b + 1) for a, b in ds.adjacency])
    return path


def file_digests(path) -> dict:
    path = Path(path)
    files = sorted(f for f in path.iterdir() if f.suffix in (".csv", ".json")) if path.is_dir() else [path]
    return {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in files}


# ------------------------------------------------------------------ config
_LINE = re.compile(r"^\s*([A-Za-z_][\w]*)\.([A-Za-z_][\w]*)\s*=\s*(.*?)\s*$")

CONFIG_SCHEMA = {
    "mcmc": {f: type(getattr(McmcConfig(), f)) for f in McmcConfig.__dataclass_fields__},
    "priors": {f: float for f in Priors.__dataclass_fields__},
    "simulate": {"n_plots": int, "n_rings": int},
    "predict": {"conditional": bool, "deterministic": bool},
    "diagnose": {"rhat_max": float, "ess_min": float},
    "scenario": {"name": str, "horizon": int, "delta_temp": float, "delta_precip": float},
}


def _convert(value: str, kind, where):
    try:
        if kind is bool:
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {value!r} as {kind.__name__}") from exc


def parse_config(text: str, source="config") -> dict:
    """Parse ``section.key = value`` lines; ``#`` starts a comment."""
    out: dict = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"{source} line {n}: expected 'section.key = value'")
        sec, key, value = m.groups()
        kinds = CONFIG_SCHEMA.get(sec)
        if kinds is None or key not in kinds:
            raise ConfigError(f"{source} line {n}: unknown setting {sec}.{key}")
        out.setdefault(sec, {})[key] = _convert(value, kinds[key], f"{source} line {n}")
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, Path(path).name)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def mcmc_config_from(cfg: dict, **override) -> McmcConfig:
    kw = dict(cfg.get("mcmc", {}))
    kw.update({k: v for k, v in override.items() if v is not None})
    return McmcConfig(**kw)


def priors_from(cfg: dict) -> Priors:
    return Priors(**cfg.get("priors", {}))


# ----------------------------------------------------------------- samples
def latent_header(n_plots, n_subplots, k1):
    return [f"{name}[{i}][{s + 1}][{k + 1}]" for name in ("eta0", "delta")
            for i in range(n_plots) for s in range(n_subplots) for k in range(k1)]


def write_samples(samples: PosteriorSamples, out_dir, labels=None) -> list[Path]:
    """``samples.csv`` (parameters) and ``latent.csv`` (eta0 and Delta per subplot)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = samples.scalar_columns()
    _write_csv(out_dir / "samples.csv", ["chain", "iteration", *cols],
               [(int(c), int(it), *(fmt(v[q]) for v in cols.values()))
                for q, (c, it) in enumerate(zip(samples.chain, samples.iteration))])
    n_i, n_s, k1 = samples.eta0.shape[1:] if samples.n_draws else (0, 0, 0)
    flat = np.concatenate([samples.eta0.reshape(samples.n_draws, -1),
                           samples.delta.reshape(samples.n_draws, -1)], axis=1)
    _write_csv(out_dir / "latent.csv", ["chain", "iteration", *latent_header(n_i, n_s, k1)],
               [(int(c), int(it), *map(repr, row.tolist()))
                for c, it, row in zip(samples.chain, samples.iteration, flat)])
    return [out_dir / "samples.csv", out_dir / "latent.csv"]


_IDX = re.compile(r"^(\w+)((?:\[\d+\])+)$")


def _indices(name):
    m = _IDX.match(name)
    return m.group(1), tuple(int(x) for x in re.findall(r"\d+", m.group(2)))


def read_samples(run_dir, dims: dict | None = None) -> PosteriorSamples:
    """Rebuild :class:`PosteriorSamples` from the CSVs of a fit run."""
    run_dir = Path(run_dir)
    try:
        table = np.genfromtxt(run_dir / "samples.csv", delimiter=",", names=True,
                              deletechars="", ndmin=1)
    except OSError as exc:
        raise DataError(f"missing samples in {run_dir}") from exc
    names = table.dtype.names
    n = table.shape[0] if table.ndim else 0
    coef = {"alpha": {}, "beta": {}}
    for c in names:
        if c.startswith(("alpha[", "beta[")):
            base, (p, k) = _indices(c)
            coef[base][(p, k)] = table[c]

    def stack(d):
        if not d:
            return np.empty((n, 0, 0))
        P = 1 + max(p for p, _ in d)
        K = max(k for _, k in d)
        arr = np.empty((n, P, K))
        for (p, k), v in d.items():
            arr[:, p, k - 1] = v
        return arr

    alpha, beta = stack(coef["alpha"]), stack(coef["beta"])
    lat = np.genfromtxt(run_dir / "latent.csv", delimiter=",", skip_header=1, ndmin=2)
    with open(run_dir / "latent.csv") as fh:
        header = fh.readline().strip().split(",")[2:]
    if header:
        _, (i_max, s_max, k_max) = _indices(header[len(header) // 2 - 1])
        shape = (n, i_max + 1, s_max, k_max)
    else:
        shape = (n, 0, 0, 0)
    half = int(np.prod(shape[1:]))
    lat = lat.reshape(n, -1) if n else np.empty((0, 2 + 2 * half))
    meta = json.loads((run_dir / "manifest.json").read_text()) if (run_dir / "manifest.json").exists() else {}
    return PosteriorSamples(
        alpha=alpha, beta=beta,
        sigma2_zeta=table["sigma2_zeta"], sigma2_xi=table["sigma2_xi"],
        sigma2_eps=table["sigma2_eps"], phi=table["phi"],
        eta0=lat[:, 2:2 + half].reshape(shape), delta=lat[:, 2 + half:].reshape(shape),
        chain=table["chain"].astype(int), iteration=table["iteration"].astype(int),
        burn_in=int(meta.get("burn_in", 0)), seed=meta.get("seed"), meta=meta)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o).__name__)


def build_manifest(seed, cfg, inputs: dict, dims: dict, timings: dict, **extra) -> dict:
    return {"seed": seed, "config_hash": config_hash(cfg), "config": cfg, "inputs": inputs,
            "version": __version__, "dims": dims, "timings": timings, **extra}
