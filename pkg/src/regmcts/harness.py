"""
Synthetic-tree experiment sweep: seeded runs, CSV output, aggregation and plots.

Every run is identified by a :class:`RunKey`. Its tree and search seeds are
derived from the master seed with splitmix64 (:func:`derive_seeds`), so a
sweep is a pure function of its :class:`ExperimentConfig` and the written
files do not depend on how runs are scheduled.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import multiprocessing
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .oracles import compute_oracles, metric_columns
from .search import Algorithm, AlgorithmConfig, run_search
from .synthetic import DEFAULT_SIGMA, env_adapter, generate_tree

CSV_COLUMNS = (
    "tree_id", "run_id", "algorithm", "k", "d", "tau", "epsilon", "sim",
    "v_omega", "eps_omega", "eps_uct", "cum_regret",
)
AGGREGATE_MODES = ("final-error", "final-regret", "trace-mean")
TRACE_METRICS = ("v_omega", "eps_omega", "eps_uct", "cum_regret")

_MASK64 = (1 << 64) - 1
_TREE_TAG = 0x7472
_RUN_TAG = 0x7275


class ConfigError(ValueError):
    """Invalid experiment configuration; message starts with the field name."""


class ParseError(ValueError):
    """Malformed CSV input; message carries the line number."""


@dataclass
class ExperimentConfig:
    k_list: list[int] = field(default_factory=lambda: [2, 4, 6, 8, 10, 12, 14, 16])
    d_list: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    algorithms: list[str] = field(default_factory=lambda: [a.value for a in Algorithm])
    tau: float = 0.1
    epsilon: float = 0.1
    sigma: float = DEFAULT_SIGMA
    trees: int = 5
    runs: int = 5
    budget: int = 10_000
    master_seed: int = 0
    output_dir: str = "results"

    def validate(self) -> "ExperimentConfig":
        for name in ("k_list", "d_list", "algorithms"):
            if not list(getattr(self, name)):
                raise ConfigError(f"{name}: must not be empty")
        for k in self.k_list:
            if int(k) != k or k < 2:
                raise ConfigError(f"k_list: branching factor must be an integer >= 2, got {k!r}")
        for d in self.d_list:
            if int(d) != d or d < 1:
                raise ConfigError(f"d_list: depth must be an integer >= 1, got {d!r}")
        for a in self.algorithms:
            try:
                Algorithm(a)
            except ValueError:
                raise ConfigError(f"algorithms: unknown algorithm {a!r}") from None
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms: duplicate entries")
        for name in ("tau", "epsilon", "sigma"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name}: must be a positive real, got {value!r}")
        for name in ("trees", "runs", "budget"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {value!r}")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise ConfigError(f"master_seed: must be a non-negative integer, got {self.master_seed!r}")
        return self

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown configuration field")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Load a JSON object whose keys are the config field names."""
        with open(path) as fp:
            data = json.load(fp)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: configuration must be a JSON object")
        return cls.from_mapping(data)


class RunKey(NamedTuple):
    k: int
    d: int
    tree_index: int
    run_index: int
    algorithm: str


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(master_seed: int, *values: int) -> int:
    """Fold integers into a 64-bit seed: ``h = splitmix64(h ^ v)`` starting from the master seed."""
    h = splitmix64(master_seed & _MASK64)
    for v in values:
        h = splitmix64(h ^ (v & _MASK64))
    return h


def derive_seeds(master_seed: int, key: RunKey) -> tuple[int, int]:
    """``(tree_seed, run_seed)`` for a run.

    The tree seed depends on (k, d, tree_index) only, so every run and
    algorithm on a tree sees the same tree. The run seed also leaves out the
    algorithm: algorithms are compared under common random numbers.
    """
    tree_seed = mix_seed(master_seed, _TREE_TAG, key.k, key.d, key.tree_index)
    run_seed = mix_seed(master_seed, _RUN_TAG, key.k, key.d, key.tree_index, key.run_index)
    return tree_seed, run_seed


def run_keys(cfg: ExperimentConfig) -> list[RunKey]:
    keys = [
        RunKey(int(k), int(d), t, r, str(a))
        for k in cfg.k_list
        for d in cfg.d_list
        for t in range(cfg.trees)
        for r in range(cfg.runs)
        for a in cfg.algorithms
    ]
    return sorted(set(keys))


@functools.lru_cache(maxsize=4)
def _tree_and_oracles(k: int, d: int, tree_seed: int, sigma: float, tau: float, algorithm: str):
    tree = generate_tree(k, d, tree_seed, sigma=sigma)
    ctx = AlgorithmConfig(algorithm, tau=tau).context(k)
    return tree, compute_oracles(tree, ctx)


def execute_run(cfg: ExperimentConfig, key: RunKey) -> dict[str, np.ndarray]:
    """Run one search and return its per-simulation metric columns."""
    tree_seed, run_seed = derive_seeds(cfg.master_seed, key)
    tree, oracles = _tree_and_oracles(key.k, key.d, tree_seed, float(cfg.sigma), float(cfg.tau), key.algorithm)
    acfg = AlgorithmConfig(key.algorithm, tau=cfg.tau, epsilon=cfg.epsilon, gamma=1.0, simulation_budget=cfg.budget)
    result = run_search(env_adapter(tree), acfg, acfg.context(key.k), np.random.default_rng(run_seed))
    return metric_columns(result, oracles)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def format_rows(cfg: ExperimentConfig, key: RunKey, cols: dict[str, np.ndarray], last_only: bool = False) -> str:
    prefix = f"{key.tree_index},{key.run_index},{key.algorithm},{key.k},{key.d},{_fmt(cfg.tau)},{_fmt(cfg.epsilon)},"
    v, e, u, r = (cols[c].tolist() for c in TRACE_METRICS)
    start = len(v) - 1 if last_only else 0
    return "".join(
        f"{prefix}{i + 1},{v[i]:.17g},{e[i]:.17g},{u[i]:.17g},{r[i]:.17g}\n"
        for i in range(start, len(v))
    )


def _worker(args):
    cfg, key = args
    return execute_run(cfg, key)


@dataclass
class SweepSummary:
    runs_path: Path
    final_path: Path
    num_runs: int
    num_rows: int


def run_sweep(cfg: ExperimentConfig, workers: Optional[int] = 1, progress=None) -> SweepSummary:
    """Run every RunKey and write ``runs.csv`` (all simulations) and ``final.csv`` (last one).

    Rows are written in RunKey order then simulation order. With
    ``workers > 1`` runs execute in a process pool; results are consumed in
    key order, so the files are the same for any worker count.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = run_keys(cfg)
    runs_path = out / "runs.csv"
    final_path = out / "final.csv"
    header = ",".join(CSV_COLUMNS) + "\n"
    jobs = [(cfg, key) for key in keys]
    rows = 0
    pool = None
    try:
        if workers is not None and workers > 1:
            pool = multiprocessing.get_context("spawn").Pool(workers)
            results: Iterable = pool.imap(_worker, jobs, chunksize=1)
        else:
            results = map(_worker, jobs)
        with open(runs_path, "w", newline="") as runs_fp, open(final_path, "w", newline="") as final_fp:
            runs_fp.write(header)
            final_fp.write(header)
            for n, (key, cols) in enumerate(zip(keys, results), 1):
                runs_fp.write(format_rows(cfg, key, cols))
                final_fp.write(format_rows(cfg, key, cols, last_only=True))
                rows += len(cols["v_omega"])
                if progress is not None:
                    progress(n, len(keys), key)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return SweepSummary(runs_path, final_path, len(keys), rows)


def config_to_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)


# -- aggregation ---------------------------------------------------------------

def read_metrics(path) -> dict[str, np.ndarray]:
    """Parse a runs/final CSV into columns. Raises ParseError with the offending line."""
    ints = {"tree_id": [], "run_id": [], "k": [], "d": [], "sim": []}
    floats = {"tau": [], "epsilon": [], "v_omega": [], "eps_omega": [], "eps_uct": [], "cum_regret": []}
    algos = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}:1: empty file")
        if tuple(header) != CSV_COLUMNS:
            raise ParseError(f"{path}:1: unexpected header {header}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(CSV_COLUMNS):
                raise ParseError(f"{path}:{line}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            try:
                rec = dict(zip(CSV_COLUMNS, row))
                for name, dest in ints.items():
                    dest.append(int(rec[name]))
                for name, dest in floats.items():
                    dest.append(float(rec[name]))
            except ValueError as exc:
                raise ParseError(f"{path}:{line}: {exc}") from None
            if not rec["algorithm"]:
                raise ParseError(f"{path}:{line}: empty algorithm")
            algos.append(rec["algorithm"])
    if not algos:
        raise ParseError(f"{path}: no data rows")
    cols = {name: np.array(v, dtype=np.int64) for name, v in ints.items()}
    cols.update({name: np.array(v, dtype=float) for name, v in floats.items()})
    cols["algorithm"] = np.array(algos)
    return cols


def _groups(cols, names):
    """Row indices grouped by the given columns, groups in sorted key order."""
    keys = list(zip(*(cols[n].tolist() for n in names)))
    out: dict[tuple, list[int]] = {}
    for i, key in enumerate(keys):
        out.setdefault(key, []).append(i)
    return {key: np.array(out[key]) for key in sorted(out)}


def _final_rows(cols) -> np.ndarray:
    last = {}
    sims = cols["sim"]
    for key, idx in _groups(cols, ("algorithm", "k", "d", "tree_id", "run_id")).items():
        last[key] = idx[np.argmax(sims[idx])]
    return np.array([last[key] for key in sorted(last)])


def _mean_sd(x: np.ndarray) -> tuple[float, float]:
    return float(np.mean(x)), float(np.std(x))


def aggregate(input_path, mode: str, output_path) -> Path:
    """Summarize a runs/final CSV over (tree, run) pairs.

    ``final-error`` and ``final-regret`` write heatmap tables: for each
    algorithm and metric one row per k with a column per d, holding the mean
    over pairs of |eps_omega| and |eps_uct|, or of cumulative regret, at each
    run's last simulation. ``trace-mean`` writes, per (algorithm, k, d, sim),
    the mean and standard deviation of every metric across pairs.
    """
    if mode not in AGGREGATE_MODES:
        raise ValueError(f"mode must be one of {AGGREGATE_MODES}, got {mode!r}")
    cols = read_metrics(input_path)
    output_path = Path(output_path)
    if mode == "trace-mean":
        header = ["algorithm", "k", "d", "sim"]
        for m in TRACE_METRICS:
            header += [f"{m}_mean", f"{m}_sd"]
        header.append("count")
        lines = [",".join(header)]
        for (algo, k, d, sim), idx in _groups(cols, ("algorithm", "k", "d", "sim")).items():
            cells = [algo, str(k), str(d), str(sim)]
            for m in TRACE_METRICS:
                cells += [_fmt(v) for v in _mean_sd(cols[m][idx])]
            cells.append(str(len(idx)))
            lines.append(",".join(cells))
    else:
        final = {name: col[_final_rows(cols)] for name, col in cols.items()}
        if mode == "final-error":
            metrics = {"abs_eps_omega": np.abs(final["eps_omega"]), "abs_eps_uct": np.abs(final["eps_uct"])}
        else:
            metrics = {"cum_regret": final["cum_regret"]}
        d_values = sorted(set(final["d"].tolist()))
        lines = [",".join(["algorithm", "metric", "k"] + [f"d={d}" for d in d_values])]
        cells = {key: idx for key, idx in _groups(final, ("algorithm", "k", "d")).items()}
        for algo in sorted(set(final["algorithm"].tolist())):
            for metric, values in metrics.items():
                for k in sorted({key[1] for key in cells if key[0] == algo}):
                    row = [algo, metric, str(k)]
                    for d in d_values:
                        idx = cells.get((algo, k, d))
                        row.append("" if idx is None else _fmt(float(np.mean(values[idx]))))
                    lines.append(",".join(row))
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("\n".join(lines) + "\n")
    return output_path


def read_heatmap(path) -> dict[tuple[str, str], dict[int, dict[int, float]]]:
    """Load a final-error/final-regret table as ``{(algorithm, metric): {k: {d: value}}}``."""
    with open(path, newline="") as fp:
        rows = list(csv.reader(fp))
    if not rows or rows[0][:3] != ["algorithm", "metric", "k"]:
        raise ParseError(f"{path}:1: not a heatmap table")
    d_values = [int(c.split("=", 1)[1]) for c in rows[0][3:]]
    out: dict = {}
    for row in rows[1:]:
        grid = out.setdefault((row[0], row[1]), {})
        grid[int(row[2])] = {d: float(v) for d, v in zip(d_values, row[3:]) if v != ""}
    return out


# -- plotting --------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_LOW = (68, 1, 84)
_HIGH = (253, 231, 37)


def _color(t: float) -> str:
    t = 0.0 if not math.isfinite(t) else min(1.0, max(0.0, t))
    r, g, b = (round(lo + (hi - lo) * t) for lo, hi in zip(_LOW, _HIGH))
    return f"#{r:02x}{g:02x}{b:02x}"


def _n(x: float) -> str:
    return f"{x:.2f}"


def _trace_svg(rows: list[dict], metric: str) -> str:
    panels: dict[tuple[int, int], dict[str, list[tuple[float, float]]]] = {}
    for row in rows:
        series = panels.setdefault((int(row["k"]), int(row["d"])), {})
        series.setdefault(row["algorithm"], []).append((float(row["sim"]), float(row[metric])))
    width, height, pad = 640, 240, 48
    algos = sorted({a for series in panels.values() for a in series})
    parts = []
    for p, (kd, series) in enumerate(sorted(panels.items())):
        top = p * (height + pad) + pad
        xs = [x for pts in series.values() for x, _ in pts]
        ys = [y for pts in series.values() for _, y in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        sx = (width - 2 * pad) / ((x1 - x0) or 1.0)
        sy = (height - pad) / ((y1 - y0) or 1.0)
        parts.append(
            f'<g class="panel"><text x="{pad}" y="{top - 8}">k={kd[0]} d={kd[1]} {metric}</text>'
            f'<rect x="{pad}" y="{top}" width="{width - 2 * pad}" height="{height - pad}" fill="none" stroke="#999"/>'
        )
        for algo in sorted(series):
            pts = sorted(series[algo])
            path = " ".join(f"{_n(pad + (x - x0) * sx)},{_n(top + (height - pad) - (y - y0) * sy)}" for x, y in pts)
            color = _PALETTE[algos.index(algo) % len(_PALETTE)]
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"><title>{algo}</title></polyline>')
        parts.append(
            f'<text x="{pad}" y="{top + height - pad + 16}">{x0:g}</text>'
            f'<text x="{width - pad}" y="{top + height - pad + 16}" text-anchor="end">{x1:g}</text>'
            f'<text x="4" y="{top + 10}">{y1:.3g}</text><text x="4" y="{top + height - pad}">{y0:.3g}</text></g>'
        )
    legend = "".join(
        f'<text x="{width - pad}" y="{14 + 14 * i}" text-anchor="end" fill="{_PALETTE[i % len(_PALETTE)]}">{a}</text>'
        for i, a in enumerate(algos)
    )
    total_h = len(panels) * (height + pad) + pad
    return _svg(width, total_h, legend + "".join(parts))


def _heatmap_svg(grids) -> str:
    cell, pad, gap = 36, 56, 40
    parts = []
    top = pad
    width = pad
    for (algo, metric), grid in sorted(grids.items()):
        ks = sorted(grid)
        ds = sorted({d for row in grid.values() for d in row})
        vals = [v for row in grid.values() for v in row.values()]
        lo, hi = min(vals), max(vals)
        parts.append(f'<g class="heatmap"><text x="{pad}" y="{top - 20}">{algo} {metric} (rows k, columns d)</text>')
        for j, d in enumerate(ds):
            parts.append(f'<text x="{pad + j * cell + cell / 2:g}" y="{top - 4}" text-anchor="middle">{d}</text>')
        for i, k in enumerate(ks):
            parts.append(f'<text x="{pad - 6}" y="{top + i * cell + cell / 2 + 4:g}" text-anchor="end">{k}</text>')
            for j, d in enumerate(ds):
                if d not in grid[k]:
                    continue
                v = grid[k][d]
                t = (v - lo) / (hi - lo) if hi > lo else 0.5
                parts.append(
                    f'<rect class="cell" x="{pad + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                    f'fill="{_color(t)}"><title>k={k} d={d}: {v:.6g}</title></rect>'
                )
        parts.append("</g>")
        width = max(width, pad + len(ds) * cell + pad)
        top += len(ks) * cell + gap + 20
    return _svg(width, top, "".join(parts))


def _svg(width: int, height: int, body: str) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
        f'<rect width="100%" height="100%" fill="white"/>{body}</svg>\n'
    )


def render_plot(table_path, output_path, metric: str = "eps_omega_mean") -> Path:
    """Render an aggregated table as SVG.

    Trace tables become line charts (one panel per (k, d), one polyline per
    algorithm, y = ``metric``); heatmap tables become colored k-by-d grids.
    """
    with open(table_path, newline="") as fp:
        rows = list(csv.DictReader(fp))
        header = tuple(rows[0].keys()) if rows else ()
    if not rows:
        raise ConfigError(f"{table_path}: empty table")
    if header[:4] == ("algorithm", "k", "d", "sim"):
        if metric not in header:
            raise ConfigError(f"metric: {metric!r} is not a column of {table_path}")
        svg = _trace_svg(rows, metric)
    elif header[:3] == ("algorithm", "metric", "k"):
        svg = _heatmap_svg(read_heatmap(table_path))
    else:
        raise ConfigError(f"{table_path}: unknown table schema {list(header)}")
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(svg)
    return output_path


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
