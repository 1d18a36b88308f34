"""Parameter sweep over (H_s, H_x), per-threshold interval analysis and reports.

Layout of a results directory::

    <output_dir>/config.json
    <output_dir>/cells/hs0.50_hx0.90/round0_intervals_Q2.txt
                                    round0_dfa_Q2.txt
                                    round0_mfdfa_Q2.txt
                                    pdf_Q2.txt
                                    spectrum_Q2.txt
                                    meta.json
                                    result.json      (written last)

A cell whose ``result.json`` exists with a matching config hash is skipped
on a rerun, so an interrupted sweep resumes by cell.
"""

import hashlib
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .errors import EmptyIntervalsError, FitError, ParameterError, SimulationError
from .io import atomic_write_text, read_json, write_json, write_series, write_table, dumps
from .recurrence import (extract_intervals, fit_generalized_gamma, pool_and_scale,
                         pooled_spacing, scaled_pdf)
from .regression import fit_beta_surface
from .scaling import default_q_values, dfa, mfdfa, spectrum_from_h
from .simulator import DESK_STEPS, PAPER_STEPS, ModelParams, run_simulation
from .stochastic import StudentParams

__all__ = [
    "SweepConfig",
    "QResult",
    "CellResult",
    "cell_seed",
    "cell_name",
    "run_cell",
    "run_sweep",
    "load_results",
    "report",
]

DEFAULT_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)
CAPTION_THRESHOLDS = (1.0, 2.0, 3.0, 4.0)
TEXT_THRESHOLDS = (2.0, 3.0, 4.0, 5.0)

# ModelParams fields a config may override (hurst and seed come from the sweep)
_MODEL_KEYS = ("steps", "cancel_rate", "tick", "warmup", "refill_half_spread")
_STUDENT_KEYS = ("degrees_of_freedom", "scale")


@dataclass(frozen=True)
class SweepConfig:
    h_s_grid: tuple = DEFAULT_GRID
    h_x_grid: tuple = DEFAULT_GRID
    rounds: int = 5
    thresholds: tuple = CAPTION_THRESHOLDS
    master_seed: int = 0
    output_dir: str = "results"
    model: dict = field(default_factory=dict)
    workers: int = 1
    fit_min: float = 1e-2
    bins_per_decade: int = 10
    save_returns: bool = False

    def __post_init__(self):
        object.__setattr__(self, "h_s_grid", tuple(float(v) for v in self.h_s_grid))
        object.__setattr__(self, "h_x_grid", tuple(float(v) for v in self.h_x_grid))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        if not self.h_s_grid or not self.h_x_grid:
            raise ParameterError("parameter grids must be non-empty")
        if int(self.rounds) < 1:
            raise ParameterError("rounds must be >= 1")
        if not self.thresholds or any(not q > 0 for q in self.thresholds):
            raise ParameterError("thresholds must be non-empty and positive")
        if int(self.master_seed) < 0:
            raise ParameterError("master_seed must be non-negative")
        if int(self.workers) < 1:
            raise ParameterError("workers must be >= 1")
        unknown = set(self.model) - set(_MODEL_KEYS) - set(_STUDENT_KEYS)
        if unknown:
            raise ParameterError(f"unknown model keys: {sorted(unknown)}")
        # validates every override at load time rather than mid-sweep
        self.params_for(self.h_s_grid[0], self.h_x_grid[0], 0)

    @classmethod
    def from_dict(cls, data):
        """Build from a flat mapping; model keys sit beside the sweep keys."""
        data = dict(data)
        if data.pop("paper_scale", False):
            data.setdefault("steps", PAPER_STEPS)
        model = dict(data.pop("model", {}))
        for key in _MODEL_KEYS + _STUDENT_KEYS:
            if key in data:
                model[key] = data.pop(key)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(model=model, **data)

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))

    def to_dict(self):
        out = asdict(self)
        model = out.pop("model")
        out.update(model)
        return out

    def params_for(self, h_s, h_x, seed):
        model = dict(self.model)
        student = StudentParams(**{k: model.pop(k) for k in _STUDENT_KEYS if k in model})
        model.setdefault("steps", DESK_STEPS)
        return ModelParams(hurst_s=h_s, hurst_x=h_x, seed=seed, student=student, **model)

    def config_hash(self):
        """Hash of everything that changes results (not paths or worker count)."""
        d = self.to_dict()
        for key in ("output_dir", "workers"):
            d.pop(key)
        return hashlib.sha256(dumps(d).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class QResult:
    q: float
    n_intervals: int
    rounds_used: int
    beta: float = float("nan")
    gamma: float = float("nan")
    delta: float = float("nan")
    fit_goodness: float = float("nan")
    fit_bins: int = 0
    h_q: float = float("nan")
    h_rounds: tuple = ()
    h_shuffled: float = float("nan")
    delta_alpha: float = float("nan")
    missing: str = ""


@dataclass(frozen=True)
class CellResult:
    h_s: float
    h_x: float
    seeds: tuple
    per_q: tuple
    runs: tuple = ()  # per-round diagnostics of the return series

    def q(self, q):
        for r in self.per_q:
            if r.q == float(q):
                return r
        raise KeyError(q)

    @classmethod
    def from_dict(cls, d):
        per_q = tuple(_qresult_from_dict(r) for r in d["per_q"])
        return cls(h_s=d["h_s"], h_x=d["h_x"], seeds=tuple(d["seeds"]), per_q=per_q,
                   runs=tuple(d.get("runs", ())))

    def to_dict(self):
        return asdict(self)


def _nan(v):
    return float("nan") if v is None else v


def _qresult_from_dict(d):
    d = {k: _nan(v) for k, v in d.items()}
    d["h_rounds"] = tuple(_nan(v) for v in d.get("h_rounds", ()))
    return QResult(**d)


def cell_seed(master_seed, j, k, i):
    """Seed of round ``i`` in cell ``(j, k)``: a hash of all four indices."""
    ss = np.random.SeedSequence([int(master_seed), int(j), int(k), int(i)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def cell_name(h_s, h_x):
    return f"hs{h_s:.2f}_hx{h_x:.2f}"


def _qtag(q):
    return f"Q{q:g}"


def _run_diagnostics(series):
    v = series.values
    p = series.params
    out = {
        "seed": p.seed,
        "returns": len(v),
        "return_ratio": len(v) / p.steps,
        "excess_kurtosis": float(stats.kurtosis(v)),
        "mean_depth": series.diagnostics.get("mean_depth"),
        "refills": series.diagnostics.get("refills"),
    }
    try:
        out["dfa_returns"] = dfa(v).exponent
        out["dfa_abs_returns"] = dfa(np.abs(v)).exponent
    except ParameterError:
        out["dfa_returns"] = out["dfa_abs_returns"] = float("nan")
    return out


def _analyse_q(q, interval_runs, cell_dir, shuffle_seed, config):
    tag = _qtag(q)
    if not interval_runs:
        return QResult(q=q, n_intervals=0, rounds_used=0, missing="no round had two exceedances")
    total = int(sum(len(r) for r in interval_runs))
    res = {"q": q, "n_intervals": total, "rounds_used": len(interval_runs)}
    notes = []

    scaled = pool_and_scale(interval_runs)
    try:
        pdf = scaled_pdf(scaled, config.bins_per_decade, spacing=pooled_spacing(interval_runs))
        write_table(cell_dir / f"pdf_{tag}.txt", ["x", "density", "count"],
                    zip(pdf.bin_centers, pdf.densities, pdf.counts))
        fit = fit_generalized_gamma(pdf, fit_min=config.fit_min)
        res.update(beta=fit.beta, gamma=fit.gamma, delta=fit.delta,
                   fit_goodness=fit.goodness, fit_bins=fit.n_bins)
    except (FitError, ParameterError) as exc:
        notes.append(f"gamma fit: {exc}")

    rng = np.random.default_rng(shuffle_seed)
    h_runs, h_shuf, h_of_q = [], [], []
    for i, run in enumerate(interval_runs):
        x = run.intervals.astype(float)
        try:
            d = dfa(x)
        except ParameterError:
            continue
        h_runs.append(d.exponent)
        write_table(cell_dir / f"round{i}_dfa_{tag}.txt", ["s", "F"], zip(d.scales, d.fluctuations))
        h_shuf.append(dfa(rng.permutation(x)).exponent)
        m = mfdfa(x)
        h_of_q.append(m.h_of_q)
        write_table(cell_dir / f"round{i}_mfdfa_{tag}.txt", ["q", "h"], zip(m.q_values, m.h_of_q))
    if h_runs:
        res.update(h_q=float(np.mean(h_runs)), h_rounds=tuple(h_runs),
                   h_shuffled=float(np.mean(h_shuf)))
        # spectrum of the round-averaged h(q)
        qv = default_q_values()
        h_mean = np.mean(h_of_q, axis=0)
        tau, alpha, f = spectrum_from_h(qv, h_mean)
        res["delta_alpha"] = float(alpha.max() - alpha.min())
        write_table(cell_dir / f"spectrum_{tag}.txt", ["q", "h", "tau", "alpha", "f"],
                    zip(qv, h_mean, tau, alpha, f))
    else:
        notes.append("interval series too short for DFA")
    res["missing"] = "; ".join(notes)
    return QResult(**res)


def run_cell(config, j, k, out_root=None):
    """Simulate every round of cell ``(j, k)`` and analyse each threshold."""
    h_s, h_x = config.h_s_grid[j], config.h_x_grid[k]
    out_root = Path(config.output_dir if out_root is None else out_root)
    cell_dir = out_root / "cells" / cell_name(h_s, h_x)
    cell_dir.mkdir(parents=True, exist_ok=True)
    seeds = tuple(cell_seed(config.master_seed, j, k, i) for i in range(config.rounds))
    write_json(cell_dir / "meta.json", {
        "config_hash": config.config_hash(), "code_version": __version__,
        "h_s": h_s, "h_x": h_x, "grid_index": [j, k], "seeds": list(seeds),
        "model": config.params_for(h_s, h_x, 0).to_dict() | {"seed": None},
    })

    runs, series = [], []
    for i, seed in enumerate(seeds):
        params = config.params_for(h_s, h_x, seed)
        try:
            s = run_simulation(params)
        except SimulationError as exc:
            runs.append({"seed": seed, "failed": str(exc), **exc.diagnostics})
            continue
        series.append((i, s))
        runs.append(_run_diagnostics(s))
        if config.save_returns:
            from .io import write_returns
            write_returns(cell_dir / f"round{i}_returns.txt", s)

    per_q = []
    for q in config.thresholds:
        interval_runs = []
        for i, s in series:
            try:
                iv = extract_intervals(s, q)
            except EmptyIntervalsError:
                continue
            interval_runs.append(iv)
            write_series(cell_dir / f"round{i}_intervals_{_qtag(q)}.txt", iv.intervals,
                         {"q": q, "seed": seeds[i], "mean_interval": iv.mean_interval},
                         integer=True)
        per_q.append(_analyse_q(q, interval_runs, cell_dir, seeds[0] ^ 0x5EED, config))

    result = CellResult(h_s=h_s, h_x=h_x, seeds=seeds, per_q=tuple(per_q), runs=tuple(runs))
    write_json(cell_dir / "result.json", result.to_dict())
    return result


def _cell_done(config, cell_dir):
    meta, result = cell_dir / "meta.json", cell_dir / "result.json"
    if not (meta.exists() and result.exists()):
        return False
    return read_json(meta).get("config_hash") == config.config_hash()


def _run_cell_job(args):
    config, j, k = args
    return run_cell(config, j, k)


def run_sweep(config, progress=None):
    """Run every grid cell not already completed and return all CellResults.

    Cells are scheduled on a pool of ``config.workers`` processes; with one
    worker they run in-process. Results come back in grid order.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", config.to_dict() | {"config_hash": config.config_hash()})

    cells = [(j, k) for j in range(len(config.h_s_grid)) for k in range(len(config.h_x_grid))]
    all_seeds = [cell_seed(config.master_seed, j, k, i) for j, k in cells for i in range(config.rounds)]
    if len(set(all_seeds)) != len(all_seeds):
        raise ParameterError("seed collision inside the sweep")

    todo = [(j, k) for j, k in cells
            if not _cell_done(config, out / "cells" / cell_name(config.h_s_grid[j], config.h_x_grid[k]))]
    if todo:
        jobs = [(config, j, k) for j, k in todo]
        if config.workers == 1 or len(jobs) == 1:
            for job in jobs:
                _run_cell_job(job)
                if progress:
                    progress(job[1], job[2])
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for (_, j, k), _ in zip(jobs, pool.map(_run_cell_job, jobs)):
                    if progress:
                        progress(j, k)
    return [CellResult.from_dict(read_json(out / "cells" / cell_name(config.h_s_grid[j],
                                                                      config.h_x_grid[k]) / "result.json"))
            for j, k in cells]


def load_results(results_dir):
    cells_dir = Path(results_dir) / "cells"
    paths = sorted(cells_dir.glob("*/result.json")) if cells_dir.is_dir() else []
    if not paths:
        raise ParameterError(f"no cell results under {results_dir}")
    results = [CellResult.from_dict(read_json(p)) for p in paths]
    return sorted(results, key=lambda r: (r.h_x, r.h_s))


def _grid_table(results, value):
    """Rows ordered by H_x, columns by H_s, as in the published beta table."""
    hxs = sorted({r.h_x for r in results})
    hss = sorted({r.h_s for r in results})
    lookup = {(r.h_x, r.h_s): r for r in results}
    rows = []
    for hx in hxs:
        row = [f"{hx:.2f}"]
        for hs in hss:
            r = lookup.get((hx, hs))
            row.append(float("nan") if r is None else value(r))
        rows.append(row)
    return ["H_x\\H_s"] + [f"{hs:.2f}" for hs in hss], rows


def _qvalue(q, attr):
    def get(r):
        try:
            return float(getattr(r.q(q), attr))
        except KeyError:
            return float("nan")
    return get


def report(results_dir, out_dir=None):
    """Write summary tables from persisted cell results; returns written paths.

    Outputs per threshold: beta, H_Q and Delta-alpha tables in the grid
    layout, the planar fit of beta, and copies of each cell's plot-ready
    PDF, F(s) and spectrum files.
    """
    results_dir = Path(results_dir)
    results = load_results(results_dir)
    out = results_dir / "report" if out_dir is None else Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    thresholds = sorted({r.q for c in results for r in c.per_q})
    written = []

    for q in thresholds:
        tag = _qtag(q)
        for name, attr in (("beta", "beta"), ("hq", "h_q"), ("hq_shuffled", "h_shuffled"),
                           ("delta_alpha", "delta_alpha"), ("n_intervals", "n_intervals")):
            cols, rows = _grid_table(results, _qvalue(q, attr))
            path = out / f"{name}_table_{tag}.txt"
            write_table(path, cols, rows)
            written.append(path)

        points = [(c.h_x, c.h_s, c.q(q).beta) for c in results
                  if np.isfinite(_qvalue(q, "beta")(c))]
        record = {"q": q, "n_points": len(points)}
        try:
            record.update(fit_beta_surface(points).to_dict())
        except ParameterError as exc:
            record["error"] = str(exc)
        path = out / f"surface_fit_{tag}.json"
        write_json(path, record)
        written.append(path)

    rows = []
    for c in results:
        for i, run in enumerate(c.runs):
            rows.append([f"{c.h_s:.2f}", f"{c.h_x:.2f}", str(i)] +
                        [_nan(run.get(k))
                         for k in ("return_ratio", "excess_kurtosis", "dfa_returns",
                                   "dfa_abs_returns", "mean_depth")])
    path = out / "runs.txt"
    write_table(path, ["h_s", "h_x", "round", "return_ratio", "excess_kurtosis",
                       "dfa_returns", "dfa_abs_returns", "mean_depth"], rows)
    written.append(path)

    for c in results:
        src = results_dir / "cells" / cell_name(c.h_s, c.h_x)
        dst = out / "cells" / cell_name(c.h_s, c.h_x)
        dst.mkdir(parents=True, exist_ok=True)
        for f in sorted(src.glob("*.txt")):
            if f.name.startswith(("pdf_", "spectrum_")) or "_dfa_" in f.name:
                shutil.copyfile(f, dst / f.name)
                written.append(dst / f.name)
    manifest = "\n".join(str(p.relative_to(out)) for p in sorted(written)) + "\n"
    atomic_write_text(out / "MANIFEST.txt", manifest)
    return sorted(written)

