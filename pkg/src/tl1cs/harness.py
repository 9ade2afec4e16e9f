"""Success-rate experiments: sweeps, aggregation, configuration and CSV output.

Seeding
-------
Every trial is generated from its own child seed, so any trial can be re-run
in isolation and the sweep result does not depend on execution order::

    cell_hash = blake2b(cell_key(...), digest_size=8) read as a big-endian uint64
    seq = SeedSequence(entropy=master_seed, spawn_key=(cell_hash, trial))
    ensemble_seed, signal_seed = seq.generate_state(2, dtype=uint64)

The cell key lists ensemble kind, dimensions, ensemble parameter, sparsity,
separation and value law; solver settings are deliberately left out so that
different solvers (or penalty parameters) see identical problems.
"""

import configparser
import hashlib
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from math import ceil
from typing import Dict, List, Optional, Tuple

import numpy as np

from .sensing import DCT, GAUSSIAN, EnsembleSpec, SignalSpec, VALUE_LAWS, make_problem
from .solver import SolveOptions, solve_constrained, solve_l1_baseline, solve_unconstrained

__all__ = [
    "SUCCESS_TOL",
    "SOLVERS",
    "ExperimentSpec",
    "TrialRecord",
    "ExperimentResult",
    "ConfigError",
    "cell_key",
    "trial_seeds",
    "run_trial",
    "run_experiment",
    "a_sweep",
    "table1_replication",
    "load_config",
    "spec_from_config",
    "spec_to_config",
    "write_trials_csv",
    "write_table_csv",
    "default_workers",
]

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-3
SOLVERS = ("unconstrained", "constrained", "l1-baseline")
CSV_VERSION = "tl1cs-trials v1"
TABLE_VERSION = "tl1cs-table v1"
WORKERS_ENV = "TL1CS_WORKERS"

A_SWEEP_VALUES = (0.1, 0.3, 1.0, 2.0, 10.0)
A_SWEEP_SPARSITY = tuple(range(8, 33, 2))
TABLE1_SPARSITY = (5, 8, 11, 14, 17, 20)
TABLE1_SEPARATIONS = (1, 2, 3, 4, 5)
# Default oversampling factor (= Rayleigh length) for table1; the largest
# integer F for which every cell up to 5RL x sparsity 20 fits in N = 1500.
TABLE1_DEFAULT_F = 15.0


class ConfigError(ValueError):
    pass


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _parse_separation(rule):
    """``"none"`` -> 0, ``"2RL"`` -> 2 (multiples of the Rayleigh length ``F``)."""
    rule = str(rule).strip()
    if rule.lower() in ("none", "0", ""):
        return 0
    if rule.upper().endswith("RL"):
        head = rule[:-2].strip()
        m = int(head) if head else 1
        if m < 1:
            raise ValueError(f"separation multiple must be >= 1, got {rule!r}")
        return m
    raise ValueError(f"separation rule must be 'none' or '<m>RL', got {rule!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    ensemble: str
    M: int
    N: int
    grid: Tuple[float, ...]
    sparsity: Tuple[int, ...]
    separation: str = "none"
    trials: int = 50
    solver: str = "unconstrained"
    options: SolveOptions = field(default_factory=SolveOptions)
    seed: int = 0
    values: str = "standard-normal"
    name: str = "experiment"

    def __post_init__(self):
        kind = {"gaussian": GAUSSIAN, GAUSSIAN: GAUSSIAN, "dct": DCT, DCT: DCT}.get(self.ensemble)
        if kind is None:
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        object.__setattr__(self, "ensemble", kind)
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "sparsity", tuple(int(k) for k in self.sparsity))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.grid or not self.sparsity:
            raise ValueError("ensemble grid and sparsity list must be non-empty")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.values not in VALUE_LAWS:
            raise ValueError(f"value law must be one of {VALUE_LAWS}")
        if _parse_separation(self.separation) and kind != DCT:
            raise ValueError("Rayleigh-length separation applies to DCT ensembles only")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for p, k in self.cells():
            gap = self.gap(p)
            if k > self.N or (gap and k > 0 and (k - 1) * gap >= self.N):
                raise ValueError(f"cell {self.grid_name}={p:g}, k={k} cannot place spikes "
                                 f"{gap} apart in length {self.N}")

    @property
    def grid_name(self):
        return "r" if self.ensemble == GAUSSIAN else "F"

    @property
    def separation_multiple(self):
        return _parse_separation(self.separation)

    def gap(self, param):
        """Minimum index gap for a cell: ``ceil(m F)`` under an ``mRL`` rule, else 0."""
        m = self.separation_multiple
        return int(ceil(m * param)) if m else 0

    def cells(self):
        return [(p, k) for p in self.grid for k in self.sparsity]

    def solver_options(self):
        if self.solver == "unconstrained":
            return self.options.replace(model="unconstrained")
        if self.solver == "constrained":
            return self.options.replace(model="constrained")
        return self.options


@dataclass
class TrialRecord:
    ensemble: str
    param: float
    k: int
    separation: int
    a: float
    trial: int
    ensemble_seed: int
    signal_seed: int
    rel_error: float
    success: bool
    outer_iters: int
    inner_iters: int
    status: str
    wall_time: float = 0.0


def cell_key(spec, param, k):
    return (f"{spec.ensemble}|M={spec.M}|N={spec.N}|{spec.grid_name}={float(param)!r}"
            f"|k={int(k)}|gap={spec.gap(param)}|values={spec.values}")


def _cell_hash(key):
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "big")


def trial_seeds(master_seed, key, trial):
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_cell_hash(key), int(trial)))
    ens, sig = seq.generate_state(2, dtype=np.uint64)
    return int(ens), int(sig)


def build_problem(spec, param, k, trial):
    ens_seed, sig_seed = trial_seeds(spec.seed, cell_key(spec, param, k), trial)
    if spec.ensemble == GAUSSIAN:
        ens = EnsembleSpec(GAUSSIAN, spec.M, spec.N, r=param, seed=ens_seed)
    else:
        ens = EnsembleSpec(DCT, spec.M, spec.N, F=param, seed=ens_seed)
    sig = SignalSpec(spec.N, k, spec.gap(param), spec.values, sig_seed)
    return make_problem(ens, sig), ens_seed, sig_seed


def _solve(spec, prob):
    opts = spec.solver_options()
    if spec.solver == "unconstrained":
        return solve_unconstrained(prob, opts)
    if spec.solver == "constrained":
        return solve_constrained(prob, opts)
    return solve_l1_baseline(prob, opts)


def run_trial(spec, param, k, trial):
    """Generate and solve one trial; failures become non-successes."""
    t0 = time.perf_counter()
    ens_seed = sig_seed = 0
    try:
        prob, ens_seed, sig_seed = build_problem(spec, param, k, trial)
        res = _solve(spec, prob)
        err = prob.relative_error(res.x)
        status = res.status
        outer, inner = res.outer_iters, res.total_inner_iters
    except Exception as exc:  # a single bad trial must not abort the sweep
        log.warning("trial %s/%s/%s failed: %s", param, k, trial, exc)
        err, status, outer, inner = float("inf"), f"error:{type(exc).__name__}", 0, 0
    ok = bool(np.isfinite(err) and err <= SUCCESS_TOL and status not in ("diverged", "timeout"))
    return TrialRecord(spec.ensemble, float(param), int(k), spec.gap(param), spec.options.a,
                       int(trial), ens_seed, sig_seed, float(err), ok, outer, inner, status,
                       time.perf_counter() - t0)


def _run_task(args):
    spec, param, k, trial = args
    return run_trial(spec, param, k, trial)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: List[TrialRecord]

    @property
    def rates(self):
        """Success rate per ``(param, k)`` cell."""
        out = {}
        for cell in self.spec.cells():
            recs = [r for r in self.records if (r.param, r.k) == cell]
            out[cell] = sum(r.success for r in recs) / len(recs) if recs else float("nan")
        return out

    def aggregates(self):
        rows = []
        for (p, k), rate in self.rates.items():
            errs = [r.rel_error for r in self.records if (r.param, r.k) == (p, k)]
            rows.append({"param": p, "k": k, "n": len(errs), "rate": rate,
                         "median_rel_error": float(np.median(errs))})
        return rows


def run_experiment(spec, workers=None, progress=None):
    """Run every trial of every cell; records come back in (cell, trial) order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    tasks = [(spec, p, k, t) for (p, k) in spec.cells() for t in range(spec.trials)]
    if workers == 1:
        records = []
        for i, task in enumerate(tasks):
            records.append(_run_task(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    order = {cell: i for i, cell in enumerate(spec.cells())}
    records.sort(key=lambda r: (order[(r.param, r.k)], r.trial))
    return ExperimentResult(spec, records)


@dataclass
class SweepResult:
    """Records from several experiments plus a rate table keyed by (row, column)."""

    records: List[TrialRecord]
    table: Dict[tuple, float]
    rows: tuple
    cols: tuple
    row_name: str
    col_name: str
    config: dict = field(default_factory=dict)


def a_sweep(trials=100, seed=0, a_values=A_SWEEP_VALUES, sparsity=A_SWEEP_SPARSITY,
            M=64, N=256, options=None, workers=None):
    """Success rate of the unconstrained solver over a grid of penalty parameters.

    Gaussian ``M x N`` matrices (r = 0); the same problems are used for every ``a``.
    """
    options = SolveOptions() if options is None else options
    records, table = [], {}
    for a in a_values:
        spec = ExperimentSpec("gaussian", M, N, (0.0,), tuple(sparsity), "none", trials,
                              "unconstrained", options.replace(a=float(a)), seed, name="a-sweep")
        res = run_experiment(spec, workers)
        records.extend(res.records)
        for (_, k), rate in res.rates.items():
            table[(float(a), k)] = rate
    config = spec_to_config(spec)
    config["solver"].pop("a", None)
    config["a-sweep"] = {"a": _fmt_list(a_values)}
    return SweepResult(records, table, tuple(float(a) for a in a_values), tuple(sparsity),
                       "a", "k", config)


def table1_replication(F, trials=50, seed=0, sparsity=TABLE1_SPARSITY,
                       separations=TABLE1_SEPARATIONS, M=100, N=1500, options=None, workers=None):
    """Success rates on over-sampled DCT matrices over sparsity x separation (in RL units)."""
    options = SolveOptions() if options is None else options
    records, table = [], {}
    for m in separations:
        spec = ExperimentSpec("dct", M, N, (float(F),), tuple(sparsity), f"{int(m)}RL", trials,
                              "unconstrained", options, seed, name="table1")
        res = run_experiment(spec, workers)
        records.extend(res.records)
        for (_, k), rate in res.rates.items():
            table[(int(m), k)] = rate
    config = spec_to_config(spec)
    config["signal"]["separation"] = ",".join(f"{int(m)}RL" for m in separations)
    return SweepResult(records, table, tuple(int(m) for m in separations), tuple(sparsity),
                       "separation_RL", "sparsity", config)


# configuration ---------------------------------------------------------------

_SOLVER_KEYS = {
    "a": float, "lambda": float, "c": float, "delta": float, "eps_outer": float,
    "eps_inner": float, "max_outer": int, "max_inner": int, "model": str, "time_limit": float,
}
_OPTION_NAMES = {"lambda": "lam"}


def _fmt(v):
    # shortest round-trip form keeps the echoed config readable and exact
    return repr(float(v)) if isinstance(v, float) else str(v)


def _fmt_list(vals):
    return ", ".join(_fmt(float(v)) if isinstance(v, float) else str(v) for v in vals)


def _parse_list(text, conv):
    text = text.strip()
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad range {text!r}; use start:stop[:step] (inclusive)")
        start, stop = conv(parts[0]), conv(parts[1])
        step = conv(parts[2]) if len(parts) == 3 else conv("1")
        out, v = [], start
        while v <= stop + (1e-12 if conv is float else 0):
            out.append(v)
            v = v + step
        return tuple(out)
    return tuple(conv(p) for p in text.replace(";", ",").split(",") if p.strip())


def _override(cp, item):
    if "=" not in item:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    lhs, value = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"override key must be section.key, got {lhs!r}")
    section, key = lhs.strip().split(".", 1)
    if not cp.has_section(section):
        cp.add_section(section)
    cp.set(section, key.strip(), value.strip())


def load_config(path, overrides=()):
    """Read an INI-style experiment file; ``overrides`` are ``section.key=value`` strings."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for item in overrides:
        _override(cp, item)
    return spec_from_config(cp)


def spec_from_config(cp):
    try:
        exp = cp["experiment"] if cp.has_section("experiment") else {}
        ens = cp["ensemble"]
        sig = cp["signal"]
        kind = ens.get("kind", "gaussian").strip()
        grid_key = "r" if kind in ("gaussian", GAUSSIAN) else "F"
        grid = _parse_list(ens.get(grid_key, "0" if grid_key == "r" else ""), float)
        opts = {}
        if cp.has_section("solver"):
            for key, raw in cp["solver"].items():
                if key not in _SOLVER_KEYS:
                    raise ConfigError(f"unknown solver key {key!r}")
                opts[_OPTION_NAMES.get(key, key)] = _SOLVER_KEYS[key](raw)
        known = {"kind", "M", "N", "r", "F"}
        extra = set(ens) - known
        if extra:
            raise ConfigError(f"unknown ensemble keys {sorted(extra)}")
        return ExperimentSpec(
            ensemble=kind,
            M=int(ens["M"]),
            N=int(ens["N"]),
            grid=grid,
            sparsity=_parse_list(sig["sparsity"], int),
            separation=sig.get("separation", "none"),
            trials=int(exp.get("trials", 50)),
            solver=exp.get("solver", "unconstrained"),
            options=SolveOptions(**opts),
            seed=int(exp.get("seed", 0)),
            values=sig.get("values", "standard-normal"),
            name=exp.get("name", "experiment"),
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed experiment configuration: {exc}") from exc


def spec_to_config(spec):
    """Sections of the effective configuration, used for provenance headers."""
    o = spec.solver_options()
    solver = {"a": _fmt(o.a), "lambda": _fmt(o.lam), "c": _fmt(o.c_value),
              "delta": _fmt(o.delta_value), "eps_outer": _fmt(o.eps_outer),
              "eps_inner": _fmt(o.eps_inner), "max_outer": str(o.max_outer),
              "max_inner": str(o.max_inner_value), "model": o.model}
    if o.time_limit is not None:
        solver["time_limit"] = _fmt(o.time_limit)
    return {
        "experiment": {"name": spec.name, "solver": spec.solver, "trials": str(spec.trials),
                       "seed": str(spec.seed)},
        "ensemble": {"kind": spec.ensemble, "M": str(spec.M), "N": str(spec.N),
                     spec.grid_name: _fmt_list(spec.grid)},
        "signal": {"sparsity": _fmt_list(spec.sparsity), "separation": spec.separation,
                   "values": spec.values},
        "solver": solver,
    }


# CSV output -------------------------------------------------------------------

TRIAL_COLUMNS = ("row_type", "ensemble", "param", "k", "separation", "a", "trial",
                 "ensemble_seed", "signal_seed", "rel_error", "success", "outer_iters",
                 "inner_iters", "status")


def _header_lines(version, config):
    lines = [f"# {version}"]
    for section, items in config.items():
        for key, value in items.items():
            lines.append(f"# [{section}] {key} = {value}")
    return lines


def _num(v):
    return f"{v:.17g}"


def write_trials_csv(out, records, config, include_timing=False):
    """One row per trial, then one ``aggregate`` row per cell.

    Aggregate rows reuse the columns: ``trial`` holds the trial count,
    ``success`` the success rate and ``rel_error`` the median relative error.
    Wall times are nondeterministic and only written when ``include_timing``.
    """
    close = False
    if isinstance(out, (str, os.PathLike)):
        out, close = open(out, "w", newline=""), True
    try:
        cols = TRIAL_COLUMNS + (("wall_time",) if include_timing else ())
        lines = _header_lines(CSV_VERSION, config)
        lines.append(",".join(cols))
        for r in records:
            row = ["trial", r.ensemble, _num(r.param), str(r.k), str(r.separation), _num(r.a),
                   str(r.trial), str(r.ensemble_seed), str(r.signal_seed), _num(r.rel_error),
                   str(int(r.success)), str(r.outer_iters), str(r.inner_iters), r.status]
            if include_timing:
                row.append(_num(r.wall_time))
            lines.append(",".join(row))
        groups = {}
        for r in records:
            groups.setdefault((r.ensemble, r.param, r.k, r.separation, r.a), []).append(r)
        for (ens, p, k, sep, a), recs in groups.items():
            rate = sum(r.success for r in recs) / len(recs)
            med = float(np.median([r.rel_error for r in recs]))
            row = ["aggregate", ens, _num(p), str(k), str(sep), _num(a), str(len(recs)), "", "",
                   _num(med), _num(rate), "", "", ""]
            if include_timing:
                row.append(_num(float(sum(r.wall_time for r in recs))))
            lines.append(",".join(row))
        out.write("\n".join(lines) + "\n")
    finally:
        if close:
            out.close()


def write_table_csv(out, sweep, percent=True):
    """Rate table, one row per ``sweep.rows`` entry and one column per ``sweep.cols`` entry."""
    close = False
    if isinstance(out, (str, os.PathLike)):
        out, close = open(out, "w", newline=""), True
    try:
        lines = _header_lines(TABLE_VERSION, sweep.config)
        lines.append(",".join([f"{sweep.row_name}\\{sweep.col_name}"] + [str(c) for c in sweep.cols]))
        for row in sweep.rows:
            vals = [sweep.table[(row, c)] for c in sweep.cols]
            vals = [v * 100 if percent else v for v in vals]
            lines.append(",".join([str(row)] + [f"{v:.17g}" for v in vals]))
        out.write("\n".join(lines) + "\n")
    finally:
        if close:
            out.close()


def format_table(sweep, percent=True):
    buf = io.StringIO()
    width = max(len(str(r)) for r in sweep.rows) + 2
    buf.write(f"{sweep.row_name:>{width}} | " + " ".join(f"{c:>6}" for c in sweep.cols) + "\n")
    for row in sweep.rows:
        vals = [sweep.table[(row, c)] * (100 if percent else 1) for c in sweep.cols]
        buf.write(f"{str(row):>{width}} | " + " ".join(f"{v:6.1f}" for v in vals) + "\n")
    return buf.getvalue()
