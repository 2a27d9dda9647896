"""Benchmark experiments behind the command-line harness: midpoint-bias
comparison of the exact and discretised samplers, wall-clock scaling over
the bridge horizon, and path dumps for plotting.

Replicates fan out over a small worker pool with one random stream per
replicate, keyed by (method, replicate), so results are independent of the
pool size and rows are emitted in a deterministic order.  Measured seconds
are the only non-reproducible column.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import time
from dataclasses import dataclass, field, asdict
from multiprocessing import Pool
from typing import Dict, List, Optional

from scipy import stats as _scipy_stats

from . import cdb, sdb
from .models import DiffusionSpec, brownian_spec, langevin_t_spec
from .psrs import psrs_bridge_reference
from .rng import DEFAULT_COIN_CEILING, RngStream

SCHEMA = "bridgebench-results v1"

_TIMING_T_DEFAULT = tuple(list(range(1, 11)) + [20, 30, 50, 100])


@dataclass
class ExperimentConfig:
    experiment: str                    # bias | timing | paths
    model: str = "langevin-t"
    dof: float = 3.0
    x0: float = 2.0
    xT: float = 3.3
    T_list: tuple = (4.0,)
    n_bridges: int = 100
    n_mcmc: int = 50
    seed: int = 1
    sdb_deltas: tuple = (0.4, 0.2, 5e-3)
    gamma: float = cdb.DEFAULT_GAMMA
    psrs_cutoff: float = 6.0
    delta_max: Optional[float] = None
    coin_ceiling: int = DEFAULT_COIN_CEILING
    streams: int = 1
    out: Optional[str] = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.experiment not in ("bias", "timing", "paths"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n_bridges <= 0 or self.n_mcmc < 0:
            raise ValueError("counts must be positive")
        if not self.T_list:
            raise ValueError("need at least one horizon T")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {self.fmt!r}")


@dataclass
class ResultData:
    experiment: str
    config: Dict
    columns: List[str]
    rows: List[tuple]
    meta: Dict = field(default_factory=dict)


@functools.lru_cache(maxsize=8)
def _build_spec(model: str, dof: float) -> DiffusionSpec:
    if model == "langevin-t":
        return langevin_t_spec(dof)
    if model == "brownian":
        return brownian_spec()
    raise ValueError(f"unknown model {model!r}")


def _stream_for(seed: int, method_idx: int, replicate: int) -> RngStream:
    return RngStream(seed, (method_idx << 32) | replicate)


# ---------------------------------------------------------------------------
# bias experiment


def _bias_replicate(args) -> tuple:
    (model, dof, x0, xT, T, n_mcmc, seed, gamma, delta_max, ceiling,
     method_idx, method, replicate) = args
    spec = _build_spec(model, dof)
    stream = _stream_for(seed, method_idx, replicate)
    if method == "cdb":
        state = cdb.run_cdb(stream, spec, x0, xT, T, n_mcmc, gamma,
                            delta_max, ceiling, keep_chain=False)
        mid = state.proposal.reveal_z(stream, 0.5 * T)
    else:
        delta = float(method.split("-", 1)[1])
        st = sdb.run_sdb(stream, spec, x0, xT, T, delta, n_mcmc)
        mid = st.path.midpoint()
    return method, replicate, mid


def _map_tasks(fn, tasks, streams: int, chunksize: int = 16):
    if streams <= 1 or len(tasks) < 2 * chunksize:
        return [fn(t) for t in tasks]
    with Pool(processes=streams) as pool:
        return list(pool.imap_unordered(fn, tasks, chunksize=chunksize))


def run_bias(cfg: ExperimentConfig) -> ResultData:
    """Final-state midpoint samples for the exact sampler and each
    discretised variant, plus two-sample KS statistics against the exact
    one."""
    T = cfg.T_list[0]
    methods = ["cdb"] + [f"sdb-{d:g}" for d in cfg.sdb_deltas]
    tasks = []
    for mi, method in enumerate(methods):
        for r in range(cfg.n_bridges):
            tasks.append((cfg.model, cfg.dof, cfg.x0, cfg.xT, T, cfg.n_mcmc,
                          cfg.seed, cfg.gamma, cfg.delta_max, cfg.coin_ceiling,
                          mi, method, r))
    rows = _map_tasks(_bias_replicate, tasks, cfg.streams, chunksize=64)
    rows.sort(key=lambda r: (r[0], r[1]))
    samples = {m: [v for mm, _, v in rows if mm == m] for m in methods}
    meta = {}
    for m in methods[1:]:
        d_stat, pval = _scipy_stats.ks_2samp(samples[m], samples["cdb"])
        meta[f"ks.{m}_vs_cdb.D"] = float(d_stat)
        meta[f"ks.{m}_vs_cdb.p"] = float(pval)
    return ResultData("bias", _cfg_dict(cfg), ["method", "replicate", "midpoint"],
                      rows, meta)


# ---------------------------------------------------------------------------
# timing experiment


def _timing_cdb_replicate(args) -> tuple:
    (model, dof, x0, xT, T, n_mcmc, seed, gamma, delta_max, ceiling,
     method_idx, replicate) = args
    spec = _build_spec(model, dof)
    stream = _stream_for(seed, method_idx, replicate)
    t0 = time.perf_counter()
    cdb.run_cdb(stream, spec, x0, xT, T, n_mcmc, gamma, delta_max, ceiling,
                keep_chain=False)
    dt = time.perf_counter() - t0
    return "cdb", T, replicate, dt, "ok"


def _timing_psrs_replicate(args) -> tuple:
    (model, dof, x0, xT, T, seed, method_idx, replicate, budget) = args
    spec = _build_spec(model, dof)
    stream = _stream_for(seed, method_idx, replicate)
    t0 = time.perf_counter()
    skel = psrs_bridge_reference(stream, spec, x0, xT, T,
                                 deadline=t0 + budget)
    dt = time.perf_counter() - t0
    return "psrs", T, replicate, dt, ("ok" if skel is not None else "budget")


def run_timing(cfg: ExperimentConfig, psrs_budget_factor: float = 10.0) -> ResultData:
    """Per-bridge wall-clock of the exact sampler for each horizon, plus the
    reference bridge rejection sampler up to the cutoff horizon, each PSRS
    replicate capped at ``psrs_budget_factor`` times the median exact time."""
    rows = []
    meta = {}
    for ti, T in enumerate(cfg.T_list):
        tasks = [(cfg.model, cfg.dof, cfg.x0, cfg.xT, T, cfg.n_mcmc, cfg.seed,
                  cfg.gamma, cfg.delta_max, cfg.coin_ceiling, 2 * ti, r)
                 for r in range(cfg.n_bridges)]
        cdb_rows = _map_tasks(_timing_cdb_replicate, tasks, cfg.streams, chunksize=1)
        rows.extend(cdb_rows)
        secs = sorted(r[3] for r in cdb_rows)
        med = secs[len(secs) // 2]
        meta[f"median_seconds.cdb.T={T:g}"] = med
        if T <= cfg.psrs_cutoff:
            budget = psrs_budget_factor * med
            meta[f"psrs_budget_seconds.T={T:g}"] = budget
            tasks = [(cfg.model, cfg.dof, cfg.x0, cfg.xT, T, cfg.seed,
                      2 * ti + 1, r, budget) for r in range(cfg.n_bridges)]
            psrs_rows = _map_tasks(_timing_psrs_replicate, tasks, cfg.streams,
                                   chunksize=1)
            rows.extend(psrs_rows)
            psecs = sorted(r[3] for r in psrs_rows)
            meta[f"median_seconds.psrs.T={T:g}"] = psecs[len(psecs) // 2]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return ResultData("timing", _cfg_dict(cfg),
                      ["method", "T", "replicate", "seconds", "status"], rows, meta)


# ---------------------------------------------------------------------------
# paths experiment


def _paths_replicate(args) -> tuple:
    (model, dof, x0, xT, T, n_mcmc, seed, gamma, delta_max, ceiling,
     method_idx, replicate) = args
    spec = _build_spec(model, dof)
    stream = _stream_for(seed, method_idx, replicate)
    state = cdb.run_cdb(stream, spec, x0, xT, T, n_mcmc, gamma, delta_max,
                        ceiling, keep_chain=False)
    prop = state.proposal
    pts = list(zip(prop.grid, prop.z_values))
    return T, replicate, pts


def run_paths(cfg: ExperimentConfig) -> ResultData:
    """Revealed (t, value) skeleton points of the final kept path for each
    horizon and replicate."""
    rows = []
    for ti, T in enumerate(cfg.T_list):
        tasks = [(cfg.model, cfg.dof, cfg.x0, cfg.xT, T, cfg.n_mcmc, cfg.seed,
                  cfg.gamma, cfg.delta_max, cfg.coin_ceiling, ti, r)
                 for r in range(cfg.n_bridges)]
        for T_out, r, pts in _map_tasks(_paths_replicate, tasks, cfg.streams):
            rows.extend((T_out, r, t, v) for t, v in pts)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return ResultData("paths", _cfg_dict(cfg), ["T", "replicate", "t", "value"], rows)


def run_experiment(cfg: ExperimentConfig) -> ResultData:
    if cfg.experiment == "bias":
        return run_bias(cfg)
    if cfg.experiment == "timing":
        return run_timing(cfg)
    return run_paths(cfg)


# ---------------------------------------------------------------------------
# result files


def _cfg_dict(cfg: ExperimentConfig) -> Dict:
    d = asdict(cfg)
    d["T_list"] = list(cfg.T_list)
    d["sdb_deltas"] = list(cfg.sdb_deltas)
    return d


def _fmt_cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def dumps_result(data: ResultData, fmt: str) -> str:
    if fmt == "json":
        payload = {"schema": SCHEMA, "experiment": data.experiment,
                   "config": data.config, "meta": data.meta,
                   "columns": data.columns,
                   "rows": [list(r) for r in data.rows]}
        return json.dumps(payload, indent=None, separators=(",", ":"),
                          sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}\n")
    buf.write(f"# experiment={data.experiment}\n")
    buf.write(f"# config={json.dumps(data.config, sort_keys=True)}\n")
    for k in sorted(data.meta):
        buf.write(f"# meta.{k}={_fmt_cell(data.meta[k])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(data.columns)
    for row in data.rows:
        w.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def write_result(data: ResultData, path: str, fmt: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_result(data, fmt))


def _parse_cell(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def loads_result(text: str) -> ResultData:
    """Parse either output format back into a ResultData (round-trip safe)."""
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        if payload.get("schema") != SCHEMA:
            raise ValueError(f"unknown schema {payload.get('schema')!r}")
        return ResultData(payload["experiment"], payload["config"],
                          payload["columns"],
                          [tuple(r) for r in payload["rows"]], payload["meta"])
    lines = text.splitlines()
    if not lines or lines[0] != f"# {SCHEMA}":
        raise ValueError("not a bridgebench result file")
    experiment, config, meta = None, {}, {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        body = lines[i][2:]
        key, val = body.split("=", 1)
        if key == "experiment":
            experiment = val
        elif key == "config":
            config = json.loads(val)
        elif key.startswith("meta."):
            meta[key[5:]] = _parse_cell(val)
        i += 1
    reader = csv.reader(io.StringIO("\n".join(lines[i:])))
    table = list(reader)
    columns = table[0]
    rows = [tuple(_parse_cell(c) for c in row) for row in table[1:]]
    return ResultData(experiment, config, columns, rows, meta)


def load_result(path: str) -> ResultData:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_result(fh.read())
