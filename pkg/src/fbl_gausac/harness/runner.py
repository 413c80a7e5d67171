"""Grid execution and result emission.

Every grid point gets its own seed, derived from the master seed and a stable
hash of the point's canonical description, so adding or removing points never
changes the results of the others.  Rows are written in grid order whatever
order the points finish in.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Sequence

from .. import rng as _rng
from ..errors import FblError
from ..gaussian_region import RateTuple, achievable_logM_symmetric, region_threshold, lower_orthant_prob
from ..dispersion import PowerAllocation, dispersion_matrix
from ..mac_sim import MacConfig, rcu_mc_estimate, simulate_mac
from ..parallel import map_units
from ..rac_sim import ERROR_CLASSES, build_rac_schedule, simulate_rac, wrong_time_bound
from .config import ExperimentConfig
from . import verify as _verify

COLUMNS = ("mode", "n", "K", "k", "P", "eps", "M", "metric_name", "value", "value_bits", "ci_half_width",
           "samples", "seed", "note")
LN2 = math.log(2.0)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
EXIT_IO = 3


@dataclass(frozen=True)
class Point:
    mode: str
    n: int | None = None
    P: float | None = None
    eps: float | None = None
    M: int | None = None
    K: int | None = None

    def canonical(self) -> str:
        return f"{self.mode}|n={self.n}|P={self.P!r}|eps={self.eps!r}|M={self.M}|K={self.K}"


@dataclass
class Row:
    mode: str
    n: int | None
    K: int | None
    k: int | None
    P: float | None
    eps: float | None
    M: int | None
    metric_name: str
    value: float
    value_bits: float | None = None
    ci_half_width: float | None = None
    samples: int | None = None
    seed: int | None = None
    note: str = ""

    def as_strings(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in COLUMNS]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def point_seed(master: int, point: Point) -> int:
    return _rng.derive_key(master, _rng.stable_hash(point.canonical()))


def grid_points(cfg: ExperimentConfig) -> list[Point]:
    """Grid points in deterministic order (Cartesian product, last key fastest)."""
    m = cfg.mode
    if m == "verify":
        return [Point(m)]
    if m == "rates-mac":
        ms = cfg.messages or (None,)
        return [Point(m, n, P, e, M, K) for n, P, e, K, M in product(cfg.n, cfg.power, cfg.eps, cfg.users, ms)]
    if m == "simulate-mac":
        return [Point(m, n, P, None, M, K) for n, P, K, M in product(cfg.n, cfg.power, cfg.users, cfg.messages)]
    # RAC modes: a point is (P, eps, K) with either M or the last decoding time
    if cfg.messages:
        return [Point(m, None, P, e, M, K) for P, e, K, M in product(cfg.power, cfg.eps, cfg.users, cfg.messages)]
    return [Point(m, n, P, e, None, K) for n, P, e, K in product(cfg.n, cfg.power, cfg.eps, cfg.users)]


# ---------------------------------------------------------------- per-mode work


def _rates_mac(pt: Point, seed: int, cfg: ExperimentConfig, workers: int) -> list[Row]:
    value = achievable_logM_symmetric(pt.n, pt.eps, pt.K, pt.P, cfg.c0)
    rows = [Row(pt.mode, pt.n, pt.K, pt.K, pt.P, pt.eps, pt.M, "log_m_per_user", value, value / LN2, None, None, seed)]
    if pt.M is not None:
        pa = PowerAllocation.symmetric(pt.K, pt.P)
        z = region_threshold(pt.n, pa, RateTuple.symmetric(pt.K, math.log(pt.M)), cfg.c0)
        est = lower_orthant_prob(dispersion_matrix(pa).values, z, cfg.trials, seed, workers)
        verdict = "achievable" if est.low > 1 - pt.eps else ("not" if est.high < 1 - pt.eps else "uncertain")
        rows.append(Row(pt.mode, pt.n, pt.K, pt.K, pt.P, pt.eps, pt.M, "orthant_probability", est.point, None,
                        est.half_width, est.samples, seed, verdict))
    return rows


def _schedule(pt: Point, cfg: ExperimentConfig):
    if pt.M is not None:
        return build_rac_schedule(pt.K, pt.P, pt.eps, M=pt.M, c0=cfg.c0)
    return build_rac_schedule(pt.K, pt.P, pt.eps, n_K=pt.n, c0=cfg.c0)


def _rates_rac(pt: Point, seed: int, cfg: ExperimentConfig, workers: int) -> list[Row]:
    s = _schedule(pt, cfg)
    rows = []
    for k in range(1, s.K + 1):
        nk = s.decode_times[k]
        v = achievable_logM_symmetric(nk, pt.eps, k, pt.P, cfg.c0)
        rows.append(Row(pt.mode, nk, s.K, k, pt.P, pt.eps, s.M, "log_m_per_user", v, v / LN2, None, None, seed,
                        f"n0={s.decode_times[0]}"))
    return rows


def _simulate_mac(pt: Point, seed: int, cfg: ExperimentConfig, workers: int) -> list[Row]:
    mc = MacConfig(n=pt.n, M=(pt.M,) * pt.K, powers=(pt.P,) * pt.K, trials=cfg.trials, seed=seed,
                   inner_samples=cfg.inner_samples)
    sim = simulate_mac(mc, workers)
    rows = [Row(pt.mode, pt.n, pt.K, pt.K, pt.P, None, pt.M, "ensemble_error", sim.error.point, None,
                sim.error.half_width, sim.trials, seed, f"errors={sim.errors}")]
    if pt.K <= 3:
        rcu = rcu_mc_estimate(mc, workers)
        rows.append(Row(pt.mode, pt.n, pt.K, pt.K, pt.P, None, pt.M, "rcu_bound", rcu.point, None,
                        rcu.half_width, rcu.samples, seed))
    return rows


def _simulate_rac(pt: Point, seed: int, cfg: ExperimentConfig, workers: int) -> list[Row]:
    s = _schedule(pt, cfg)
    res = simulate_rac(s, cfg.trials, seed=seed, workers=workers)
    rows = []
    for k in range(s.K + 1):
        base = dict(mode=pt.mode, n=s.decode_times[k], K=s.K, k=k, P=pt.P, eps=pt.eps, M=s.M, seed=seed)
        tot = res.rate(k)
        rows.append(Row(metric_name="error_rate", value=tot.point, ci_half_width=tot.half_width,
                        samples=tot.samples, note=f"errors={res.errors(k)}", **base))
        for cls in ERROR_CLASSES:
            e = res.rate(k, cls)
            rows.append(Row(metric_name=f"{cls.value}_rate", value=e.point, ci_half_width=e.half_width,
                            samples=e.samples, note=f"count={e.successes}", **base))
        rows.append(Row(metric_name="power_violations", value=float(res.power_violations.get(k, 0)),
                        samples=res.trials[k], **base))
        try:
            b = wrong_time_bound(s, k)
            rows.append(Row(metric_name="wrong_time_bound", value=b, **base))
        except FblError as exc:
            rows.append(Row(metric_name="wrong_time_bound", value=math.nan, note=str(exc), **base))
    return rows


def _verify_rows(pt: Point, seed: int, cfg: ExperimentConfig, workers: int) -> list[Row]:
    samples = min(cfg.trials, 200_000)
    rows = []
    for r in _verify.run_all(seed, samples):
        rows.append(Row(pt.mode, None, None, None, None, None, None, r.name, r.value, None, None, r.samples, seed,
                        ("pass" if r.passed else "FAIL") + (f" {r.detail}" if r.detail else "")))
    return rows


_HANDLERS = {
    "rates-mac": _rates_mac,
    "rates-rac": _rates_rac,
    "simulate-mac": _simulate_mac,
    "simulate-rac": _simulate_rac,
    "verify": _verify_rows,
}


def run_point(pt: Point, seed: int, cfg: ExperimentConfig, workers: int = 1) -> list[Row]:
    """Compute the rows of one grid point; guard violations become a single ``error`` row."""
    try:
        return _HANDLERS[pt.mode](pt, seed, cfg, workers)
    except FblError as exc:
        return [Row(pt.mode, pt.n, pt.K, None, pt.P, pt.eps, pt.M, "error", math.nan, None, None, None, seed,
                    str(exc))]


def _point_task(args):
    pt, seed, cfg = args
    return run_point(pt, seed, cfg, 1)


@dataclass
class RunResult:
    rows: list[Row]
    status: int
    failures: list[str] = field(default_factory=list)


def run(cfg: ExperimentConfig, workers: int = 1) -> RunResult:
    """Execute the whole grid.

    With several points the worker pool runs points in parallel; a single
    point hands the workers to its simulation instead.  Either way the rows
    are identical.
    """
    points = grid_points(cfg)
    if not points:
        raise ValueError("empty grid")
    seeds = [point_seed(cfg.seed, p) for p in points]
    if len(points) > 1:
        chunks = map_units(_point_task, [(p, s, cfg) for p, s in zip(points, seeds)], workers)
    else:
        chunks = [run_point(points[0], seeds[0], cfg, workers)]
    rows = [r for chunk in chunks for r in chunk]
    failures = [f"{r.metric_name}: {r.note}" for r in rows if r.metric_name == "error"]
    status = EXIT_CONFIG if failures else EXIT_OK
    if cfg.mode == "verify":
        bad = [r.metric_name for r in rows if r.note.startswith("FAIL")]
        failures += bad
        if bad:
            status = EXIT_VERIFY
    return RunResult(rows, status, failures)


def rows_to_csv(rows: Sequence[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.as_strings())
    return buf.getvalue()


def rows_to_json(rows: Sequence[Row]) -> str:
    def clean(d):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

    return json.dumps([clean(asdict(r)) for r in rows], indent=1) + "\n"


def _parse(value: str, kind):
    return None if value == "" else kind(value)


def read_csv(text: str) -> list[dict]:
    """Parse a result CSV back into typed dictionaries."""
    types = {"n": int, "K": int, "k": int, "P": float, "eps": float, "M": int, "value": float,
             "value_bits": float, "ci_half_width": float, "samples": int, "seed": int}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append({k: _parse(v, types[k]) if k in types else v for k, v in rec.items()})
    return out


def reproduce_row(row: dict, cfg: ExperimentConfig) -> Row:
    """Recompute one CSV row from its own columns and recorded seed.

    ``cfg`` supplies the non-grid settings (trials, c0, inner_samples).
    """
    mode = row["mode"]
    if mode in ("rates-rac", "simulate-rac"):
        pt = Point(mode, None, row["P"], row["eps"], row["M"], row["K"])
    elif mode == "simulate-mac":
        pt = Point(mode, row["n"], row["P"], None, row["M"], row["K"])
    elif mode == "rates-mac":
        pt = Point(mode, row["n"], row["P"], row["eps"], row["M"], row["K"])
    else:
        pt = Point(mode)
    for r in run_point(pt, row["seed"], cfg):
        if r.metric_name == row["metric_name"] and (r.k == row["k"] or row["k"] is None):
            return r
    raise KeyError(f"row {row['metric_name']} not produced when re-running the point")
