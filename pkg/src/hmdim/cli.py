"""Batch experiment runner.

``hmdim <subcommand> --config <path> [--out <dir>] [--threads <n>]``

Every run writes ``summary.json`` (deterministic given config and seed),
``metadata.json`` (timestamps, threads, versions) and CSV tables into the
output directory. Exit codes: 0 success, 1 usage or input error, 2 a failed
consistency check.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import platform
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from hmdim import __version__
from hmdim._validation import (
    HmdimError,
    NumericError,
    OracleInconsistentError,
    UnsupportedModelError,
)
from hmdim.free_group import FreeGroup
from hmdim.matrix_group import SL2Group
from hmdim.walks import StepDistribution

SUBCOMMANDS = ("drift", "entropy", "dimension", "verify-formula", "oracle", "diagnostics",
               "continuity", "plotdata")
BUNDLED = ("srw-f2", "biased-f2", "srw-f3", "sanov-sl2z")
PROB_SUM_TOL = 1e-9
TRACKING_THRESHOLD = 0.95

DEFAULTS = {
    "drift": {"horizon": 10**4, "trajectories": 10**3},
    "oracle": {"mc_horizon": 10**4, "mc_trajectories": 10**3},
    "entropy": {"horizon": 12, "trajectories": 10**4, "prune": 1e-15, "budget": 1e-6,
                "spacing": 2, "walk": "model"},
    "dimension": {"samples": 10**5, "batches": 20},
    "tracking": {"eps": 0.2, "horizons": [100, 1000], "trajectories": 1000},
    "event_A": {"eps": 0.3, "N": [4, 6, 8, 10, 12], "horizon": 12, "trajectories": 10**4},
    "shadow_hit": {"R": 2.0, "eps": 0.3, "horizon": 1000, "trajectories": 1000},
    "stationarity": {"samples": 10**5, "z_max": 4.0},
    "continuity": {"deltas": [0.1, 0.05, 0.01], "samples": 10**5, "depth": 40},
}


class ConfigError(HmdimError, ValueError):
    reason = "schema"


class UsageError(HmdimError, ValueError):
    reason = "usage"


class MissingRunError(HmdimError, FileNotFoundError):
    reason = "missing-run"


class ConsistencyError(HmdimError, RuntimeError):
    reason = "consistency"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- config

def schema() -> dict:
    return json.loads(resources.files("hmdim").joinpath("schema/config.schema.json").read_text())


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("hmdim").joinpath(f"configs/{name}.json")))


def _resolve_config(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    if arg in BUNDLED:
        return bundled_config_path(arg)
    raise ConfigError(f"config {arg!r} not found")


def load_config(path) -> dict:
    import jsonschema

    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    total = math.fsum(float(a["p"]) for a in cfg["measure"]["atoms"])
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ConfigError(f"measure/atoms: probabilities sum to {total!r}, not 1")
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def build_measure(cfg: dict) -> StepDistribution:
    m = cfg["model"]
    model = FreeGroup(m["rank"]) if m["kind"] == "free" else SL2Group(m["generators"])
    try:
        return StepDistribution.from_json({"model": m["kind"], "atoms": cfg["measure"]["atoms"]},
                                          model)
    except HmdimError as exc:
        raise ConfigError(f"measure: {exc}") from exc


def _section(cfg: dict, name: str, parent: str | None = None) -> dict:
    src = cfg.get(parent, {}) if parent else cfg
    return {**DEFAULTS.get(name, {}), **src.get(name, {})}


# ---------------------------------------------------------------- helpers

def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _est(e) -> dict | None:
    if e is None:
        return None
    return {"value": e.value, "stderr": e.stderr, "n_samples": e.n_samples, "method": e.method}


def _skeleton(cfg: dict, sub: str) -> dict:
    return {
        "subcommand": sub,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "name": cfg.get("name"),
        "status": "ok",
        "drift": None,
        "entropy": {"mc": None, "subadditive": None, "furstenberg": None},
        "dim": None,
        "ratio_h_over_l": None,
        "checks": {"upper_bound": None, "stationarity": None, "tracking": None,
                   "eventA": None, "shadow_hit": None},
    }


class Run:
    """State shared by one invocation: config, measure, output and cached results."""

    def __init__(self, cfg: dict, out: Path, threads):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.seed = cfg["seed"]
        self.mu = build_measure(cfg)
        self.kind = self.mu.model.kind
        self.rows = []  # estimators.csv
        self._oracle = None

    @property
    def oracle_ok(self) -> bool:
        return self.kind == "free" and self.mu.is_nearest_neighbor()

    def oracle(self):
        """Exact harmonic measure of ``mu`` (free nearest-neighbour only)."""
        from hmdim.oracle import HarmonicMeasureOracle

        if self._oracle is None:
            if not self.oracle_ok:
                raise UnsupportedModelError("exact oracle needs a nearest-neighbour free measure")
            o = _section(self.cfg, "oracle")
            self._oracle = HarmonicMeasureOracle(o["mc_horizon"], o["mc_trajectories"],
                                                 self.seed, self.threads).fit(self.mu)
        return self._oracle

    def abstract_oracle(self):
        """Oracle of the abstract free walk (exact entropy for free matrix groups)."""
        from hmdim.oracle import furstenberg_entropy, solve_stationary_markov

        if self.oracle_ok:
            return self.oracle().entropy_
        free = self.mu.abstract_free()
        if not free.is_nearest_neighbor():
            return None
        return furstenberg_entropy(free, solve_stationary_markov(free))

    def record(self, quantity: str, est=None, value=None, method=None, stderr=math.nan, n=0):
        if est is not None:
            value, stderr, n, method = est.value, est.stderr, est.n_samples, est.method
        self.rows.append((quantity, method, value, stderr, n))

    # -- computations

    def drift(self) -> dict:
        from hmdim.estimators.drift import drift_mc

        d = _section(self.cfg, "drift")
        mc = drift_mc(self.mu.model, self.mu, d["horizon"], d["trajectories"], self.seed,
                      self.threads)
        self.record("drift", mc)
        out = {"mc": _est(mc), "exact": None, "value": mc.value, "stderr": mc.stderr}
        if self.oracle_ok:
            ex = self.oracle().drift_
            self.record("drift", value=ex.value, method="exact", stderr=ex.exact_error)
            if not mc.agrees_with((ex.value, ex.exact_error)):
                raise OracleInconsistentError(
                    f"drift_mc {mc.value} disagrees with exact drift {ex.value}")
            out.update({"exact": {"value": ex.value, "error": ex.exact_error,
                                  "cocycle": ex.cocycle, "steps": ex.steps},
                        "value": ex.value, "stderr": ex.exact_error})
        self._drift = out
        return out

    def entropy(self) -> dict:
        from hmdim.estimators.entropy import build_tables, entropy_shannon_mc, entropy_subadditive

        e = _section(self.cfg, "entropy")
        walk = e["walk"]
        mu = self.mu.abstract_free() if walk == "abstract-free" else self.mu
        tables = build_tables(mu, e["horizon"], e["prune"], e["budget"])
        sub = entropy_subadditive(mu.model, mu, e["horizon"], e["prune"], e["budget"], tables,
                                  e["spacing"])
        mc = entropy_shannon_mc(mu.model, mu, e["horizon"], e["trajectories"], e["prune"],
                                self.seed, tables, self.threads, e["budget"], e["spacing"])
        self.record("entropy", sub)
        self.record("entropy", mc)
        furst = self.abstract_oracle() if (self.oracle_ok or self.kind == "sl2z") else None
        if furst is not None:
            self.record("entropy", value=furst, method="furstenberg", stderr=0.0)
        out = {"mc": {**_est(mc), "raw_mean": mc.extra["raw_mean"]}, "subadditive": _est(sub),
               "furstenberg": furst, "walk": walk}
        ests = [mc, sub] + ([] if furst is None else [(furst, 0.0)])
        out["agree"] = all(a.agrees_with(b) for i, a in enumerate(ests[:2]) for b in ests[i + 1:])
        if furst is not None:
            out["value"], out["stderr"] = furst, 0.0
        else:
            best = min((mc, sub), key=lambda x: x.stderr)
            out["value"], out["stderr"] = best.value, best.stderr
        self._entropy = out
        return out

    def formula_inputs(self):
        """``(h, h_err, l, l_err)`` from exact values where available, else estimates."""
        if self.oracle_ok:
            o = self.oracle()
            return o.entropy_, 0.0, o.drift_.value, o.drift_.exact_error
        if not hasattr(self, "_entropy"):
            self.entropy()
        if not hasattr(self, "_drift"):
            self.drift()
        return (self._entropy["value"], self._entropy["stderr"], self._drift["value"],
                self._drift["stderr"])

    def cloud(self):
        from hmdim.estimators.boundary import MIN_FREE_DEPTH, sample_boundary_cloud
        from hmdim.matrix_group import D_MIN

        if getattr(self, "_cloud", None) is None:
            d = _section(self.cfg, "dimension")
            depth = d.get("depth", MIN_FREE_DEPTH if self.kind == "free" else D_MIN)
            drift = self.formula_inputs()[2] if self.oracle_ok else None
            self._cloud = sample_boundary_cloud(self.mu.model, self.mu, depth, d["samples"],
                                                self.seed, self.threads, drift=drift)
        return self._cloud

    def dimension(self, h_over_l=math.nan):
        from hmdim.estimators.dimension import circle_radii, free_radii, local_dimension_report

        d = _section(self.cfg, "dimension")
        radii = None
        if "grid" in d:
            radii = free_radii(d["grid"]) if self.kind == "free" else circle_radii(d["grid"])
        nu = self.oracle().nu_ if self.oracle_ok else None
        rep = local_dimension_report(self.cloud(), radii, nu, h_over_l, d["batches"])
        self.report = rep
        self.record("dimension", value=rep.pooled_slope, method="pooled-slope",
                    stderr=rep.pooled_stderr, n=rep.n_points)
        self.record("dimension", value=rep.median, method="median-slope", n=rep.n_points)
        out = {"pooled": rep.pooled_slope, "pooled_stderr": rep.pooled_stderr,
               "median": rep.median, "iqr": rep.spread, "r2": rep.r_squared,
               "n_radii": int(len(rep.radii)), "n_points": rep.n_points,
               "resample_rate": self.cloud().resample_rate}
        if rep.exact_ratios is not None:
            out["exact_local_dimension_mean"] = float(rep.exact_ratios.mean())
        self.write_dimension_csv(rep)
        return out

    def upper_bound(self) -> dict:
        from hmdim.estimators.dimension import upper_bound_check

        h, he, l, le = self.formula_inputs()
        r = upper_bound_check(self.report, h, l, he, le)
        return {"passes": r.passed, "margin": r.margin, "p95": r.p95, "bound": r.bound}

    def stationarity(self, cloud=None) -> dict:
        from hmdim.estimators.diagnostics import stationarity_test

        s = _section(self.cfg, "stationarity", "diagnostics")
        cloud = cloud if cloud is not None else self.cloud()
        if len(cloud) > s["samples"]:
            cloud = cloud.subset(np.arange(s["samples"]))
        r = stationarity_test(cloud, self.mu, self.mu.model, s["z_max"])
        return {"passes": r.details["passes"], "max_abs_z": r.value, "n_samples": r.n_samples,
                "low_power": r.warning is not None}

    # -- CSV output

    def write_dimension_csv(self, rep):
        M, R = rep.log_mass.shape
        logr = np.log(rep.radii)
        with open(self.out / "regression.csv", "w", newline="") as f:
            f.write("point,radius,log_radius,log_mass\n")
            idx = np.repeat(np.arange(M), R)
            cols = np.column_stack([idx, np.tile(rep.radii, M), np.tile(logr, M),
                                    rep.log_mass.ravel()])
            np.savetxt(f, cols, fmt=["%d", "%.12g", "%.12g", "%.12g"], delimiter=",")
        with open(self.out / "slopes.csv", "w", newline="") as f:
            f.write("point,slope\n")
            np.savetxt(f, np.column_stack([np.arange(M), rep.per_point_slopes]),
                       fmt=["%d", "%.12g"], delimiter=",")

    def write_estimators_csv(self):
        with open(self.out / "estimators.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["quantity", "method", "value", "stderr", "n_samples"])
            for q, m, v, s, n in self.rows:
                w.writerow([q, m, repr(float(v)), repr(float(s)), int(n)])


# ---------------------------------------------------------------- subcommands

def cmd_drift(run: Run, summary: dict):
    summary["drift"] = run.drift()


def cmd_entropy(run: Run, summary: dict):
    e = run.entropy()
    summary["entropy"] = e
    if not e["agree"]:
        raise ConsistencyError("entropy routes disagree beyond 3 combined errors")


def cmd_oracle(run: Run, summary: dict):
    o = run.oracle()
    rep = o.report().to_json()
    summary["oracle"] = rep
    summary["drift"] = {"exact": {"value": o.drift_.value, "error": o.drift_.exact_error,
                                  "cocycle": o.drift_.cocycle},
                        "mc": {"value": o.drift_.mc_value, "stderr": o.drift_.mc_stderr},
                        "value": o.drift_.value}
    summary["entropy"]["furstenberg"] = o.entropy_
    summary["ratio_h_over_l"] = o.dimension_
    summary["residual"] = o.residual_
    run.record("drift", value=o.drift_.value, method="exact", stderr=o.drift_.exact_error)
    run.record("entropy", value=o.entropy_, method="furstenberg", stderr=0.0)
    with open(run.out / "cylinders.csv", "w", newline="") as f:
        from hmdim.free_group import reduced_words
        from hmdim.oracle import cylinder_measure

        w = csv.writer(f)
        w.writerow(["cylinder", "length", "measure"])
        for L in (1, 2, 3):
            for word in reduced_words(run.mu.model.rank, L):
                w.writerow([str(word), L, repr(cylinder_measure(o.nu_, str(word)))])


def cmd_dimension(run: Run, summary: dict):
    ratio = math.nan
    if run.oracle_ok:
        h, _, l, _ = run.formula_inputs()
        ratio = h / l
        summary["ratio_h_over_l"] = ratio
    summary["dim"] = run.dimension(ratio)
    if run.oracle_ok:
        summary["checks"]["upper_bound"] = run.upper_bound()


def cmd_verify_formula(run: Run, summary: dict):
    summary["drift"] = run.drift()
    summary["entropy"] = run.entropy()
    h, he, l, le = run.formula_inputs()
    ratio = h / l
    ratio_err = ratio * math.hypot(he / h, le / l)
    summary["ratio_h_over_l"] = ratio
    summary["ratio_stderr"] = ratio_err
    summary["dim"] = run.dimension(ratio)
    checks = summary["checks"]
    checks["upper_bound"] = ub = run.upper_bound()
    if run.kind == "free":
        checks["stationarity"] = run.stationarity()
    dim = summary["dim"]
    comb = math.hypot(dim["pooled_stderr"], ratio_err)
    checks["formula"] = {"rel_diff": abs(dim["pooled"] - ratio) / ratio,
                         "z": abs(dim["pooled"] - ratio) / comb if comb > 0 else math.inf,
                         "within_10pct": abs(dim["pooled"] - ratio) <= 0.1 * ratio}
    checks["entropy_agree"] = summary["entropy"]["agree"]
    if not ub["passes"]:
        raise ConsistencyError("upper bound on the local dimension violated")


def cmd_diagnostics(run: Run, summary: dict):
    from hmdim.estimators.diagnostics import (
        event_A_diagnostic,
        shadow_hit_diagnostic,
        tracking_diagnostic,
    )

    if run.kind != "free":
        raise UnsupportedModelError("diagnostics need the free-group model")
    h, _, l, _ = run.formula_inputs()
    checks = summary["checks"]
    mu, model, seed, th = run.mu, run.mu.model, run.seed, run.threads

    t = _section(run.cfg, "tracking", "diagnostics")
    vals = {n: tracking_diagnostic(model, mu, l, n, t["trajectories"], t["eps"], seed, th).value
            for n in sorted(t["horizons"])}
    seq = list(vals.values())
    mono = all(b >= a for a, b in zip(seq, seq[1:]))
    checks["tracking"] = {"by_n": {str(k): v for k, v in vals.items()}, "eps": t["eps"],
                          "monotone": mono,
                          "passes": bool(mono and seq[-1] >= TRACKING_THRESHOLD)}

    a = _section(run.cfg, "event_A", "diagnostics")
    r = event_A_diagnostic(model, mu, h, l, a["eps"], a["N"], a["horizon"], a["trajectories"],
                           seed, threads=th)
    checks["eventA"] = {"value": r.value, "by_N": r.details["by_N"], "eps": a["eps"],
                        "monotone": r.details["monotone"], "passes": r.details["passes"]}

    s = _section(run.cfg, "shadow_hit", "diagnostics")
    hit = shadow_hit_diagnostic(model, mu, l, s["R"], s["eps"], s["horizon"], s["trajectories"],
                                seed, threads=th)
    ctl = shadow_hit_diagnostic(model, mu, l, s["R"], s["eps"], s["horizon"], s["trajectories"],
                                seed, control=True, threads=th)
    checks["shadow_hit"] = {"value": hit.value, "conditioned": hit.details["conditioned"],
                            "control": ctl.value, "vacuous": hit.warning is not None,
                            "passes": bool(hit.value == 1.0 and ctl.value < 1.0)}

    checks["stationarity"] = run.stationarity()
    failed = [k for k, v in checks.items() if v is not None and not v["passes"]]
    if failed:
        raise ConsistencyError(f"diagnostics failed: {', '.join(failed)}")


def cmd_continuity(run: Run, summary: dict):
    from hmdim.estimators.diagnostics import continuity_experiment
    from hmdim.estimators.dimension import free_radii, circle_radii

    c = _section(run.cfg, "continuity")
    d = _section(run.cfg, "dimension")
    radii = None
    if "grid" in d:
        radii = free_radii(d["grid"]) if run.kind == "free" else circle_radii(d["grid"])
    atom = c.get("atom", run.mu.model.format(run.mu.elements[0]))
    res = continuity_experiment(run.mu.model, run.mu, c["deltas"], atom, c["depth"],
                                c["samples"], run.seed, radii, run.threads)
    rows = res["rows"]
    with open(run.out / "continuity.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["delta", "l1_distance", "dim", "dim_stderr", "abs_diff", "diff_stderr"])
        for r in rows:
            w.writerow([repr(r.delta), repr(r.l1), repr(r.dim), repr(r.dim_err), repr(r.diff),
                        repr(r.diff_err)])
    summary["continuity"] = {
        "atom": atom, "base_dim": res["base_dim"], "monotone": res["monotone"],
        "rows": [{"delta": r.delta, "l1": r.l1, "dim": r.dim, "dim_stderr": r.dim_err,
                  "abs_diff": r.diff, "diff_stderr": r.diff_err} for r in rows]}
    summary["dim"] = {"pooled": res["base_dim"]}
    if not res["monotone"]:
        raise ConsistencyError("dimension differences do not shrink with the perturbation")


COMMANDS = {
    "drift": cmd_drift,
    "entropy": cmd_entropy,
    "oracle": cmd_oracle,
    "dimension": cmd_dimension,
    "verify-formula": cmd_verify_formula,
    "diagnostics": cmd_diagnostics,
    "continuity": cmd_continuity,
}


# ---------------------------------------------------------------- plot data

def emit_plotdata(results_dir, bins: int = 50) -> list[Path]:
    """Plot-ready tables from a finished dimension run: mean regression curve,
    per-point slopes with histogram bins, and bin counts."""
    d = Path(results_dir)
    reg, sl = d / "regression.csv", d / "slopes.csv"
    if not (reg.exists() and sl.exists()):
        raise MissingRunError(f"{d} holds no completed dimension run")
    data = np.loadtxt(reg, delimiter=",", skiprows=1, ndmin=2)
    slopes = np.loadtxt(sl, delimiter=",", skiprows=1, ndmin=2)[:, 1]
    logr = np.unique(data[:, 2])
    mean = np.array([data[data[:, 2] == x, 3].mean() for x in logr])
    x = logr - logr.mean()
    slope = float(mean @ x / (x @ x)) if len(x) > 1 else math.nan
    fitted = mean.mean() + slope * x
    written = []
    p = d / "regression_mean.csv"
    with open(p, "w", newline="") as f:
        f.write("log_radius,mean_log_mass,fitted_log_mass\n")
        np.savetxt(f, np.column_stack([logr, mean, fitted]), fmt="%.12g", delimiter=",")
    written.append(p)
    edges = np.histogram_bin_edges(slopes, bins=bins)
    which = np.clip(np.searchsorted(edges, slopes, side="right") - 1, 0, bins - 1)
    p = d / "slope_histogram.csv"
    with open(p, "w", newline="") as f:
        f.write("point,slope,bin,bin_left,bin_right\n")
        np.savetxt(f, np.column_stack([np.arange(len(slopes)), slopes, which, edges[which],
                                       edges[which + 1]]),
                   fmt=["%d", "%.12g", "%d", "%.12g", "%.12g"], delimiter=",")
    written.append(p)
    counts = np.bincount(which, minlength=bins)
    p = d / "slope_bins.csv"
    with open(p, "w", newline="") as f:
        f.write("bin_left,bin_right,count\n")
        np.savetxt(f, np.column_stack([edges[:-1], edges[1:], counts]),
                   fmt=["%.12g", "%.12g", "%d"], delimiter=",")
    written.append(p)
    return written


# ---------------------------------------------------------------- driver

def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (OracleInconsistentError, ConsistencyError, NumericError)):
        return 2
    return 1


def _dump(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def run(subcommand: str, config, out=None, threads=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    summary = None
    out_dir = Path(out) if out else None
    try:
        path = _resolve_config(config)
        cfg = load_config(path)
        if out_dir is None:
            out_dir = Path(cfg.get("output") or f"hmdim-out/{path.stem}-{subcommand}")
        out_dir.mkdir(parents=True, exist_ok=True)
        summary = _skeleton(cfg, subcommand)
        r = Run(cfg, out_dir, threads)
        try:
            COMMANDS[subcommand](r, summary)
        finally:
            r.write_estimators_csv()
        code = 0
    except HmdimError as exc:
        code = _exit_code(exc)
        err = {"reason": exc.reason, "message": str(exc)}
        if summary is None:
            summary = {"subcommand": subcommand, "status": "error"}
        summary["status"] = "failed" if code == 2 else "error"
        summary["error"] = err
        print(json.dumps({"error": err}, sort_keys=True), file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            _dump(out_dir / "summary.json", summary)
            _dump(out_dir / "metadata.json", {
                "started": started.isoformat(),
                "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "elapsed_seconds": time.perf_counter() - t0,
                "threads": threads if threads is not None else os.environ.get("HMDIM_THREADS"),
                "config": str(config),
                "hmdim_version": __version__,
                "numpy_version": np.__version__,
                "python_version": platform.python_version(),
            })
        except OSError as exc:
            print(json.dumps({"error": {"reason": "io", "message": str(exc)}}), file=sys.stderr)
            return 1
    return code


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hmdim", description="Harmonic-measure dimension experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="config JSON path or bundled name: " + ", ".join(BUNDLED))
    p.add_argument("--out", help="output directory (results directory for plotdata)")
    p.add_argument("--threads", type=int, help="worker threads (default: HMDIM_THREADS)")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        if args.subcommand == "plotdata":
            if not args.out:
                raise UsageError("plotdata needs --out <results dir>")
            for p in emit_plotdata(args.out):
                print(p)
            return 0
        if not args.config:
            raise UsageError("--config is required")
    except HmdimError as exc:
        print(json.dumps({"error": {"reason": exc.reason, "message": str(exc)}}), file=sys.stderr)
        return 1
    return run(args.subcommand, args.config, args.out, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
