"""Command-line entry point.

Configuration is JSON: one nested object whose keys mirror :data:`DEFAULTS`.
Unknown keys are rejected with their dotted path; command-line flags
override values read from the file. Every run writes ``manifest.json``
(config echo, seed, package version) into the output directory, whose
default is taken from ``$RCBM_OUT`` (else ``./rcbm_out``).

Subcommands::

    rcbm analytic eval     closed-form laws over the a/x/t grids
    rcbm ndist eval        n-dimensional joint CDF plus envelope plot data
    rcbm measure eval      SRPT queue-length moments and the mass integral
    rcbm measure mc        Monte Carlo of the stationary queue-length moments
    rcbm srpt run          discrete-event SRPT simulation
    rcbm validate SUITE    all | stationarity | law2d | ndist | measure | srpt
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analytic, bm_sim, measure, ndist, srpt_sim, validate
from .bm_sim import InitialCondition
from .drift import SRPTDrift, check_mass_integrability, drift_from_dict

__all__ = ["DEFAULTS", "RunConfig", "parse_config", "config_from_dict", "emit_outputs",
           "write_csv", "write_plot_data", "envelope_series", "main"]

OUT_ENV = "RCBM_OUT"

SUBCOMMANDS = ("analytic eval", "ndist eval", "measure eval", "measure mc", "srpt run", "validate")

DEFAULTS = {
    "subcommand": "measure eval",
    "seed": 0,
    "out": None,
    "threads": 1,
    "drift": {"kind": "srpt", "kappa": 1.0, "lambda_tilde": 1.0, "p": 2.0, "sigma": 1.0},
    "init": {"kind": "zero"},
    "grids": {"a": [0.5, 1.0, 2.0], "t": [1.0], "x": [0.25, 0.5, 1.0]},
    "mc": {"N": 10_000, "dt": 1e-2},
    "ndist": {"nus": None, "a": None, "xs": [1.0, 3.0, 6.0], "s_max": 5.0, "s_points": 201},
    "srpt": {"r": [10.0], "p": 2.0, "x_m": 2.0 / 3.0, "kappa": 1.0, "arrival": "poisson",
             "gamma_shape": 1.0, "T": 50.0, "snapshot_times": [10.0, 25.0, 50.0], "q0": [],
             "warmup": 0.2, "batches": 30, "snapshot_dt": 0.25},
    "validate": {"suite": "all", "scale": "full"},
    "thresholds": {"z": 3.0, "ks": 0.01},
}

# keys whose value is a free-form object validated elsewhere
_OPAQUE = {("drift",), ("init",)}


class ConfigError(ValueError):
    pass


def _merge(base, user, path=()):
    out = copy.deepcopy(base)
    for k, v in user.items():
        p = path + (k,)
        if k not in base:
            raise ConfigError(f"unknown key '{'.'.join(p)}'")
        if isinstance(base[k], dict) and p not in _OPAQUE:
            if not isinstance(v, dict):
                raise ConfigError(f"'{'.'.join(p)}' must be an object")
            out[k] = _merge(base[k], v, p)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num_list(v, key, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                          for x in v):
        raise ConfigError(f"'{key}' must be a list of numbers")
    v = [float(x) for x in v]
    if positive and any(not x > 0 for x in v):
        raise ConfigError(f"'{key}' entries must be positive")
    return v


@dataclass
class RunConfig:
    """Validated configuration. ``data`` is the normalized nested dictionary."""

    data: dict

    def __getitem__(self, k):
        return self.data[k]

    @property
    def subcommand(self) -> str:
        return self.data["subcommand"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def drift(self):
        return drift_from_dict(self.data["drift"])

    def init(self):
        return InitialCondition.from_dict(self.data["init"])

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)


def config_from_dict(d: dict) -> RunConfig:
    """Merge ``d`` over :data:`DEFAULTS` and validate every field."""
    if not isinstance(d, dict):
        raise ConfigError("configuration must be an object")
    c = _merge(DEFAULTS, d)
    if c["subcommand"] not in SUBCOMMANDS:
        raise ConfigError(f"'subcommand' must be one of {list(SUBCOMMANDS)}")
    s = c["seed"]
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise ConfigError("'seed' must be a nonnegative integer")
    t = c["threads"]
    if isinstance(t, bool) or not isinstance(t, int) or t < 1:
        raise ConfigError("'threads' must be a positive integer")
    if c["out"] is not None and not isinstance(c["out"], str):
        raise ConfigError("'out' must be a path string")
    try:
        c["drift"] = drift_from_dict(c["drift"]).to_dict()
    except ValueError as exc:
        raise ConfigError(f"drift: {exc}") from None
    try:
        c["init"] = InitialCondition.from_dict(c["init"]).to_dict()
    except ValueError as exc:
        raise ConfigError(f"init: {exc}") from None
    g = c["grids"]
    g["a"] = _num_list(g["a"], "grids.a", positive=True)
    g["t"] = _num_list(g["t"], "grids.t")
    g["x"] = _num_list(g["x"], "grids.x")
    if any(v < 0 for v in g["t"] + g["x"]):
        raise ConfigError("'grids.t' and 'grids.x' must be nonnegative")
    mc = c["mc"]
    if isinstance(mc["N"], bool) or not isinstance(mc["N"], int) or mc["N"] < 2:
        raise ConfigError("'mc.N' must be an integer >= 2")
    if not (isinstance(mc["dt"], (int, float)) and mc["dt"] > 0):
        raise ConfigError("'mc.dt' must be positive")
    mc["dt"] = float(mc["dt"])
    nd = c["ndist"]
    nd["nus"] = _num_list(nd["nus"], "ndist.nus", allow_none=True)
    nd["a"] = _num_list(nd["a"], "ndist.a", positive=True, allow_none=True)
    nd["xs"] = _num_list(nd["xs"], "ndist.xs")
    n_lines = len(nd["nus"] if nd["nus"] is not None else nd["a"] or [])
    if nd["nus"] is not None and nd["a"] is not None:
        raise ConfigError("give either 'ndist.nus' or 'ndist.a', not both")
    if n_lines and n_lines != len(nd["xs"]):
        raise ConfigError("'ndist.xs' must match the number of lines")
    if not nd["s_max"] > 0 or int(nd["s_points"]) < 2:
        raise ConfigError("'ndist.s_max' must be positive and 'ndist.s_points' >= 2")
    sr = c["srpt"]
    sr["r"] = _num_list(sr["r"], "srpt.r", positive=True)
    sr["snapshot_times"] = _num_list(sr["snapshot_times"], "srpt.snapshot_times")
    sr["q0"] = _num_list(sr["q0"], "srpt.q0", positive=True)
    try:
        for r in sr["r"]:
            srpt_sim.ScalingParams(r=r, p=sr["p"], x_m=sr["x_m"], kappa=sr["kappa"],
                                   arrival=sr["arrival"], gamma_shape=sr["gamma_shape"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"srpt: {exc}") from None
    if not sr["T"] > 0:
        raise ConfigError("'srpt.T' must be positive")
    if any(v < 0 or v > sr["T"] for v in sr["snapshot_times"]):
        raise ConfigError("'srpt.snapshot_times' must lie in [0, srpt.T]")
    sr["snapshot_times"] = sorted(sr["snapshot_times"])
    if any(np.diff(sr["q0"]) > 0):
        raise ConfigError("'srpt.q0' must be sorted nonincreasing")
    if not 0 <= sr["warmup"] < 1 or int(sr["batches"]) < 2:
        raise ConfigError("'srpt.warmup' must be in [0, 1) and 'srpt.batches' >= 2")
    v = c["validate"]
    if v["suite"] not in ("all",) + tuple(validate.SUITES):
        raise ConfigError(f"'validate.suite' must be one of all, {', '.join(validate.SUITES)}")
    if v["scale"] not in ("full", "smoke"):
        raise ConfigError("'validate.scale' must be 'full' or 'smoke'")
    th = c["thresholds"]
    if not (th["z"] > 0 and th["ks"] > 0):
        raise ConfigError("thresholds must be positive")
    return RunConfig(c)


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file (optional) and apply flag overrides."""
    d = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{p}: top level must be an object")
    d = copy.deepcopy(d)
    for k, v in (overrides or {}).items():
        node = d
        keys = k.split(".")
        for kk in keys[:-1]:
            node = node.setdefault(kk, {})
        node[keys[-1]] = v
    return config_from_dict(d)


# ----------------------------------------------------------------------------
# output helpers


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    """CSV with a fixed header, '.' decimals and 17 significant digits."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None
    return path


def write_plot_data(path, series):
    """Whitespace-separated ``x y ...`` blocks, one per named series.

    Blocks are separated by two blank lines so that gnuplot's ``index``
    selects them.
    """
    path = Path(path)
    with path.open("w") as fh:
        for k, (name, cols) in enumerate(series):
            if k:
                fh.write("\n\n")
            fh.write(f"# {name}\n")
            for row in zip(*cols):
                fh.write(" ".join(_fmt(float(v)) for v in row) + "\n")
    return path


def envelope_series(nus, xs, s_max=5.0, n=201):
    """Series ``(name, (s, y))`` for each line ``nu_i s + x_i`` and their minimum."""
    s = np.linspace(0.0, s_max, n)
    out = [(f"line {i + 1}: {nu:g} s + {x:g}", (s, nu * s + x)) for i, (nu, x) in enumerate(zip(nus, xs))]
    out.append(("envelope", (s, ndist.lower_envelope(nus, xs, s))))
    return out


def emit_outputs(out_dir, reports=(), config: RunConfig | None = None, extra=None):
    """Write ``summary.json``, ``reports.csv`` and ``manifest.json``.

    Returns the list of files written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    reports = list(reports)
    files = []
    summary = validate.summarize(reports)
    summary["reports"] = [r.to_dict() for r in reports]
    if extra:
        summary.update(extra)
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, default=float))
    files.append(p)
    header = ["name", "criterion", "kind", "gate", "pass", "analytic_value", "mc_estimate", "stderr",
              "z_score", "threshold", "runtime_seconds", "note"]
    files.append(write_csv(out / "reports.csv", header,
                           ([r.name, r.criterion, r.kind, r.gate, r.passed, r.analytic_value,
                             r.mc_estimate, r.stderr, r.z_score, r.threshold, r.runtime_seconds,
                             r.note] for r in reports)))
    if config is not None:
        files.append(_write_manifest(out, config, files))
    return files


def _write_manifest(out, config: RunConfig, files):
    m = {"version": __version__, "seed": config.seed, "config": config.to_dict(),
         "argv": sys.argv[1:], "files": sorted(str(Path(f).name) for f in files)}
    p = Path(out) / "manifest.json"
    p.write_text(json.dumps(m, indent=2, sort_keys=True))
    return p


# ----------------------------------------------------------------------------
# subcommands


def _cmd_analytic(cfg: RunConfig, out: Path):
    spec = cfg.drift()
    g = cfg["grids"]
    rows = []
    for a, x in itertools.product(g["a"], g["x"]):
        nu = float(spec.mu(a))
        rows.append(("stationary_cdf", a, "", x, "", "", analytic.stationary_max_cdf(x, a, spec)))
        for t in g["t"]:
            rows.append(("running_max_cdf", a, "", x, "", t, analytic.running_max_cdf(x, t, nu, spec.sigma)))
    for a1, a2 in itertools.combinations(sorted(g["a"]), 2):
        for x1, x2 in itertools.product(g["x"], g["x"]):
            tp = analytic.TwoPoint(a1, a2, x1, x2)
            rows.append(("joint_cdf_2d", a1, a2, x1, x2, "", analytic.joint_cdf_2d(tp, spec)))
        if spec.mu(a2) > 0:
            rows.append(("covariance", a1, a2, "", "", "", analytic.covariance(a1, a2, spec)))
            rows.append(("correlation", a1, a2, "", "", "", analytic.correlation(a1, a2, spec)))
    write_csv(out / "analytic.csv", ["quantity", "a1", "a2", "x1", "x2", "t", "value"], rows)
    return [out / "analytic.csv"], {}


def _cmd_ndist(cfg: RunConfig, out: Path):
    nd = cfg["ndist"]
    spec = cfg.drift()
    xs = nd["xs"]
    if nd["nus"] is not None:
        nus = nd["nus"]
        kept = ndist.reduce_lines(nus, xs)
        value = ndist.joint_cdf_nd_lines([nus[i] for i in kept], [xs[i] for i in kept], spec.sigma)
    else:
        a = nd["a"] if nd["a"] is not None else cfg["grids"]["a"][:len(xs)]
        if len(a) != len(xs):
            raise ConfigError("ndist needs as many sizes as thresholds")
        nus = [float(spec.mu(v)) for v in a]
        cs, removed = ndist.reduce_constraints(list(zip(a, xs)), spec)
        kept = [i for i in range(len(xs)) if i not in set(removed)]
        value = ndist.joint_cdf_nd(cs, spec)
    files = [write_csv(out / "ndist.csv", ["line", "nu", "x", "kept"],
                       ([i, nus[i], xs[i], i in kept] for i in range(len(xs))))]
    files.append(write_plot_data(out / "envelope.dat",
                                 envelope_series(nus, xs, nd["s_max"], int(nd["s_points"]))))
    return files, {"joint_cdf": value, "kept": list(map(int, kept))}


def _srpt_params(cfg: RunConfig):
    d = cfg.drift()
    if not isinstance(d, SRPTDrift):
        raise ConfigError("this subcommand needs drift.kind = 'srpt'")
    return d


def _cmd_measure_eval(cfg: RunConfig, out: Path):
    spec = cfg.drift()
    rows = [("mass_integral", check_mass_integrability(spec).value)]
    if isinstance(spec, SRPTDrift):
        args = (spec.kappa, spec.lambda_tilde, spec.p, spec.sigma)
        rows += [("mean_Zstar", measure.srpt_mean_Zstar(*args)),
                 ("var_Zstar", measure.srpt_var_Zstar(*args)),
                 ("var_Zstar_beta", measure.srpt_var_Zstar_beta(*args)),
                 ("var_Zstar_consistent", measure.srpt_var_Zstar_consistent(*args))]
    write_csv(out / "measure.csv", ["quantity", "value"], rows)
    return [out / "measure.csv"], {k: v for k, v in rows}


def _cmd_measure_mc(cfg: RunConfig, out: Path):
    spec = _srpt_params(cfg)
    mc = cfg["mc"]
    res = measure.mc_Zstar(spec.kappa, spec.lambda_tilde, spec.p, spec.sigma, mc["N"], mc["dt"], cfg.seed)
    args = (spec.kappa, spec.lambda_tilde, spec.p, spec.sigma)
    mean = measure.srpt_mean_Zstar(*args)
    rows = [("mean", res["mean"], res["se_mean"], mean, mean),
            ("var", res["var"], res["se_var"], measure.srpt_var_Zstar(*args),
             measure.srpt_var_Zstar_consistent(*args))]
    write_csv(out / "measure_mc.csv", ["quantity", "mc", "stderr", "closed_form", "kernel_integral"], rows)
    return [out / "measure_mc.csv"], {k: v for k, v in res.items() if not isinstance(v, np.ndarray)}


def _cmd_srpt(cfg: RunConfig, out: Path):
    sr = cfg["srpt"]
    snap_rows, summ = [], []
    for j, r in enumerate(sr["r"]):
        sp = srpt_sim.ScalingParams(r=r, p=sr["p"], x_m=sr["x_m"], kappa=sr["kappa"],
                                    arrival=sr["arrival"], gamma_shape=sr["gamma_shape"])
        T = sr["T"]
        grid = np.arange(sr["warmup"] * T, T + 1e-12, sr["snapshot_dt"])
        times = np.union1d(grid, sr["snapshot_times"])
        run = srpt_sim.run_srpt(sp, T, times, q0=sr["q0"], seed=cfg.seed + 1000 * j)
        want = set(sr["snapshot_times"])
        for k, t in enumerate(run.snapshot_times):
            if t in want:
                loc, w = run.atoms[k]
                snap_rows += [(r, t, x, w) for x in loc]
        row = srpt_sim.littles_row(sp, run, T, sr["warmup"], int(sr["batches"]))
        summ.append((r, row["c_r"], row["mean_workload"], row["mean_queue"], row["lhs"], row["lhs_se"],
                     row["rhs"], row["ratio"], row["ks_workload"]))
    files = [write_csv(out / "snapshots.csv", ["r", "t", "atom_location", "atom_weight"], snap_rows),
             write_csv(out / "summary.csv", ["r", "c_r", "scaled_workload_mean", "scaled_queue_mean",
                                             "littles_lhs", "littles_lhs_stderr", "littles_rhs",
                                             "littles_ratio", "workload_ks"], summ)]
    files.append(write_plot_data(out / "littles.dat", [
        ("r vs (c_r/r) E[T]", ([s[0] for s in summ], [s[4] for s in summ])),
        ("r vs workload KS", ([s[0] for s in summ], [s[8] for s in summ]))]))
    return files, {}


def _plot_series_from_reports(reports):
    series = []
    for r in reports:
        if r.kind == "trend" and "t_list" in r.parameters:
            series.append((r.name, (r.parameters["t_list"], r.parameters["ks"])))
    joint = [r for r in reports if r.name.startswith("law2d joint") and r.mc_estimate is not None]
    for x1 in sorted({r.parameters["x1"] for r in joint}):
        cells = sorted((r for r in joint if r.parameters["x1"] == x1), key=lambda r: r.parameters["x2"])
        series.append((f"law2d x1={x1:g}: x2 analytic mc",
                       ([c.parameters["x2"] for c in cells], [c.analytic_value for c in cells],
                        [c.mc_estimate for c in cells])))
    srpt = [r for r in reports if r.name.startswith("srpt r=")]
    if srpt:
        series.append(("srpt r vs Little ratio", ([r.parameters["r"] for r in srpt],
                                                  [r.parameters["ratio"] for r in srpt])))
        series.append(("srpt r vs workload KS", ([r.parameters["r"] for r in srpt],
                                                 [r.parameters["ks_workload"] for r in srpt])))
    return series


def _cmd_validate(cfg: RunConfig, out: Path, dt=None, n=None):
    v = cfg["validate"]
    scale = dict(validate.SMOKE) if v["scale"] == "smoke" else None
    reports = validate.run_suite(v["suite"], seed=cfg.seed, scale=scale, dt=dt, n=n,
                                 z_threshold=cfg["thresholds"]["z"], ks_threshold=cfg["thresholds"]["ks"])
    files = []
    law = [r for r in reports if r.name.startswith("law2d joint")]
    if law:
        files.append(write_csv(out / "law2d.csv", ["a1", "a2", "x1", "x2", "analytic", "mc", "stderr", "z"],
                               ([1.0, math.inf, r.parameters["x1"], r.parameters["x2"], r.analytic_value,
                                 r.mc_estimate, r.stderr, r.z_score] for r in law)))
    series = _plot_series_from_reports(reports)
    if series:
        files.append(write_plot_data(out / "sweeps.dat", series))
    return files, reports


def build_parser():
    p = argparse.ArgumentParser(prog="rcbm", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog="Defaults (JSON):\n" + json.dumps(DEFAULTS, indent=1))
    p.add_argument("command", help="analytic | ndist | measure | srpt | validate")
    p.add_argument("action", nargs="?", help="eval | mc | run | suite name for validate")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="random seed (nonnegative)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./rcbm_out)")
    p.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    p.add_argument("--dt", type=float, help="time step for every Monte Carlo path")
    p.add_argument("--n", type=int, help="sample count for every Monte Carlo estimate")
    return p


def _subcommand(command, action):
    if command == "validate":
        return "validate", action or "all"
    sub = f"{command} {action}" if action else command
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand '{sub}'; choose from {', '.join(SUBCOMMANDS)} SUITE")
    return sub, None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sub, suite = _subcommand(args.command, args.action)
        over = {"subcommand": sub}
        if suite is not None:
            over["validate.suite"] = suite
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["out"] = args.out
        if args.threads is not None:
            over["threads"] = args.threads
        if args.dt is not None:
            over["mc.dt"] = args.dt
        if args.n is not None:
            over["mc.N"] = args.n
        cfg = parse_config(args.config, over)
    except ConfigError as exc:
        print(f"rcbm: configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg["out"] or os.environ.get(OUT_ENV) or "rcbm_out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"rcbm: cannot create {out}: {exc.strerror}", file=sys.stderr)
        return 2
    _set_threads(cfg["threads"])
    reports, extra = [], {}
    try:
        if sub == "analytic eval":
            files, extra = _cmd_analytic(cfg, out)
        elif sub == "ndist eval":
            files, extra = _cmd_ndist(cfg, out)
        elif sub == "measure eval":
            files, extra = _cmd_measure_eval(cfg, out)
        elif sub == "measure mc":
            files, extra = _cmd_measure_mc(cfg, out)
        elif sub == "srpt run":
            files, extra = _cmd_srpt(cfg, out)
        else:
            files, reports = _cmd_validate(cfg, out, dt=args.dt, n=args.n)
        files += emit_outputs(out, reports, None, extra)
    except (ConfigError, ValueError) as exc:
        print(f"rcbm: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rcbm: {exc}", file=sys.stderr)
        return 2
    _write_manifest(out, cfg, files)
    summ = validate.summarize(reports)
    for r in reports:
        if r.gate:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.criterion or '-':4s} {r.name}")
    print(f"wrote {len(files) + 1} files to {out}")
    return 0 if summ["passed"] else 1


def _set_threads(n):
    bm_sim.set_threads(n)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
