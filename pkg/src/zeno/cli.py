"""Command-line experiment runner.

::

    zeno run <config.json> [--out DIR] [--engines analytic,mc] [--seed N]
    zeno validate [--filter NAME]
    zeno fig1|fig2 [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical-engine error,
4 validation failure.  ``ZENO_THREADS`` caps the Monte-Carlo worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .acceptance import run_acceptance, select
from .analytic import analytic_curve, zeno_scan
from .config import (
    ConfigError,
    build_renewal,
    build_system,
    inversion_settings,
    load,
    make_grid,
    mc_config,
    scale,
    validate,
    with_overrides,
)
from .liouville import TwoLevelParams
from .montecarlo import simulate_counts, simulate_survival
from .output import describe_version, write_csv, write_json
from .plotting import plot_csv
from .presets import FIG2A_REFERENCE, fig1_data, fig2_data
from .renewal import count_probabilities

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_VALIDATION = 0, 2, 3, 4
DEFAULT_OUT = "zeno-out"

log = logging.getLogger("zeno")


class EngineError(RuntimeError):
    """A numerical engine failed; the message names the run step."""


def _header(cfg: dict, **extra) -> dict:
    h = {"config": cfg, "version": describe_version(), "seed": cfg.get("mc", {}).get("master_seed", 0),
         "units": "time in 1/v, rates in v"}
    h.update(extra)
    return h


def _formats(cfg):
    return set(cfg.get("output", {}).get("formats", ["csv", "svg"]))


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("output", {}).get("dir", DEFAULT_OUT))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"/output/dir: cannot create {out}: {exc}") from None
    return out


def _tag(x) -> str:
    return f"{x:g}"


def run_survival(cfg: dict, out: Path) -> dict:
    v = scale(cfg)
    tau = make_grid(cfg["grids"]["time"])
    model, renewal = build_system(cfg), build_renewal(cfg)
    engines = cfg.get("engines", ["analytic"])
    files, curves = [], {}
    if "analytic" in engines:
        curves["analytic"] = analytic_curve(model, renewal, tau / v, cfg.get("method", "supermatrix"),
                                            inversion_settings(cfg))
    if "mc" in engines:
        curves["mc"] = simulate_survival(model, renewal, mc_config(cfg, tau / v))
    for name, c in curves.items():
        path = out / f"survival_{name}.csv"
        write_csv(path, _header(cfg, engine=name), ["t", "value", "stderr"], tau, c.values, c.stderr)
        files.append(path)
    if "svg" in _formats(cfg):
        series = [(out / f"survival_{n}.csv", n, "-" if n == "analytic" else "o") for n in curves]
        files.append(plot_csv(out / "survival.svg", series, "t", xlabel="t v", ylabel="p(t)"))
    summary = {"engines": list(curves), "points": int(tau.size)}
    if len(curves) == 2:
        a, m = curves["analytic"], curves["mc"]
        d = np.abs(a.values - m.values)
        summary["max_abs_diff"] = float(d.max())
        summary["within_max_3se_0.01"] = bool(np.all(d <= np.maximum(3 * m.stderr, 0.01)))
    return {"files": files, "summary": summary}


def run_tz_scan(cfg: dict, out: Path) -> dict:
    if cfg.get("renewal", {}).get("kind", "poisson") != "poisson":
        raise ConfigError("/renewal/kind: tz-scan is defined for Poissonian measurements only")
    v = scale(cfg)
    grid = make_grid(cfg["grids"]["w_r"])
    model = build_system(cfg)
    s = cfg["system"]
    p = TwoLevelParams(s["epsilon_bar"] * v, v)
    scan = zeno_scan(p, grid * v, model.relaxation)
    path = write_csv(out / "tz_scan.csv", _header(cfg), ["w_r", "t_Z"], grid, scan.t_Z_values * v)
    files = [path]
    if "svg" in _formats(cfg):
        files.append(plot_csv(out / "tz_scan.svg", [(path, f"eps_bar={_tag(s['epsilon_bar'])}", "-")], "w_r",
                              "t_Z", xlabel="w_r / v", ylabel="t_Z v", xscale="log", yscale="log"))
    summary = {"argmin_w_r": scan.argmin_w_r / v, "spans_minimum": scan.spans_minimum()}
    if model.relaxation is None:
        summary["predicted_w_r_min"] = math.sqrt(2.0 + 4.0 * s["epsilon_bar"] ** 2)
    return {"files": files, "summary": summary}


def run_counts(cfg: dict, out: Path) -> dict:
    v = scale(cfg)
    renewal = build_renewal(cfg)
    t = cfg["counts"]["t"] / v
    n_max = cfg["counts"].get("n_max", 64)
    engines = cfg.get("engines", ["analytic"])
    files, summary = [], {}
    if "analytic" in engines:
        cd = count_probabilities(renewal, t, n_max)
        files.append(write_csv(out / "counts_analytic.csv", _header(cfg, engine="analytic"),
                               ["n", "value", "stderr"], np.arange(n_max + 1), cd.probs, None))
        summary["analytic_tail_mass"] = cd.tail_mass
    if "mc" in engines:
        cd = simulate_counts(renewal, t, mc_config(cfg, np.array([t])), n_max)
        files.append(write_csv(out / "counts_mc.csv", _header(cfg, engine="mc"),
                               ["n", "value", "stderr"], np.arange(n_max + 1), cd.probs, cd.stderr))
        summary["mc_tail_mass"] = cd.tail_mass
    return {"files": files, "summary": summary}


def run_fig1(cfg: dict, out: Path) -> dict:
    data = fig1_data()
    files = []
    for tau, panel in ((5.0, "a"), (10.0, "b")):
        series = []
        for (tt, eb), vals in data.curves.items():
            if tt != tau:
                continue
            path = write_csv(out / f"fig1{panel}_eps{_tag(eb)}.csv", _header(cfg, tau=tau, epsilon_bar=eb),
                             ["tau_r", "value", "stderr"], data.tau_r, vals, None)
            files.append(path)
            series.append((path, f"eps_bar={_tag(eb)}", "-"))
        if "svg" in _formats(cfg):
            files.append(plot_csv(out / f"fig1{panel}.svg", series, "tau_r", xlabel="tau_r = v / w_r",
                                  ylabel=f"p(tau={_tag(tau)} | tau_r)", xscale="log"))
    return {"files": files, "summary": data.summary()}


def run_fig2(cfg: dict, out: Path) -> dict:
    data = fig2_data()
    files, sa, sb = [], [], []
    for (eb, a), (t, p) in data.panel_a.items():
        tag = f"eps{_tag(eb)}_alpha{_tag(a)}"
        path = write_csv(out / f"fig2a_{tag}.csv", _header(cfg, epsilon_bar=eb, alpha=a),
                         ["t", "value", "stderr"], t, p, None)
        ref = write_csv(out / f"fig2a_reference_{tag}.csv", _header(cfg, line=f"t^-{a}/{FIG2A_REFERENCE}"),
                        ["t", "value", "stderr"], t, t ** (-a) / FIG2A_REFERENCE, None)
        files += [path, ref]
        sa += [(path, f"eps_bar={_tag(eb)}, alpha={_tag(a)}", "-"), (ref, f"t^-{_tag(a)}/2.3", ":")]
    for (eb, a), (t, p) in data.panel_b.items():
        tag = f"eps{_tag(eb)}_alpha{_tag(a)}"
        wz = data.fits_b[(eb, a)]["w_z"]
        path = write_csv(out / f"fig2b_{tag}.csv", _header(cfg, epsilon_bar=eb, alpha=a),
                         ["t", "value", "stderr"], t, p, None)
        ref = write_csv(out / f"fig2b_reference_{tag}.csv", _header(cfg, line=f"exp(-{wz:.6g} t)"),
                        ["t", "value", "stderr"], t, np.exp(-wz * t), None)
        files += [path, ref]
        sb += [(path, f"eps_bar={_tag(eb)}, alpha={_tag(a)}", "-"), (ref, f"exp(-w_z t), w_z={wz:.3g}", "--")]
    if "svg" in _formats(cfg):
        files.append(plot_csv(out / "fig2a.svg", sa, "t", xlabel="t v", ylabel="p(t)", xscale="log", yscale="log"))
        files.append(plot_csv(out / "fig2b.svg", sb, "t", xlabel="t v", ylabel="p(t)", yscale="log"))
    return {"files": files, "summary": data.summary()}


def run_validate(cfg: dict, out: Path) -> dict:
    results = run_acceptance(cfg.get("validate", {}).get("filter"))
    for r in results:
        print(r.line())
    path = write_json(out / "validation.json", [r.__dict__ for r in results])
    return {"files": [path], "summary": {"passed": all(r.passed for r in results),
                                         "results": {r.name: r.passed for r in results}}}


RUNNERS = {
    "survival": run_survival,
    "tz-scan": run_tz_scan,
    "counts": run_counts,
    "fig1": run_fig1,
    "fig2": run_fig2,
    "validate": run_validate,
}


def execute(cfg: dict) -> dict:
    """Run a validated configuration; writes artifacts plus ``summary.json``."""
    out = _out_dir(cfg)
    kind = cfg["run"]
    try:
        res = RUNNERS[kind](cfg, out)
    except ConfigError:
        raise
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise EngineError(f"{kind} run failed: {type(exc).__name__}: {exc}") from exc
    summary = {
        "config": cfg,
        "version": describe_version(),
        "run": kind,
        "outputs": sorted(p.name for p in res["files"]),
        "results": res["summary"],
    }
    write_json(out / "summary.json", summary)
    return summary


def _check_threads():
    env = os.environ.get("ZENO_THREADS")
    if env is not None:
        try:
            if int(env) < 1:
                raise ValueError
        except ValueError:
            raise ConfigError(f"ZENO_THREADS must be a positive integer, got {env!r}") from None


def load_any(path) -> dict:
    """Load a configuration, or the configuration embedded in a run summary."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return load(path)  # reports the error
    if isinstance(raw, dict) and "config" in raw and "run" in raw and "results" in raw:
        validate(raw["config"])
        return raw["config"]
    return load(path)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zeno", description="Survival under randomly timed measurements.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON experiment configuration (or a summary.json)")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--engines", help="comma-separated subset of analytic,mc")
    r.add_argument("--seed", type=int)
    v = sub.add_parser("validate", help="run the acceptance suite")
    v.add_argument("--filter", help="criterion name substring or number")
    v.add_argument("--out")
    for name in ("fig1", "fig2"):
        f = sub.add_parser(name, help=f"reproduce {name} data and plots")
        f.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _check_threads()
        if args.command == "run":
            cfg = load_any(args.config)
            engines = None
            if args.engines:
                engines = [e.strip() for e in args.engines.split(",") if e.strip()]
            cfg = with_overrides(cfg, engines, args.seed, args.out)
        elif args.command == "validate":
            try:
                select(args.filter)
            except KeyError as exc:
                raise ConfigError(exc.args[0]) from None
            cfg = with_overrides({"run": "validate"}, out=args.out or DEFAULT_OUT)
            if args.filter:
                cfg["validate"] = {"filter": args.filter}
        else:
            cfg = with_overrides({"run": args.command}, out=args.out or DEFAULT_OUT)
        summary = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    if cfg["run"] == "validate" and not summary["results"]["passed"]:
        return EXIT_VALIDATION
    for name in summary["outputs"]:
        log.info("wrote %s", name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
