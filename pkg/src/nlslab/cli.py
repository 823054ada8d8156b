"""Batch front-end: ``nlslab <subcommand> --config exp.yaml --out DIR``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, svg
from .config import ConfigError, ExperimentConfig
from .conservation import CorrectionEngine, flux_residual
from .envelope import bin_masses, envelope_of, maximal_function
from .lattice import DomainError, Localizer, make_partition
from .metrics import global_bounds, norms, scaling_study, separation_profile
from .morawetz import diagonal_trace_check, interaction_diagonal, interaction_transversal
from .solver import GuardError, SimulationError, simulate
from .symbolic import DivisionError, check_resonant_vanishing, localized_division, size_constants

SUBCOMMANDS = ("simulate", "verify-division", "verify-flux", "morawetz", "envelope", "norms", "sweep")
EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD = 1, 2, 3
GUARD_HINT = "shrink the horizon or enlarge the circumference"


class Run:
    """Output directory bookkeeping; the record is deterministic, timings go elsewhere."""

    def __init__(self, cfg: ExperimentConfig, out: Path, subcommand: str, figures: bool):
        self.cfg = cfg
        self.out = out
        self.subcommand = subcommand
        self.figures = figures
        self.artifacts: list[Path] = []
        self.log: list[str] = []
        self.timings: dict[str, float] = {}
        out.mkdir(parents=True, exist_ok=True)

    def add(self, *paths):
        for p in paths:
            self.artifacts.append(Path(p))

    def timed(self, label: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = fn(*args, **kwargs)
        self.log.extend(str(w.message) for w in caught)
        self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0
        return result

    def write_json(self, name: str, payload) -> Path:
        path = self.out / name
        path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
        self.add(path)
        return path

    def write_csv(self, name: str, rows: list[dict]) -> Path:
        path = self.out / name
        with path.open("w", newline="") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                for r in rows:
                    w.writerow({k: _cell(v) for k, v in r.items()})
        self.add(path)
        return path

    def finish(self, status: int) -> int:
        timing = self.out / "timings.json"
        timing.write_text(json.dumps({k: round(v, 3) for k, v in sorted(self.timings.items())},
                                     indent=2, sort_keys=True) + "\n")
        record = {"subcommand": self.subcommand, "config_hash": self.cfg.config_hash(),
                  "seed": self.cfg.seed, "code_version": __version__, "exit_status": status,
                  "artifacts": sorted({str(p.relative_to(self.out)) for p in self.artifacts}),
                  "timings_file": timing.name, "log": self.log}
        (self.out / "run_record.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return status


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12e}"
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _k_max(cfg: ExperimentConfig) -> int:
    grid = cfg.grid()
    return int(cfg.diagnostics.get("k_max", min(8, grid.max_lattice_range())))


# pipelines ------------------------------------------------------------------------------

def cmd_simulate(run: Run) -> int:
    cfg = run.cfg
    c = cfg.symbol()
    u0 = cfg.initial_data()
    traj = run.timed("simulate", simulate, u0, c, cfg.solver())
    npz, js = traj.save(run.out / "trajectory")
    run.add(npz, js)
    rows = [{"t": float(t), "mass": u.norm() ** 2} for t, u in zip(traj.times, traj.fields())]
    run.write_csv("mass.csv", rows)
    m = np.array([r["mass"] for r in rows])
    drift = float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else 0.0
    run.write_json("simulate_summary.json", {"eps": traj.eps, "snapshots": len(traj.times),
                                              "relative_mass_drift": drift,
                                              "path": traj.config.get("path")})
    if run.figures:
        run.add(svg.stacked_lines(run.out / "mass.svg", traj.times, {"mass": m},
                                  cfg.config_hash()))
    return 0


def cmd_verify_division(run: Run) -> int:
    cfg = run.cfg
    c = cfg.symbol()
    rng = np.random.default_rng(cfg.seed)
    xi = rng.uniform(-20, 20, size=(4, 10_000))
    rows, status = [], 0
    for kind in ("mass", "momentum"):
        pair = run.timed(f"divide_{kind}", localized_division, c, None, 0.0, kind)
        try:
            vanish = check_resonant_vanishing(pair.c4, seed=cfg.seed)
        except DivisionError as exc:
            run.log.append(str(exc))
            vanish, status = float("nan"), EXIT_FAIL
        res = np.abs(pair.residual(*xi))
        scale = float(np.max(np.abs(pair.c4(*xi))))
        rel = float(np.max(res) / scale) if scale > 0 else float(np.max(res))
        if rel > 1e-6:
            status = EXIT_FAIL
        consts = size_constants(pair, seed=cfg.seed + 1)
        rows.append({"kind": kind, "resonant_max": vanish, "residual_max": float(np.max(res)),
                     "residual_relative": rel, "K_b": consts["K_b"], "K_r": consts["K_r"]})
    run.write_csv("division.csv", rows)
    run.write_json("division_summary.json", {"symbol": c.spec, "rows": rows, "pass": status == 0})
    return status


def _flux_defaults(cfg: ExperimentConfig):
    d = cfg.diagnostics
    bins = d.get("flux_bins", [0])
    dts = sorted(d.get("flux_dt", [0.004, 0.002, 0.001]), reverse=True)
    t_f = float(d.get("flux_time", 32 * dts[0]))
    return bins, d.get("flux_xi0"), float(d.get("flux_radius", 2.5)), dts, t_f


def cmd_verify_flux(run: Run) -> int:
    """Each bin k runs the configured data modulated to carrier k on the band k +- radius."""
    cfg = run.cfg
    c = cfg.symbol()
    bins, xi0_list, radius, dts, t_f = _flux_defaults(cfg)
    base = cfg.initial_data()
    rows, status = [], 0
    for k in bins:
        a = Localizer.from_partition(k)
        u0 = base.modulated(k)
        xi0s = xi0_list if xi0_list is not None else sorted({0.0, float(k)})
        engine = None
        for dt in dts:
            scfg = cfg.solver().replace(dt=dt, horizon=t_f + 4 * dts[0], band=(k - radius, k + radius),
                                        dense=(t_f - 3 * dt, t_f + 3 * dt), snapshot_every=t_f + 4 * dts[0],
                                        enforce_guard=False)
            traj = run.timed("simulate", simulate, u0, c, scfg)
            if engine is None:
                engine = run.timed("engine", CorrectionEngine.for_trajectory, traj, c, a)
            for xi0 in xi0s:
                r = run.timed("flux", flux_residual, traj, c, a, float(xi0), t_f, engine)
                rows.append({"dt": dt, **r.row()})
        finest = [r for r in rows if r["dt"] == dts[-1] and r["k"] == a.label]
        if any(max(r["mass_relative"], r["momentum_relative"]) > 1e-6 for r in finest):
            status = EXIT_FAIL
    path = run.out / "flux.csv"
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({key: _cell(v) for key, v in r.items()})
    run.add(path)
    run.write_json("flux_summary.json", {"dt": dts, "time": t_f, "radius": radius,
                                         "max_relative_at_finest": max(
                                             max(r["mass_relative"], r["momentum_relative"])
                                             for r in rows if r["dt"] == dts[-1]),
                                         "pass": status == 0})
    if run.figures:
        groups = {}
        for r in rows:
            groups.setdefault(f"k={r['k']} xi0={r['xi0']:g}", []).append(r["mass_relative"])
        run.add(svg.loglog_scatter(run.out / "flux.svg", dts, groups, {}, cfg.config_hash(),
                                   xlabel="dt", ylabel="relative residual"))
    return status


def cmd_morawetz(run: Run) -> int:
    cfg = run.cfg
    c = cfg.symbol()
    d = cfg.diagnostics
    pairs = d.get("morawetz_pairs", [[0, 0]])
    xi0 = float(d.get("morawetz_xi0", 0.0))
    stencil = int(d.get("morawetz_stencil", 1))
    x0_list = d.get("x0_list", [0.0])
    scfg = cfg.solver().replace(dense=True)
    traj = run.timed("simulate", simulate, cfg.initial_data(), c, scfg)
    summary = {}
    for ka, kb in pairs:
        a, b = Localizer.from_partition(ka), Localizer.from_partition(kb)
        for x0 in x0_list:
            if ka == kb:
                rep = run.timed("morawetz", interaction_diagonal, traj, a, xi0, float(x0), c,
                                stencil=stencil)
            else:
                rep = run.timed("morawetz", interaction_transversal, traj, a, b, xi0, float(x0), c,
                                stencil=stencil)
            tag = f"morawetz_{ka}_{kb}_x0_{float(x0):g}"
            run.add(rep.to_csv(run.out / f"{tag}.csv"))
            summary[tag] = rep.summary()
            if run.figures:
                run.add(svg.stacked_lines(run.out / f"{tag}.svg", rep.times,
                                          {"I": rep.I, "dI/dt": rep.dIdt, "J4": rep.J4, "J6": rep.J6,
                                           "J8": rep.J8, "K8": rep.K8, "residual": rep.residual},
                                          cfg.config_hash()))
        if ka == kb:
            summary[f"trace_{ka}"] = run.timed("trace", diagonal_trace_check, c, a)
    run.write_json("morawetz_summary.json", summary)
    return 0


def cmd_envelope(run: Run) -> int:
    cfg = run.cfg
    u0 = cfg.initial_data()
    P = make_partition(_k_max(cfg))
    eps = u0.norm()
    env = envelope_of(u0, eps, P)
    path = run.out / "envelope.csv"
    env.to_csv(path)
    run.add(path)
    raw = bin_masses(u0, P) / eps
    Mc = maximal_function(env).values
    rows = [{"k": int(k), "bin_mass_over_eps": float(r), "c_k": float(v), "Mc_k": float(m)}
            for k, r, v, m in zip(P.bins, raw, env.values, Mc)]
    run.write_csv("envelope_check.csv", rows)
    ok = bool(np.all(env.values >= raw - 1e-15)
              and np.all(Mc <= env.admissibility_constant * env.values * (1 + 1e-12)))
    run.write_json("envelope_summary.json", {"eps": eps, "norm": env.norm(),
                                             "admissible": env.admissible, "dominates": ok})
    return 0 if ok else EXIT_FAIL


def _norm_member(cfg: ExperimentConfig, member: int, out: Path | None):
    c = cfg.symbol()
    u0 = cfg.initial_data(member)
    traj = simulate(u0, c, cfg.solver())
    P = make_partition(_k_max(cfg))
    env = envelope_of(u0, u0.norm(), P)
    x0_list = cfg.diagnostics.get("x0_list")
    notes = list(traj.warnings)
    with_x = traj.times[-1] - traj.times[0] >= 1.0 - 1e-9
    if not with_x:
        notes.append("horizon shorter than one unit window; the X norm is skipped")
    rep = norms(traj, P, env, x0_list=x0_list, with_x=with_x)
    gb = global_bounds(traj, x0_list=x0_list)
    if out is not None:
        rep.write(out)
        (out / "global_summary.json").write_text(
            json.dumps(_clean(gb.summary()), indent=2, sort_keys=True) + "\n")
    return rep, gb, notes


def cmd_norms(run: Run) -> int:
    rep, gb, notes = run.timed("norms", _norm_member, run.cfg, 0, run.out)
    run.log.extend(notes)
    run.add(run.out / "norms_bins.csv", run.out / "norms_pairs.csv",
            run.out / "norms_summary.json", run.out / "global_summary.json")
    if run.figures:
        _ratio_figure(run, [rep])
    return 0


def _ratio_figure(run: Run, reports):
    bins = reports[0].bins
    table = np.full((len(bins), len(bins)), np.nan)
    pos = {k: i for i, k in enumerate(bins)}
    for rep in reports:
        for (k1, k2, x0), v in rep.ratios.get("uab-bi", {}).items():
            if x0 == 0.0:
                i, j = pos[k1], pos[k2]
                table[i, j] = np.nanmax([table[i, j], v])
    run.add(svg.heat_table(run.out / "bilinear_ratio.svg", bins, bins, table,
                           run.cfg.config_hash(), "bilinear ratio (k1, k2), x0 = 0"))


def _member_job(args):
    cfg, member, out = args
    rep, gb, notes = _norm_member(cfg, member, out)
    return member, rep, gb.summary(), notes


def cmd_sweep(run: Run, jobs: int) -> int:
    cfg = run.cfg
    d = cfg.diagnostics
    summary = {}
    if "eps_ladder" in d:
        rep = run.timed("scaling", scaling_study, cfg.symbol(), lambda e: cfg.initial_data(0, e),
                        d["eps_ladder"], cfg.solver())
        run.write_csv("scaling.csv", rep.rows())
        run.write_json("scaling_summary.json", rep.as_dict())
        summary["scaling"] = {"raw_slope": rep.raw_slope, "modified_slope": rep.modified_slope,
                              "degenerate": rep.degenerate}
        if run.figures:
            run.add(svg.loglog_scatter(run.out / "scaling.svg", rep.eps,
                                       {"raw": rep.raw_drift, "modified": rep.modified_drift},
                                       {"raw": rep.raw_slope, "modified": rep.modified_slope},
                                       cfg.config_hash()))
    if cfg.members > 1:
        tasks = []
        for m in range(cfg.members):
            out = run.out / f"member_{m:03d}"
            out.mkdir(parents=True, exist_ok=True)
            tasks.append((cfg, m, out))
        t0 = time.perf_counter()
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_member_job, tasks))
        else:
            results = [_member_job(t) for t in tasks]
        run.timings["ensemble"] = time.perf_counter() - t0
        results.sort(key=lambda r: r[0])
        reports = [r[1] for r in results]
        rows = []
        for member, rep, gsum, notes in results:
            run.log.extend(f"member {member}: {n}" for n in notes)
            s = rep.summary()
            rows.append({"member": member, **{f"{k}_max": s[k]["max_ratio"]
                                              for k in ("uk-ee", "uk-se", "uk-bi", "uab-bi")},
                         "main-L2": gsum["main-L2"]["ratio"], "main-Str": gsum["main-Str"]["ratio"]})
            for name in ("norms_bins.csv", "norms_pairs.csv", "norms_summary.json",
                         "global_summary.json"):
                run.add(run.out / f"member_{member:03d}" / name)
        run.write_csv("ensemble.csv", rows)
        seps = [s for s in (4, 8, 16) if s <= 2 * _k_max(cfg)]
        prof = separation_profile(reports, seps)
        finite = all(rep.summary()[k]["finite"] for rep in reports
                     for k in ("uk-ee", "uk-se", "uk-bi", "uab-bi"))
        summary["ensemble"] = {"members": cfg.members, "all_ratios_finite": finite,
                               "separation": prof,
                               "fitted_constants": {k: max(r[f"{k}_max"] for r in rows)
                                                    for k in ("uk-ee", "uk-se", "uk-bi", "uab-bi")}}
        if run.figures:
            _ratio_figure(run, reports)
    if not summary:
        run.log.append("nothing to sweep: set diagnostics.eps_ladder or data.members > 1")
        run.write_json("sweep_summary.json", summary)
        return EXIT_CONFIG
    run.write_json("sweep_summary.json", summary)
    return 0


# entry point ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlslab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nlslab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="experiment YAML file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")
        p.add_argument("--figures", action="store_true", help="also write SVG figures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config).with_seed(args.seed)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"{args.config}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(cfg.raw.get("output", f"runs/{args.subcommand}"))
    run = Run(cfg, out, args.subcommand, args.figures)
    handlers = {"simulate": cmd_simulate, "verify-division": cmd_verify_division,
                "verify-flux": cmd_verify_flux, "morawetz": cmd_morawetz,
                "envelope": cmd_envelope, "norms": cmd_norms}
    try:
        if args.subcommand == "sweep":
            status = cmd_sweep(run, max(1, args.jobs))
        else:
            status = handlers[args.subcommand](run)
    except GuardError as exc:
        print(f"guard violation: {exc}\nhint: {GUARD_HINT}", file=sys.stderr)
        run.log.append(f"guard violation: {exc}")
        return run.finish(EXIT_GUARD)
    except (DomainError, SimulationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.log.append(str(exc))
        return run.finish(EXIT_FAIL)
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
