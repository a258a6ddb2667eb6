"""Command-line front door: ``logvort {run,norms,oscint,verify,report}``.

Exit codes: 0 when the compute succeeds and every check passes, 2 when the
compute succeeds but a check fails, 1 on configuration or compute errors.
The last line printed is always ``STATUS: ok|check-fail|error``.

Every CSV starts with ``#`` lines holding the artifact version, the command
and the full configuration echo.  No timestamps are written, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, ConfigError, load_config, parse_config
from .euler import DIAG_COLUMNS, SolverAbort
from .field import read_snapshot, set_threads, write_snapshot
from .inflation import (DEFORMATION_COLUMNS, INFLATION_COLUMNS, PatchLayout, run_deformation,
                        run_inflation, run_patches)
from .initdata import PerturbationSpec, make_beta, make_fM, quadrupole
from .norms import (NormParams, h_monotone_check, interpolation_sweep, norm_rows,
                    use_natural_log)
from .oscint import (STUDY_COLUMNS, SWEEP_COLUMNS, SyntheticMap, fit_exponent,
                     frequency_shift_study, soundness_sweep)

INTERPOLATION_CASES = ((2.0, 1.0, 0.25), (2.0, 1.0, 0.5), (1.5, 0.0, 0.5))
MONOTONE_ALPHAS = (0.1, 0.25, 0.5, 0.9)
SUITES = ("interpolation", "monotonicity", "oscillatory", "frequency")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which means check-fail here
        raise ConfigError(message)


class Output:
    """Output directory plus the provenance header shared by every file."""

    def __init__(self, root: Path, command: str, cfg: Config | None, extra: dict) -> None:
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        head = [f"logvort {__version__}", f"command: {command}"]
        head += [f"{k}: {v}" for k, v in sorted(extra.items())]
        if cfg is not None:
            head += ["config:"] + [f"  {line}" for line in cfg.echo() if line]
        self.header = head
        self.checks: list[tuple[str, bool, str]] = []

    def csv(self, name: str, columns, rows) -> Path:
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        return path

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append((name, bool(ok), detail))

    def summary(self, extra: dict | None = None) -> Path:
        path = self.root / "summary.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            for k, v in (extra or {}).items():
                fh.write(f"{k}: {_cell(v)}\n")
            for name, ok, detail in self.checks:
                fh.write(f"check.{name}: {'pass' if ok else 'fail'} ({detail})\n")
        return path

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return str(v)


# --- run ---------------------------------------------------------------------------

def _run_deformation(cfg: Config, out: Output) -> None:
    plan = cfg.plan()
    rep = run_deformation(plan)
    out.csv("diagnostics.csv", DIAG_COLUMNS, [[d[c] for c in DIAG_COLUMNS] for d in rep.run.diagnostics])
    out.csv("deformation.csv", DEFORMATION_COLUMNS, rep.rows())
    if cfg["output", "snapshots"]:
        snaps = out.root / "snapshots"
        snaps.mkdir(exist_ok=True)
        for i, s in enumerate(rep.run.snapshots):
            write_snapshot(snaps / f"omega_{i:04d}.lgv", s.omega, s.time)
    out.check("lower_bound_slack", rep.min_slack >= 0.95, f"min slack {rep.min_slack:.4g} >= 0.95")
    out.check("origin_growth", rep.max_origin_mismatch <= 0.02,
              f"max |J(0)/exp(int)-1| = {rep.max_origin_mismatch:.3g} <= 0.02")
    out.check("det_jacobian", rep.max_det_defect <= 1e-4, f"max |det J - 1| = {rep.max_det_defect:.3g}")
    out.check("origin_fixed", rep.max_origin_drift <= 1e-8, f"origin drift {rep.max_origin_drift:.3g}")
    out.summary({"IM": rep.IM, "tracers": rep.tracer_count, "steps": rep.run.steps,
                 "final_deformation": rep.deformation[-1], "fitted_C": rep.fitted_C})


def _run_inflation(cfg: Config, out: Output) -> None:
    rep = run_inflation(cfg.plan())
    out.csv("inflation.csv", INFLATION_COLUMNS, [r.row() for r in rep.rows])
    ks = sorted({r.k for r in rep.rows})
    last = [rep.at_t0(k) for k in ks]
    if len(ks) >= 2:
        e = fit_exponent(np.array(ks), np.array([r.omega_diff_l2 for r in last]))
        out.check("l2_difference_exponent", abs(e + 1) <= 0.2, f"exponent {e:.4g}, target -1 +- 0.2")
        W = [r.W_minus_omega_h1a for r in last]
        out.check("W_minus_omega_decreasing", all(np.diff(W) < 0), "at t0 across k")
    for k in ks:
        rows = [r for r in rep.rows if r.k == k]
        L, ratio = np.array([r.L_t for r in rows]), np.array([r.inflation_ratio for r in rows])
        order = np.argsort(L)
        out.check(f"ratio_monotone_k{k:g}", bool(np.all(np.diff(ratio[order]) >= 0)),
                  "inflation ratio nondecreasing in L")
    s = rep.site
    out.summary({"t0": s.t0, "x0": s.x0, "r0": s.r0, "L": s.L, "delta": rep.delta,
                 "branch": rep.branch, "near_threshold": rep.near_threshold,
                 "base_h1alpha_t0": rep.base_h1a_t0})


def patch_centers(separation: float, rho: float, n: int, box: float):
    """Two patches on the diagonal, ``separation`` support radii apart, snapped
    outward to grid points."""
    h = 2.0 * math.pi * box / n
    a = math.ceil(separation * rho / (2.0 * math.sqrt(2.0)) / h) * h
    return ((a, a), (-a, -a))


def _run_patches(cfg: Config, out: Output) -> None:
    n, box = cfg["grid", "n"], cfg["grid", "box"]
    t_end, samples = cfg["time", "t_end"], cfg["time", "samples"]
    patch = quadrupole(sharpness=cfg["patches", "sharpness"], scale=cfg["patches", "scale"])
    solver = cfg.solver()
    single = run_patches(PatchLayout(patch, ((0.0, 0.0),)), n, box, t_end, samples, solver)
    iso = single.isolated
    rows, worst = [], []
    for d in cfg["patches", "separations"]:
        lay = PatchLayout(patch, patch_centers(d, patch.support_radius, n, box))
        rep = run_patches(lay, n, box, t_end, samples, solver, isolated=iso)
        worst.append(max(rep.differences))
        rows += [(d, i, c[0], c[1], v) for i, (c, v) in enumerate(zip(lay.centers, rep.differences))]
    out.csv("patches.csv", ("separation", "patch", "x1", "x2", "h2_difference"), rows)
    out.check("single_patch", single.differences[0] <= 1e-8, f"difference {single.differences[0]:.3g}")
    out.check("decreasing_in_separation", bool(np.all(np.diff(worst) < 0)),
              " > ".join(f"{w:.3g}" for w in worst))
    out.summary({"rho": patch.support_radius})


def _run_interpolation(cfg: Config, out: Output) -> None:
    n, count, seed = cfg["grid", "n"], cfg["norms", "count"], cfg["run", "seed"]
    worst = interpolation_sweep(INTERPOLATION_CASES, count=count, n=n, seed=seed)
    out.csv("interpolation.csv", ("s", "t", "alpha", "worst_ratio"),
            [(*c, worst[c]) for c in INTERPOLATION_CASES])
    for c in INTERPOLATION_CASES:
        out.check(f"interpolation_s{c[0]:g}_t{c[1]:g}_a{c[2]:g}", worst[c] <= 1 + 1e-8,
                  f"worst ratio {worst[c]:.6g}")
    for a in MONOTONE_ALPHAS:
        out.check(f"h_monotone_a{a:g}", h_monotone_check(a), "10^4-point log grid")
    out.summary({"fields": count})


def _run_oscillatory(cfg: Config, out: Output) -> None:
    count, seed = cfg["norms", "count"], cfg["run", "seed"]
    rows = soundness_sweep(count, seed)
    out.csv("oscint_sweep.csv", SWEEP_COLUMNS, rows)
    bad = sum(1 for r in rows if not r[-1])
    out.check("nsp_bound_sound", bad == 0, f"{bad} violations in {count} problems")
    _frequency_study(out)
    out.summary({"problems": count})


def _frequency_study(out: Output) -> None:
    L, alpha, box, n = 16.0, 0.25, 1.0, 1024
    ks = (16.0, 32.0, 64.0, 128.0)
    reps = []
    for k in ks:
        beta = make_beta(PerturbationSpec(k=k, x0=(1.0, 1.0), L=L, delta=0.25), alpha, n, box)
        reps.append(frequency_shift_study(beta, SyntheticMap(L), k, L, alpha))
    out.csv("frequency_study.csv", STUDY_COLUMNS, [r.row() for r in reps])
    e = fit_exponent(np.array(ks), np.array([r.max_low_freq for r in reps]))
    out.check("low_frequency_decay", e <= -1.8, f"exponent {e:.4g} <= -1.8")
    out.check("high_frequency_mass", reps[-1].high_mass_fraction >= 0.9,
              f"fraction {reps[-1].high_mass_fraction:.5g} at k=128")
    q = reps[-1].h1alpha_proxy / math.sqrt(L)
    out.check("q_h1alpha_large", q >= 0.45, f"|q|_H1a / sqrt(L) = {q:.4g} >= 0.45")


RUNNERS = {
    "deformation": _run_deformation,
    "inflation": _run_inflation,
    "patches": _run_patches,
    "interpolation-suite": _run_interpolation,
    "oscillatory-suite": _run_oscillatory,
}


# --- other subcommands -------------------------------------------------------------

def _norms(cfg: Config, out: Output) -> None:
    n, box = cfg["grid", "n"], cfg["grid", "box"]
    params = NormParams(cfg["norms", "s"], cfg["norms", "alpha"])
    label = cfg["experiment", "label"] or cfg.kind
    rows = norm_rows(label, "f_M", make_fM(cfg.lattice(), n, box), params)
    pert = cfg.perturbation()
    if pert is not None:
        for k in cfg["perturbation", "k"]:
            spec = PerturbationSpec(k=k, x0=pert.x0, L=pert.L, delta=pert.delta)
            beta = make_beta(spec, cfg["lattice", "alpha"], n, box)
            rows += norm_rows(label, f"beta_k{k:g}", beta, params)
    out.csv("norms.csv", ("experiment_id", "field_id", "s", "alpha", "norm_kind", "value"), rows)
    out.summary({"rows": len(rows)})


def _report(out: Output, cfg: Config | None) -> None:
    """Recompute norms from the LGV1 snapshots under the output directory."""
    params = NormParams(cfg["norms", "s"], cfg["norms", "alpha"]) if cfg else NormParams(1.0, 0.25)
    files = sorted((out.root / "snapshots").glob("*.lgv"))
    if not files:
        raise FileNotFoundError(f"no snapshots under {out.root / 'snapshots'}")
    rows = []
    for path in files:
        f, t = read_snapshot(path)
        rows += [(*r, t) for r in norm_rows(path.stem, "omega", f, params)]
    out.csv("report.csv", ("experiment_id", "field_id", "s", "alpha", "norm_kind", "value", "t"), rows)
    out.summary({"snapshots": len(files)})


def _suite_config(suite: str, seed: int) -> Config:
    kind = {"interpolation": "interpolation-suite", "monotonicity": "interpolation-suite",
            "oscillatory": "oscillatory-suite", "frequency": "oscillatory-suite"}[suite]
    return parse_config(f"[experiment]\nkind = {kind}\n[run]\nseed = {seed}\n")


def _verify(suite: str, cfg: Config, out: Output) -> None:
    if suite == "monotonicity":
        for a in MONOTONE_ALPHAS:
            out.check(f"h_monotone_a{a:g}", h_monotone_check(a), "10^4-point log grid")
        out.summary()
    elif suite == "frequency":
        _frequency_study(out)
        out.summary()
    else:
        RUNNERS[cfg.kind](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="logvort", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, needs in (("run", True), ("norms", True), ("oscint", False), ("verify", False),
                        ("report", False)):
        s = sub.add_parser(name)
        s.add_argument("--config", required=needs, type=Path)
        s.add_argument("--out", type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--quiet", action="store_true")
        if name == "verify":
            s.add_argument("--suite", required=True, choices=SUITES)
        if name == "oscint":
            s.add_argument("--count", type=int, default=200)
    return p


def _resolve(args) -> tuple[Config | None, Path]:
    cfg = load_config(args.config) if args.config else None
    if cfg is not None and args.seed is not None:
        cfg = cfg.with_overrides(run__seed=args.seed)
    if cfg is not None and args.threads is not None:
        cfg = cfg.with_overrides(run__threads=args.threads)
    env = os.environ.get("LOGVORT_OUT")
    if env:
        out = Path(env)
    elif args.out is not None:
        out = args.out
    else:
        out = Path(cfg["output", "dir"]) if cfg else Path("out")
    return cfg, out


def _execute(args) -> bool:
    cfg, root = _resolve(args)
    seed = args.seed if args.seed is not None else (cfg["run", "seed"] if cfg else 0)
    threads = args.threads or (cfg["run", "threads"] if cfg else 1)
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    set_threads(threads)
    if cfg is not None:
        use_natural_log(cfg["norms", "natural_log"])
    extra = {"seed": seed, "threads": threads}
    if args.command == "run":
        out = Output(root, "run", cfg, extra)
        RUNNERS[cfg.kind](cfg, out)
    elif args.command == "norms":
        out = Output(root, "norms", cfg, extra)
        _norms(cfg, out)
    elif args.command == "oscint":
        base = cfg or parse_config("[experiment]\nkind = oscillatory-suite\n")
        run_cfg = base.with_overrides(run__seed=seed, norms__count=args.count)
        out = Output(root, "oscint", run_cfg, extra)
        _run_oscillatory(run_cfg, out)
    elif args.command == "verify":
        run_cfg = _suite_config(args.suite, seed)
        out = Output(root, f"verify {args.suite}", run_cfg, extra)
        _verify(args.suite, run_cfg, out)
    else:
        out = Output(root, "report", cfg, extra)
        _report(out, cfg)
    if not args.quiet:
        for name, ok, detail in out.checks:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        print(f"wrote {root}")
    return out.passed


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage()
        print("STATUS: error")
        return 1
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("missing subcommand")
        passed = _execute(args)
    except (ConfigError, SolverAbort, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("STATUS: error")
        return 1
    print("STATUS: ok" if passed else "STATUS: check-fail")
    return 0 if passed else 2


if __name__ == "__main__":
    sys.exit(main())
