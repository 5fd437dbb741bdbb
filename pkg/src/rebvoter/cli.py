"""Command-line front end.

Subcommands ``sweep``, ``harmonic``, ``edge``, ``exact``, ``fit``, ``bitmap``
and ``rerun``.  Exit codes: 0 success, 1 usage error, 2 runtime error,
3 failed check (``exact --check-duality``).
"""
from __future__ import annotations

import argparse
import csv
import os
import platform
import shlex
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .models import (
    DUAL_PAIRS,
    Family,
    ModelSpec,
    Representation,
    dual_of,
    parse_family,
    parse_representation,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_id() -> str:
    import numba
    import scipy

    return (f"rebvoter-{__version__} numpy-{np.__version__} scipy-{scipy.__version__} "
            f"numba-{numba.__version__} python-{platform.python_version()}")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(path: Path, items: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items.items():
            text = str(v).replace("\n", " ")
            fh.write(f"{k}={text}\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k] = v
    return out


# ---------------------------------------------------------------- plans

def _add_plan_args(p: argparse.ArgumentParser, need_rep: bool = True) -> None:
    p.add_argument("--model", required=True, help="one-sided, two-sided, disagreement, swapping, mixed")
    if need_rep:
        p.add_argument("--rep", default="interface", help="spin, interface or mirror (default interface)")
    p.add_argument("--N", type=int, required=True, help="ring size")
    p.add_argument("--T", type=float, required=True, help="total simulated time")
    p.add_argument("--n", type=int, default=1, help="number of bins")
    p.add_argument("--ab", type=float, required=True, help="alpha at t=0")
    p.add_argument("--ae", type=float, default=None, help="alpha at t=T (default: --ab)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--workers", type=int, default=1, help="threads for replicas")
    p.add_argument("--burn-in", type=float, default=None, help="default 1%% of T")
    p.add_argument("--initial", default="single", choices=["single", "count", "product-half"])
    p.add_argument("--initial-count", type=int, default=1)
    p.add_argument("--max-k", type=int, default=21)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--manifest", default=None, help="manifest path (default: OUT.manifest)")


def _spec(args, rep: Representation | None = None) -> ModelSpec:
    try:
        fam = parse_family(args.model)
        if rep is None:
            rep = parse_representation(args.rep)
        return ModelSpec(fam, rep)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _plan(args, spec: ModelSpec, patterns=()):
    from .engine import Initial, SweepPlan

    if args.replicas < 1:
        raise UsageError("--replicas must be at least 1")
    ae = args.ab if args.ae is None else args.ae
    try:
        return SweepPlan(spec=spec, N=args.N, T=args.T, n=args.n, alpha_b=args.ab, alpha_e=ae,
                         seed=args.seed, initial=Initial(args.initial),
                         initial_count=args.initial_count, burn_in=args.burn_in,
                         max_k=args.max_k, patterns=tuple(patterns))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _plan_manifest(plan, replicas: int) -> dict:
    from .engine import replica_seed

    d = {
        "model": plan.spec.family.value,
        "representation": plan.spec.representation.value,
        "N": plan.N,
        "T": _fmt(plan.T),
        "n": plan.n,
        "alpha_b": _fmt(plan.alpha_b),
        "alpha_e": _fmt(plan.alpha_e),
        "direction": ("constant" if plan.alpha_b == plan.alpha_e
                      else "raising" if plan.alpha_e > plan.alpha_b else "lowering"),
        "seed": plan.seed,
        "initial": plan.initial.value,
        "initial_count": plan.initial_count,
        "burn_in": _fmt(plan.burn_time),
        "max_k": plan.max_k,
        "patterns": ",".join(plan.patterns),
        "replicas": replicas,
        "replica_averaging": "merged accumulators of independent trajectories",
    }
    for r in range(replicas):
        ss = replica_seed(plan.seed, r)
        d[f"replica_seed.{r}"] = f"{ss.entropy}/{r}/{int(ss.generate_state(1, np.uint64)[0])}"
    return d


def _finish(args, argv, outputs, extra: dict, t0: float) -> None:
    manifest = Path(args.manifest) if getattr(args, "manifest", None) else Path(str(outputs[0]) + ".manifest")
    items = {"command": args.command, "argv": shlex.join(argv), "build": build_id()}
    items.update(extra)
    items["wall_time_s"] = f"{time.perf_counter() - t0:.3f}"
    items["outputs"] = ",".join(str(o) for o in outputs)
    write_manifest(manifest, items)


def _curve_columns(name, curve, n):
    val = np.full(n, np.nan)
    err = np.full(n, np.nan)
    val[curve.bins] = curve.value
    err[curve.bins] = curve.stderr
    return (name, val), (name + "_stderr", err)


def _table(merged, columns):
    header = ["bin_index", "alpha_mean", "elapsed"] + [c[0] for c in columns] + ["events"]
    n = len(merged)
    rows = []
    for b in range(n):
        rows.append([b, merged.alpha_mean[b], merged.elapsed[b]]
                    + [c[1][b] for c in columns] + [merged.events[b]])
    return header, rows


# ---------------------------------------------------------------- commands

def cmd_sweep(args, argv) -> int:
    from .engine import merge_bins, run_replicas
    from .observables import chi_k_hat, mu_hat, rho_hat

    t0 = time.perf_counter()
    plan = _plan(args, _spec(args))
    reps = run_replicas(plan, args.replicas, args.workers)
    merged = merge_bins(reps)
    cols = []
    cols.extend(_curve_columns("rho_hat", rho_hat(reps), plan.n))
    for k in range(1, plan.max_k + 1, 2):
        cols.extend(_curve_columns(f"chi_{k}", chi_k_hat(reps, k), plan.n))
    cols.extend(_curve_columns("mu_hat", mu_hat(reps), plan.n))
    header, rows = _table(merged, cols)
    out = Path(args.out)
    write_csv(out, header, rows)
    _finish(args, argv, [out], _plan_manifest(plan, args.replicas), t0)
    return EXIT_OK


def cmd_harmonic(args, argv) -> int:
    from .engine import merge_bins, run_replicas
    from .observables import Pattern, harmonic_hat

    t0 = time.perf_counter()
    texts = [p for p in (args.patterns or "").split(",") if p.strip()]
    if not texts:
        raise UsageError("--patterns needs at least one pattern")
    try:
        pats = [Pattern(p) for p in texts]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = _spec(args, Representation.SPIN)
    try:
        spec = dual_of(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    plan = _plan(args, spec, patterns=[p.text for p in pats])
    reps = run_replicas(plan, args.replicas, args.workers)
    merged = merge_bins(reps)
    cols = []
    for raw, p in zip(texts, pats):
        cols.extend(_curve_columns(f"f_{raw.strip()}", harmonic_hat(reps, p), plan.n))
    header, rows = _table(merged, cols)
    out = Path(args.out)
    write_csv(out, header, rows)
    extra = _plan_manifest(plan, args.replicas)
    extra["dual_representation"] = spec.representation.value
    _finish(args, argv, [out], extra, t0)
    return EXIT_OK


def cmd_edge(args, argv) -> int:
    from .edge import Side, edge_replicas, edge_speed, merge_edges

    t0 = time.perf_counter()
    plan = _plan(args, _spec(args))
    sides = [Side.LEFT, Side.RIGHT] if args.side == "both" else [Side(args.side)]
    cols, merged = [], None
    for side in sides:
        runs = edge_replicas(plan, side, args.replicas, args.W, args.workers)
        m = merge_edges(runs)
        merged = merged or m
        name = "v_minus" if side is Side.LEFT else "v_plus"
        cols.extend(_curve_columns(name, edge_speed(runs), plan.n))
        cols.append((f"restarts_{side.value}", m.restarts))
    header, rows = _table(merged, cols)
    out = Path(args.out)
    write_csv(out, header, rows)
    extra = _plan_manifest(plan, args.replicas)
    extra["window"] = args.W
    _finish(args, argv, [out], extra, t0)
    return EXIT_OK


def cmd_exact(args, argv) -> int:
    from . import exact

    if args.check_duality:
        if args.alpha is None:
            raise UsageError("--check-duality needs --alpha")
        if args.model:
            fams = [parse_family(args.model)]
        else:
            fams = [f for f in DUAL_PAIRS if f is not Family.MIXED_ONE_SIDED]
        worst = 0.0
        for fam in fams:
            x = ModelSpec(fam, Representation.SPIN, args.alpha)
            y = dual_of(x)
            res = exact.check_duality(x, y, args.N)
            worst = max(worst, res)
            print(f"{fam.value} <-> {y.family.value}/{y.representation.value}: max residual {res:.3e}")
        print(f"max residual {worst:.3e}")
        return EXIT_OK if worst < args.tol else EXIT_CHECK
    if args.alpha is None or not args.model:
        raise UsageError("stationary mode needs --model and --alpha")
    spec = ModelSpec(parse_family(args.model), parse_representation(args.rep), args.alpha)
    system = exact.build_generator(spec, args.N, args.sector)
    law = exact.stationary(system)
    pats = [p for p in (args.patterns or "").split(",") if p.strip()]
    obs = exact.exact_observables(law, pats)
    print(f"states {system.states.size}")
    print(f"residual {law.residual:.3e}")
    print(f"mean_ones {obs.mean_ones!r}")
    for k, p in sorted(obs.prob_k.items()):
        print(f"P[|Y|={k}] {p!r}")
    for name, v in obs.harmonic.items():
        print(f"f_{name} {v!r}")
    return EXIT_OK


def _read_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except ValueError:
            continue
    return cols


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError("--grid must look like LO:HI:STEP") from None
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def cmd_fit(args, argv) -> int:
    from . import analysis

    cols = _read_columns(args.input)
    for need in (args.alpha_column, args.column):
        if need not in cols:
            raise UsageError(f"column {need!r} not found in {args.input}")
    a, v = cols[args.alpha_column], cols[args.column]
    m = np.isfinite(a) & np.isfinite(v)
    if args.alpha_min is not None:
        m &= a >= args.alpha_min
    if args.alpha_max is not None:
        m &= a <= args.alpha_max
    a, v = a[m], v[m]
    if args.model == "linfrac":
        keep = v > 0
        fit = analysis.fit_linear_fractional(a[keep], v[keep])
        print(f"c1 {fit.c1!r}")
        print(f"c2 {fit.c2!r}")
        print(f"alpha_c {fit.alpha_c!r}")
        print(f"residual_rms {fit.residual_rms!r}")
        print(f"cov_diag {fit.cov_diag[0]!r} {fit.cov_diag[1]!r}")
        if fit.degenerate:
            print("degenerate c1 = c2 family")
    elif args.model == "critical":
        if args.side == "both":
            if args.chi_column not in cols:
                raise UsageError(f"column {args.chi_column!r} not found in {args.input}")
            c = cols[args.chi_column][m]
            scan = analysis.joint_critical_scan(a, v, c, _grid(args.grid))
        else:
            scan = analysis.critical_scan(a, v, _grid(args.grid), side=args.side)
        for a0, s in zip(scan.alpha0, scan.score):
            print(f"alpha0 {a0!r} score {s!r}")
        print(f"alpha_c {scan.best!r} bracket {scan.bracket[0]!r} {scan.bracket[1]!r}")
    else:
        if args.alpha_c is None:
            raise UsageError("--model beta needs --alpha-c")
        betas = [float(b) for b in args.betas.split(",")]
        scan = analysis.beta_scan(a, v, args.alpha_c, betas)
        for b, s in zip(scan.beta, scan.slope):
            print(f"beta {b!r} end_slope {s!r}")
        print(f"beta {scan.best!r}")
    return EXIT_OK


def cmd_bitmap(args, argv) -> int:
    from .engine import SweepPlan, render_spacetime, write_pgm

    t0 = time.perf_counter()
    spec = _spec(args)
    N = args.N if args.N is not None else 4 * args.W
    if args.W > N:
        raise UsageError("--W exceeds --N")
    try:
        plan = SweepPlan(spec=spec, N=N, T=max(args.T, 1.0), n=1, alpha_b=args.alpha,
                         alpha_e=args.alpha, seed=args.seed, burn_in=0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bmp = render_spacetime(plan, args.W, args.T, args.sample_dt)
    out = Path(args.out)
    write_pgm(out, bmp)
    extra = {"model": spec.family.value, "representation": spec.representation.value,
             "alpha": _fmt(args.alpha), "N": N, "W": args.W, "T": _fmt(args.T),
             "sample_dt": _fmt(args.sample_dt), "seed": args.seed, "rows": bmp.shape[0]}
    _finish(args, argv, [out], extra, t0)
    return EXIT_OK


def cmd_rerun(args, argv) -> int:
    items = read_manifest(args.manifest_file)
    if "argv" not in items:
        raise UsageError("manifest has no argv entry")
    old = shlex.split(items["argv"])
    if args.out:
        old = _override(old, "--out", args.out)
        old = _override(old, "--manifest", args.out + ".manifest")
    return main(old)


def _override(argv: list[str], flag: str, value: str) -> list[str]:
    out = list(argv)
    if flag in out:
        out[out.index(flag) + 1] = value
    else:
        out += [flag, value]
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rebvoter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rebvoter {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="rho, chi_k and mu curves from a sweep")
    _add_plan_args(s)
    s.set_defaults(func=cmd_sweep)

    h = sub.add_parser("harmonic", help="harmonic functions f_x from the dual model")
    _add_plan_args(h, need_rep=False)
    h.add_argument("--patterns", default="", help="comma separated, e.g. 1,11,101")
    h.set_defaults(func=cmd_harmonic)

    e = sub.add_parser("edge", help="edge speeds from the frame process")
    _add_plan_args(e)
    e.add_argument("--side", default="both", choices=["left", "right", "both"])
    e.add_argument("--W", type=int, default=2048, help="window size")
    e.set_defaults(func=cmd_edge)

    x = sub.add_parser("exact", help="exact generator checks on small rings")
    x.add_argument("--check-duality", action="store_true")
    x.add_argument("--model", default=None)
    x.add_argument("--rep", default="interface")
    x.add_argument("--N", type=int, required=True)
    x.add_argument("--alpha", type=float, default=None)
    x.add_argument("--sector", default="odd", choices=["odd", "even", "full"])
    x.add_argument("--patterns", default="")
    x.add_argument("--tol", type=float, default=1e-12)
    x.set_defaults(func=cmd_exact)

    f = sub.add_parser("fit", help="fits and scans on a CSV curve")
    f.add_argument("--input", required=True)
    f.add_argument("--model", default="linfrac", choices=["linfrac", "critical", "beta"])
    f.add_argument("--column", default="rho_hat")
    f.add_argument("--alpha-column", default="alpha_mean")
    f.add_argument("--alpha-min", type=float, default=None)
    f.add_argument("--alpha-max", type=float, default=None)
    f.add_argument("--side", default="rho", choices=["rho", "chi", "both"])
    f.add_argument("--chi-column", default="chi_1", help="second curve for --side both")
    f.add_argument("--grid", default="0.45:0.56:0.0025", help="LO:HI:STEP for alpha0")
    f.add_argument("--alpha-c", type=float, default=None)
    f.add_argument("--betas", default="0.8,0.85,0.9,0.92,0.95,1.0,1.05,1.1")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bitmap", help="space-time PGM of the interface process")
    b.add_argument("--model", required=True)
    b.add_argument("--rep", default="interface")
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--W", type=int, required=True, help="window width in sites")
    b.add_argument("--T", type=float, required=True, help="total time shown")
    b.add_argument("--N", type=int, default=None, help="ring size (default 4 W)")
    b.add_argument("--sample-dt", type=float, default=None, help="time per row (default T/W)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--manifest", default=None)
    b.set_defaults(func=cmd_bitmap)

    r = sub.add_parser("rerun", help="repeat a run recorded in a manifest")
    r.add_argument("manifest_file")
    r.add_argument("--out", default=None, help="write to a different output path")
    r.set_defaults(func=cmd_rerun)
    return p


def _outputs(args) -> list[Path]:
    out = getattr(args, "out", None)
    if not out or args.command == "rerun":
        return []
    man = getattr(args, "manifest", None) or out + ".manifest"
    return [Path(out), Path(man)]


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "bitmap" and args.sample_dt is None:
        args.sample_dt = args.T / args.W if args.T > 0 else 1.0
    try:
        return args.func(args, argv)
    except UsageError as exc:
        _cleanup(args)
        print(f"rebvoter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        _cleanup(args)
        print(f"rebvoter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _cleanup(args) -> None:
    for path in _outputs(args):
        try:
            os.remove(path)
        except FileNotFoundError:
            pass


if __name__ == "__main__":
    sys.exit(main())
