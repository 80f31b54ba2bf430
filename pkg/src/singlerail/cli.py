"""Command-line front end.

Every command writes its main table as CSV to ``--out`` (stdout when omitted)
and a short summary to stdout (stderr when the table itself goes to stdout).
A ``--config`` file holds flat ``key = value`` lines using the long flag names;
explicit flags override it and unknown keys are rejected.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import analytics as an
from . import montecarlo as mc
from . import oracle
from . import protocols as pr
from .errors import ConfigError, DomainError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MEASURED_SWAP_EXAMPLE = "A1C=0.942,A1B=0.862,A2C=0.879,A2B=0.903"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- parsing helpers


def float_list(text: str) -> list[float]:
    """Comma list ``a,b,c`` or inclusive range ``start:stop:count``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:count, got {text!r}")
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise argparse.ArgumentTypeError("range count must be positive")
        return [float(v) for v in np.linspace(start, stop, n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def label_values(text: str) -> dict[str, float]:
    out = {}
    for tok in text.split(","):
        name, sep, val = tok.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected label=value, got {tok!r}")
        out[name.strip()] = float(val)
    return out


def assignment(text: str) -> dict[str, str]:
    out = {}
    for tok in text.split(","):
        key, sep, label = tok.partition("=")
        key = key.strip()
        if not sep or key not in ("V12", "V13", "V42", "V43"):
            raise argparse.ArgumentTypeError(f"expected V12=label,..., got {tok!r}")
        out[key] = label.strip()
    if len(out) != 4:
        raise argparse.ArgumentTypeError("assignment must name V12, V13, V42 and V43")
    return out


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit(args, table: str, summary: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(table)
        sys.stderr.write(summary)


def _source(args) -> an.SourceParams:
    return an.SourceParams(args.lam, args.v_hom_alice, args.v_hom_bob)


# --------------------------------------------------------------------------- characterize


def _characterize_point(job):
    a2, lam, x_a = job
    spec = pr.ProtocolSpec(pr.MZI, alpha=math.sqrt(a2), lam=lam, x_a=x_a, high_loss="all")
    if a2 in (0.0, 1.0):
        return 0.0
    return pr.fringe_scan(spec).visibility("D1")


def cmd_characterize(args) -> int:
    """Self-homodyne visibility against single-count rate, then the purity fit."""
    src = _source(args)
    x_a = math.sqrt(src.v_hom_alice)
    grid = args.alpha_sq
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise DomainError("alpha_sq values must lie in [0, 1]")
    vis = _map(_characterize_point, [(a, src.lam, x_a) for a in grid], args.workers)
    rows = [(float(a), 1.0 - a, float(v)) for a, v in zip(grid, vis)]
    usable = [(s, v) for _, s, v in rows if s > 0.0]
    if len(usable) >= 2:
        fit = an.estimate_purity_from_scan(usable, src.v_hom_alice)
        summary = f"lambda_fit = {_fmt(fit.lam)}\nslope = {_fmt(fit.slope)}\nintercept = {_fmt(fit.intercept)}\n"
    else:
        summary = "lambda_fit = nan (fewer than two points with S_c > 0)\n"
    _emit(args, _csv(["alpha_sq", "S_c_rel", "V"], rows), summary)
    return EXIT_OK


# --------------------------------------------------------------------------- teleport


def _teleport_point(job):
    V, spec = job
    src_lam, x_a = spec.lam, spec.x_a
    scale = src_lam**2 * x_a
    if scale == 0.0:
        return float("nan")
    a2 = V / scale
    if not 0.0 <= a2 <= 1.0:
        return float("nan")
    if a2 in (0.0, 1.0):
        return 0.0
    return pr.fringe_scan(replace(spec, alpha=math.sqrt(a2))).visibility("A2,B1")


def cmd_teleport(args) -> int:
    """Teleported visibility curves: ideal, noisy model, simulation and classical bound."""
    src = _source(args)
    x_a, x_b = pr.source_weights(src.v_hom_alice, src.v_hom_bob)
    spec = pr.ProtocolSpec(
        pr.TELEPORTATION,
        lam=src.lam,
        x_a=x_a,
        x_b=x_b,
        etas={d: args.eta for d in pr.DETECTOR_IDS[pr.TELEPORTATION]},
        routing=args.routing,
        detector_kind=args.detector_kind,
        high_loss=args.high_loss,
    )
    sims = _map(_teleport_point, [(V, spec) for V in args.v_grid], args.workers)
    rows = []
    for V, sim in zip(args.v_grid, sims):
        if not 0.0 <= V <= 1.0:
            raise DomainError(f"V={V} outside [0, 1]")
        try:
            model = an.teleported_visibility_model(V, src)
        except DomainError:
            model = float("nan")
        rows.append((float(V), an.teleported_visibility_ideal(V, pnr_deterministic=True), model, float(sim), an.classical_bound(V)))
    header = ["V", "V_T_ideal", "V_T_model", "V_T_simulated", "classical_bound"]
    summary = (
        f"source: lambda={src.lam!r} v_hom_alice={src.v_hom_alice!r} v_hom_bob={src.v_hom_bob!r}\n"
        f"simulation: routing={args.routing} detectors={args.detector_kind} high_loss={args.high_loss} eta={args.eta!r}\n"
    )
    _emit(args, _csv(header, rows), summary)
    return EXIT_OK


# --------------------------------------------------------------------------- swap


def _format_solution(tag: str, s: an.SwapSolution) -> str:
    return (
        f"  {tag}: x={s.x:.6f} y={s.y:.6f} z={s.z:.6f} w={s.w:.6f} "
        f"R4={s.R4:.6f} R5={s.R5:.6f} v_hom={s.v_hom:.6f}\n"
    )


def cmd_swap(args) -> int:
    """Forward swap visibilities and, given measurements, the inverse parameter recovery."""
    params = an.SwapParams(args.R2, args.R3, args.R4, args.R5, args.m)
    forward = an.swap_visibilities(params)
    rows = [(f"{i},{j}", float(v)) for (i, j), v in forward.items()]
    lines = [f"forward: R2={args.R2} R3={args.R3} R4={args.R4} R5={args.R5} m={args.m}\n"]
    lines += [f"  V{i}{j} = {_fmt(v)}\n" for (i, j), v in forward.items()]
    if args.visibilities:
        measured = label_values(args.visibilities)
        if args.assignment:
            amap = args.assignment
            missing = set(amap.values()) - set(measured)
            if missing:
                raise UsageError(f"assignment names unknown labels {sorted(missing)}")
            order = [amap[k] for k in ("V12", "V13", "V42", "V43")]
            res = an.swap_inverse(*(measured[k] for k in order))
            lines.append("inverse (" + ", ".join(f"{k}={amap[k]}" for k in ("V12", "V13", "V42", "V43")) + ")\n")
            lines.append(f"  t1={res.t1:.6f} t2={res.t2:.6f} t3={res.t3:.6f} degenerate={res.degenerate}\n")
            lines.append(_format_solution("primary", res.primary))
            lines.append(_format_solution("mirror", res.alternative))
        else:
            found = an.swap_permutation_search(measured, physical=False)
            lines.append(f"permutation search over {len(measured)} labels: {len(found)} assignment(s) with a real solution\n")
            if not found:
                lines.append("  no ordering of these visibilities admits a real (x, y, z, w); the data are inconsistent with the model\n")
            for amap, res in found:
                lines.append("  " + ", ".join(f"V{i}{j}={lab}" for (i, j), lab in amap.items()) + "\n")
                lines.append(_format_solution("primary", res.primary))
                lines.append(_format_solution("mirror", res.alternative))
    _emit(args, _csv(["pair", "visibility"], rows), "".join(lines))
    return EXIT_OK


# --------------------------------------------------------------------------- trace / bench


def cmd_trace(args) -> int:
    """One simulated count trace plus both visibility estimates."""
    p = mc.TraceParams(args.n_mean, args.v_true, args.bins, args.phase_process, args.step_sigma, args.seed)
    trace = mc.simulate_trace(p)
    v_var, clamped = mc.estimate_visibility_variance_flagged(trace)
    table = "bin,count\n" + "".join(f"{i},{int(c)}\n" for i, c in enumerate(trace.counts))
    summary = (
        f"minmax = {_fmt(mc.estimate_visibility_minmax(trace))}\n"
        f"variance = {_fmt(v_var)}{' (clamped)' if clamped else ''}\n"
    )
    _emit(args, table, summary)
    return EXIT_OK


def cmd_estimator_bench(args) -> int:
    """Mean and spread of both estimators over many traces per photon number."""
    table = mc.estimator_benchmark(
        args.n_grid,
        args.v_true,
        args.bins,
        args.trials,
        args.seed,
        args.workers,
        args.phase_process,
        args.step_sigma,
    )
    summary = f"{len(table.rows)} rows, seed={args.seed}\n"
    _emit(args, table.to_csv(), summary)
    return EXIT_OK


# --------------------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    """Oracle verification of the closed forms; exit 1 if any check fails."""
    ids = args.formula or list(oracle.FORMULA_IDS)
    if isinstance(ids, str):
        ids = ids.replace(",", " ").split()
    unknown = [i for i in ids if i not in oracle.FORMULA_IDS]
    if unknown:
        raise UsageError(f"unknown formula id(s) {unknown}; known: {', '.join(oracle.FORMULA_IDS)}")
    reports = _map(oracle.verify_formula, ids, args.workers)
    ok = all(r.passed for r in reports)
    _emit(args, oracle.format_reports(reports), f"{'all checks passed' if ok else 'verification FAILED'}\n")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", default=None, help="output CSV path (stdout when omitted)")
    p.add_argument("--config", default=None, help="file of 'key = value' defaults (flags override)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")


def _source_flags(p: argparse.ArgumentParser, lam: float, va: float, vb: float) -> None:
    p.add_argument("--lam", type=float, default=lam, help="source conditional purity lambda")
    p.add_argument("--v-hom-alice", type=float, default=va, help="HOM visibility at Alice")
    p.add_argument("--v-hom-bob", type=float, default=vb, help="HOM visibility at Bob")


def _trace_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v-true", type=float, default=0.9, help="true fringe visibility")
    p.add_argument("--bins", type=int, default=mc.DEFAULT_BINS, help="bins per trace")
    p.add_argument("--phase-process", choices=(mc.RANDOM_WALK, mc.UNIFORM_IID), default=mc.RANDOM_WALK, help="phase model")
    p.add_argument("--step-sigma", type=float, default=mc.DEFAULT_STEP_SIGMA, help="random-walk step (rad/bin)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="singlerail", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("characterize", help=cmd_characterize.__doc__, formatter_class=fmt)
    _common(p)
    p.add_argument("--alpha-sq", type=float_list, default="0:1:11", help="vacuum-population grid (list or start:stop:count)")
    _source_flags(p, 0.98, 0.9055, 0.8987)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("teleport", help=cmd_teleport.__doc__, formatter_class=fmt)
    _common(p)
    p.add_argument("--v-grid", type=float_list, default="0:0.8:9", help="target visibility grid")
    _source_flags(p, 1.0, 1.0, 1.0)
    p.add_argument("--routing", choices=(pr.PROBABILISTIC, pr.DETERMINISTIC), default=pr.PROBABILISTIC, help="routing of input and probe")
    p.add_argument("--detector-kind", choices=("threshold", "pnr"), default="threshold", help="detector type")
    p.add_argument("--high-loss", choices=("none", "all", "probe"), default="all", help="detectors evaluated in the eta->0 limit")
    p.add_argument("--eta", type=float, default=1.0, help="detector efficiency (unused by limit detectors)")
    p.set_defaults(func=cmd_teleport)

    p = sub.add_parser("swap", help=cmd_swap.__doc__, formatter_class=fmt)
    _common(p)
    for name in ("R2", "R3", "R4", "R5"):
        p.add_argument(f"--{name}", type=float, default=0.5, help=f"reflectivity {name}")
    p.add_argument("--m", type=float, default=0.902, help="indistinguishability scale")
    p.add_argument("--visibilities", default=None, help=f"measured label=value list, e.g. {MEASURED_SWAP_EXAMPLE}")
    p.add_argument("--assignment", type=assignment, default=None, help="label permutation V12=..,V13=..,V42=..,V43=.. (search all when omitted)")
    p.set_defaults(func=cmd_swap)

    p = sub.add_parser("trace", help=cmd_trace.__doc__, formatter_class=fmt)
    _common(p)
    p.add_argument("--n-mean", type=float, default=10.0, help="mean photons per bin N")
    _trace_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("estimator-bench", help=cmd_estimator_bench.__doc__, formatter_class=fmt)
    _common(p)
    p.add_argument("--n-grid", type=float_list, default="5,10,50,100", help="photon numbers N")
    p.add_argument("--trials", type=int, default=100, help="traces per N")
    _trace_flags(p)
    p.set_defaults(func=cmd_estimator_bench)

    p = sub.add_parser("verify", help=cmd_verify.__doc__, formatter_class=fmt)
    _common(p)
    p.add_argument("formula", nargs="*", help=f"formula ids (default: all of {', '.join(oracle.FORMULA_IDS)})")
    p.set_defaults(func=cmd_verify)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions if a.option_strings} - {"help", "config"}
        values = read_config(args.config)
        bad = sorted(set(values) - known)
        if bad:
            raise UsageError(f"unknown config key(s): {', '.join(bad)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except (UsageError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    if args.workers < 1:
        sys.stderr.write("error: --workers must be positive\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, DomainError, ConfigError, argparse.ArgumentTypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
