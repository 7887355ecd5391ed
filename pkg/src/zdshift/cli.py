"""Command-line interface.

Exit codes: 0 success or pass, 1 verification / construction failure (a report is
still written), 2 invalid input or configuration. Reports are UTF-8 JSON with a
leading ``"format": 1`` field, written to ``--out`` or standard output.
Diagnostics go to standard error.

Subcommands::

    init           --d D --out FILE                      stage 1 file
    build          STAGE --l --m --dk [--nu --slack --target --budget --seed --fill] --out FILE
    preset         NAME --out DIR                        build a reference schedule
    verify         STAGE_K STAGE_K1                      StageReport
    entropy        STAGE...                              EntropyLedger and schedule check
    lln            --n --eps [--m --c --d --mode]        typical-word fraction
    alphabeta      STAGE... --pattern P [--m]            gap series
    density        --points FILE --window N [--corner]   scanned density estimate
    embed          STAGE... --assignment FILE --points FILE --g0 ... --out FILE
    demo-averages  STAGE... --radius K0 [--points FILE]
    demo-escape    STAGE... [--points FILE --g-points FILE --window N --flip X...]

STAGE... lists stage files 1..K in order. ``--points`` defaults to the squares.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import analysis, construction, demos, embedding, sparse
from .lattice import Box, Sublattice
from .patterns import Pattern, format_pattern, parse_pattern
from .reference import PRESETS


class UsageError(Exception):
    pass


def _emit(obj: dict, out: str | None):
    text = json.dumps(obj, indent=1) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_chain(paths) -> list[construction.Stage]:
    stages = [construction.read_stage(p) for p in paths]
    for i, s in enumerate(stages):
        if s.k != i + 1:
            raise UsageError(f"{paths[i]} holds stage {s.k}; expected stage files 1..K in order")
    return stages


def _points(args, d: int, limit: int) -> sparse.SparseSet:
    if args.points:
        return sparse.read_sparse(args.points, d)
    if d != 1:
        raise UsageError("--points is required when d > 1")
    return sparse.squares(limit)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_init(args) -> int:
    construction.write_stage(construction.init_stage(args.d), args.out)
    return 0


def _params(args) -> construction.StageParams:
    fill_values = tuple(int(ch) for ch in args.fill_values) if args.fill_values else None
    return construction.StageParams(
        l=args.l, m_next=args.m, d_tol=Fraction(args.dk), nu=Fraction(args.nu), target=args.target,
        budget=args.budget, seed=args.seed, slack=Fraction(args.slack), fill=args.fill, fill_values=fill_values,
    )


def cmd_build(args) -> int:
    stage = construction.read_stage(args.stage)
    try:
        nxt = construction.build_next(stage, _params(args), workers=args.workers)
    except construction.UnsatisfiableStageError as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        _emit({"format": 1, "built": False, "reason": str(exc)}, None)
        return 1
    construction.write_stage(nxt, args.out)
    rec = nxt.history[-1]
    print(f"stage {nxt.k}: n={nxt.n}, {rec.accepted} patterns, {rec.draws} draws, "
          f"{rec.admissible} admissible, complete={rec.complete}", file=sys.stderr)
    return 0 if rec.complete else 1


def cmd_preset(args) -> int:
    cfg = PRESETS[args.name]
    os.makedirs(args.out, exist_ok=True)
    stage = construction.init_stage(cfg.d)
    construction.write_stage(stage, os.path.join(args.out, "stage1.json"))
    for p in cfg.params:
        try:
            stage = construction.build_next(stage, p, workers=args.workers)
        except construction.UnsatisfiableStageError as exc:
            print(f"build failed: {exc}", file=sys.stderr)
            return 1
        construction.write_stage(stage, os.path.join(args.out, f"stage{stage.k}.json"))
    return 0


def cmd_verify(args) -> int:
    s_k = construction.read_stage(args.stage_k)
    s_next = construction.read_stage(args.stage_next)
    try:
        rep = construction.verify_stage_pair(s_k, s_next)
    except construction.StagePairError as exc:
        raise UsageError(str(exc)) from exc
    _emit(rep.to_dict(), args.out)
    if not rep.passed:
        print(f"verification failed: {rep.counterexamples[0]}", file=sys.stderr)
        return 1
    return 0


def cmd_entropy(args) -> int:
    stages = _load_chain(args.stages)
    ledger = analysis.entropy_bounds(stages)
    obj = ledger.to_dict()
    obj["schedule"] = [e.to_dict() for e in analysis.schedule_check(stages)]
    _emit(obj, args.out)
    return 0


def cmd_lln(args) -> int:
    res = analysis.lln_fraction(args.n, Fraction(args.eps), Sublattice(args.d, args.m), args.c,
                                args.mode.upper(), trials=args.trials, seed=args.seed)
    if isinstance(res, Fraction):
        obj = {"format": 1, "mode": "EXHAUSTIVE", "fraction": str(res), "value": float(res)}
    else:
        obj = {"format": 1, "mode": "MONTECARLO", "value": res.value, "stderr": res.stderr, "trials": res.trials}
    _emit(obj, args.out)
    return 0


def _pattern_arg(text: str, d: int) -> Pattern:
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            return parse_pattern(fh.read())
    if d != 1 or text.strip("01"):
        raise UsageError("--pattern takes a 0/1 string (d = 1) or a pattern text file")
    return Pattern.from_string(text)


def cmd_alphabeta(args) -> int:
    stages = _load_chain(args.stages)
    b = _pattern_arg(args.pattern, stages[0].d)
    rep = analysis.gap_series(stages, b, Sublattice(stages[0].d, args.m))
    _emit(rep.to_dict(), args.out)
    return 1 if any(e.flagged for e in rep.entries) else 0


def cmd_density(args) -> int:
    P = sparse.read_sparse(args.points, args.d)
    window = Box.cube(P.d, args.window, args.corner)
    est = sparse.banach_density(P, window, grid=args.grid, min_side=args.min_side)
    _emit({"format": 1, "estimate": str(est), "value": float(est), "window": [list(window.corner), list(window.shape)]},
          args.out)
    return 0


def cmd_embed(args) -> int:
    stages = _load_chain(args.stages)
    k = args.k or len(stages)
    d = stages[0].d
    if len(args.g0) != d:
        raise UsageError(f"--g0 needs {d} coordinates")
    P = _points(args, d, abs(args.g0[0]) + stages[k - 1].n)
    with open(args.assignment, encoding="utf-8") as fh:
        a = embedding.parse_assignment(fh.read(), args.g0)
    try:
        w = embedding.embed(stages, k, a, P)
    except embedding.EmbeddingError as exc:
        print(f"embedding failed: {exc}", file=sys.stderr)
        return 1
    text = format_pattern(Pattern(w.values, tuple(args.g0)))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_demo_averages(args) -> int:
    stages = _load_chain(args.stages)
    P = _points(args, stages[0].d, stages[-1].n)
    try:
        rep = demos.demo_divergence(stages, P, args.radius)
    except embedding.EmbeddingError as exc:
        print(f"demo failed: {exc}", file=sys.stderr)
        return 1
    _emit(rep.to_dict(), args.out)
    return 0 if rep.verified else 1


def cmd_demo_escape(args) -> int:
    stages = _load_chain(args.stages)
    d = stages[0].d
    n = stages[-1].n
    if args.points:
        P = sparse.read_sparse(args.points, d)
    elif d == 1:
        P = sparse.polynomial_orbit([[0, 0, 1]], (1, int(n ** 0.5) + 2))
    else:
        raise UsageError("--points is required when d > 1")
    if args.g_points:
        G = sparse.read_sparse(args.g_points, d)
    else:
        G = sparse.SparseSet(d, [(2 ** j,) + (0,) * (d - 1) for j in range(1, n.bit_length(), 2)])
        G = G.difference(P)
    window = Box.cube(d, args.window, -(args.window // 2)) if args.window else None
    try:
        rep = demos.demo_escape(stages, P, G, window, flip=tuple(args.flip) if args.flip else None)
    except embedding.EmbeddingError as exc:
        print(f"demo failed: {exc}", file=sys.stderr)
        return 1
    _emit(rep.to_dict(), args.out)
    return 0 if rep.verified else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zdshift", description="Finite-stage Z^d subshift construction and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write the stage-1 file")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("build", help="build the next stage")
    p.add_argument("stage")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--dk", required=True)
    p.add_argument("--nu", default="1/10")
    p.add_argument("--slack", default="1/2")
    p.add_argument("--target", type=int, default=40)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fill", choices=[f.value for f in construction.FillRule], default="ALL_ZERO")
    p.add_argument("--fill-values", help="0/1 string for EXPLICIT fill")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("preset", help="build a reference schedule into a directory")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("verify", help="verify a consecutive stage pair")
    p.add_argument("stage_k")
    p.add_argument("stage_next")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("entropy", help="entropy ledger and schedule check")
    p.add_argument("stages", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("lln", help="fraction of typical words")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--mode", choices=["exhaustive", "montecarlo", "EXHAUSTIVE", "MONTECARLO"], default="exhaustive")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lln)

    p = sub.add_parser("alphabeta", help="alpha/beta gap series")
    p.add_argument("stages", nargs="+")
    p.add_argument("--pattern", required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_alphabeta)

    p = sub.add_parser("density", help="scanned upper Banach density estimate")
    p.add_argument("--points", required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--corner", type=int, default=0)
    p.add_argument("--grid", type=int, default=1)
    p.add_argument("--min-side", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("embed", help="write an assignment into a level-k word")
    p.add_argument("stages", nargs="+")
    p.add_argument("--assignment", required=True)
    p.add_argument("--points")
    p.add_argument("--g0", type=int, nargs="+", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("demo-averages", help="divergent sparse averages")
    p.add_argument("stages", nargs="+")
    p.add_argument("--radius", type=int, required=True, help="preserved radius k0")
    p.add_argument("--points")
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_averages)

    p = sub.add_parser("demo-escape", help="escape-point witness")
    p.add_argument("stages", nargs="+")
    p.add_argument("--points")
    p.add_argument("--g-points")
    p.add_argument("--window", type=int, help="side of a window centered on the origin")
    p.add_argument("--flip", type=int, nargs="+", help="G point flipped in a second word")
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_escape)
    return ap


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"zdshift {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
