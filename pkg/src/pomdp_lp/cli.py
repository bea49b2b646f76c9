"""Command-line front end: ``pomdp-lp {generate,solve,simulate,exact,bench}``.

Exit codes: 0 success, 1 input/output or data error, 2 usage error,
3 infeasible model, 4 search space too large for an exact oracle,
5 time limit reached without any incumbent.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from .errors import InvalidInstance, ProductTooLarge, SearchSpaceTooLarge
from .model import (
    DecomposablePomdp,
    atomic_write_text,
    compose,
    count_deterministic_policies,
    generate_random_decomposable,
    generate_random_instance,
    instance_to_json,
    load_instance,
)

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_GUARD, EXIT_NO_INCUMBENT = 0, 1, 2, 3, 4, 5


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("expected a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output file (written atomically)")
    common.add_argument("--time-limit", type=_positive_float, default=None, help="seconds")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    parser = argparse.ArgumentParser(prog="pomdp-lp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a random instance")
    g.add_argument("--states", type=_positive_int, required=True)
    g.add_argument("--obs", type=_positive_int, required=True)
    g.add_argument("--actions", type=_positive_int, required=True)
    g.add_argument("--horizon", type=_positive_int, required=True)
    g.add_argument("--components", type=_positive_int, default=None,
                   help="number of components; writes a decomposable instance")

    s = sub.add_parser("solve", parents=[common], help="solve the MILP, its relaxation or the fluid LP")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--mode", choices=["milp", "relax", "fluid"], required=True)
    s.add_argument("--cuts", action="store_true", help="add the valid equalities")
    s.add_argument("--initial-obs", help="comma-separated 1-based observation per component (fluid)")
    s.add_argument("--timing", action="store_true", help="include wall time in the CSV")

    m = sub.add_parser("simulate", parents=[common], help="Monte-Carlo evaluation of a heuristic")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--heuristic", choices=["alg1", "greedy"], required=True)
    m.add_argument("--scenarios", type=int, required=True)
    m.add_argument("--fixed-window", type=_positive_int, default=None)
    m.add_argument("--cuts", action="store_true", help="solve the rolling LPs with the valid equalities")
    m.add_argument("--unconditioned-bound", action="store_true",
                   help="compute z_M without conditioning on the first observation")
    m.add_argument("--timing", action="store_true", help="fill the timing column")

    e = sub.add_parser("exact", parents=[common], help="exact oracle values")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--mode", choices=["bruteforce", "perfect-recall", "mdp", "all"], required=True)

    b = sub.add_parser("bench", parents=[common], help="run an experiment table")
    b.add_argument("table", choices=["table1", "table2"])
    b.add_argument("--spec", required=True, help="experiment spec JSON")
    b.add_argument("--timing", action="store_true", help="fill the timing columns")
    return parser


def _emit(args, text):
    if not args.quiet:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _write(path, text):
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write {path}: {exc}") from None


def _load(path):
    try:
        return load_instance(path)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise _Fail(EXIT_IO, f"invalid instance file {path}: {exc}") from None


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def cmd_generate(args):
    if args.components is None:
        obj = generate_random_instance(args.seed, args.states, args.obs, args.actions, args.horizon)
        joint_obs = args.obs
    else:
        obj = generate_random_decomposable(args.seed, args.components, args.states, args.obs,
                                           args.actions, args.horizon)
        joint_obs = args.obs ** args.components
    text = json.dumps(instance_to_json(obj), indent=1) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    _, exp10 = count_deterministic_policies(joint_obs, args.actions, args.horizon)
    _emit(args, f"policies ≈ 10^{exp10}")
    return EXIT_OK


def _parse_initial_obs(text, dec):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise _Fail(EXIT_USAGE, f"--initial-obs must be comma-separated integers, got {text!r}") from None
    if len(parts) != dec.num_components:
        raise _Fail(EXIT_USAGE, f"--initial-obs needs {dec.num_components} entries")
    for m, (o, c) in enumerate(zip(parts, dec.components)):
        if not 1 <= o <= c.num_observations:
            raise _Fail(EXIT_USAGE, f"observation {o} out of range 1..{c.num_observations} for component {m + 1}")
    return tuple(o - 1 for o in parts)


def _result_csv(fields: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(fields))
    w.writerow([_fmt(v) for v in fields.values()])
    return buf.getvalue()


def cmd_solve(args):
    from .fluid import solve_fluid
    from .pomdp_milp import solve_pomdp_milp, solve_relaxation

    obj = _load(args.inp)
    time_limit = args.time_limit if args.time_limit is not None else math.inf
    if args.mode == "fluid":
        if not isinstance(obj, DecomposablePomdp):
            raise _Fail(EXIT_USAGE, "mode fluid needs a decomposable instance file (kind 'pomdp' given)")
        obs = _parse_initial_obs(args.initial_obs, obj) if args.initial_obs else None
        try:
            rep = solve_fluid(obj, args.cuts, obs)
        except InvalidInstance as exc:
            raise _Fail(EXIT_USAGE, str(exc)) from None
        fields = {"mode": "fluid", "cuts": int(args.cuts), "status": "Optimal",
                  "objective": rep.objective, "time_s": rep.wall_time if args.timing else ""}
    else:
        if args.initial_obs:
            raise _Fail(EXIT_USAGE, "--initial-obs applies to mode fluid only")
        inst = compose(obj) if isinstance(obj, DecomposablePomdp) else obj
        if args.mode == "relax":
            z, _ = solve_relaxation(inst, args.cuts)
            fields = {"mode": "relax", "cuts": int(args.cuts), "status": "Optimal", "objective": z}
        else:
            res = solve_pomdp_milp(inst, args.cuts, time_limit).result
            if res.status == "Infeasible":
                raise _Fail(EXIT_INFEASIBLE, "MILP is infeasible (this indicates a data error)")
            final = res.final_gap_percent
            fields = {"mode": "milp", "cuts": int(args.cuts), "status": res.status,
                      "objective": res.objective, "bound": res.best_bound,
                      "root_bound": res.root_bound, "int_gap_pct": res.integrality_gap_percent,
                      "final_gap_pct": "Opt" if final <= 1e-4 else final, "nodes": res.node_count,
                      "time_s": res.wall_time if args.timing else ""}
            if not res.has_incumbent:
                _emit(args, _summary(fields))
                raise _Fail(EXIT_NO_INCUMBENT, "time limit reached without an incumbent")
    _emit(args, _summary(fields))
    if args.out:
        _write(args.out, _result_csv(fields))
    return EXIT_OK


def _summary(fields):
    return "\n".join(f"{k}: {_fmt(v)}" for k, v in fields.items() if v != "")


def cmd_simulate(args):
    from .simulate import BoundCache, SolveOptions, monte_carlo
    from .fluid import single_component

    if args.scenarios < 1:
        raise _Fail(EXIT_USAGE, "--scenarios must be >= 1")
    obj = _load(args.inp)
    dec = obj if isinstance(obj, DecomposablePomdp) else single_component(obj)
    opts = SolveOptions(with_cuts=args.cuts, fixed_window=args.fixed_window)
    bounds = BoundCache(dec, condition=not args.unconditioned_bound)
    rep = monte_carlo(dec, args.heuristic, args.scenarios, args.seed, opts, bounds=bounds)
    text = rep.to_csv(timing=args.timing)
    if args.out:
        _write(args.out, text)
    elif not args.quiet:
        sys.stdout.write(text)
    line = (f"heuristic {rep.heuristic}: scenarios {len(rep.scenarios)}, mean reward "
            f"{rep.mean_reward!r}, average gap {rep.average_gap_percent!r}%")
    if rep.nonpositive_bounds:
        line += f", excluded (bound <= 0) {rep.nonpositive_bounds}"
    if args.timing:
        line += f", mean step {rep.mean_step_seconds!r}s"
    _emit(args, line)
    return EXIT_OK


def cmd_exact(args):
    from .oracle import brute_force_memoryless, mdp_value, perfect_recall_value

    obj = _load(args.inp)
    try:
        inst = compose(obj) if isinstance(obj, DecomposablePomdp) else obj
    except ProductTooLarge as exc:
        raise _Fail(EXIT_GUARD, str(exc)) from None
    try:
        if args.mode == "bruteforce":
            v, pol = brute_force_memoryless(inst)
            lines = [f"bruteforce: {v!r}", f"policy: {json.dumps(pol.actions().tolist())}"]
        elif args.mode == "perfect-recall":
            lines = [f"perfect-recall: {perfect_recall_value(inst)!r}"]
        elif args.mode == "mdp":
            lines = [f"mdp: {mdp_value(inst)!r}"]
        else:
            from .pomdp_milp import solve_pomdp_milp, solve_relaxation

            v, _ = brute_force_memoryless(inst)
            pr = perfect_recall_value(inst)
            z = solve_pomdp_milp(inst).result.objective
            zlr, _ = solve_relaxation(inst)
            ok = z <= pr + 1e-6 and pr <= zlr + 1e-6
            lines = [f"bruteforce: {v!r}", f"milp: {z!r}", f"perfect-recall: {pr!r}",
                     f"relaxation: {zlr!r}", f"mdp: {mdp_value(inst)!r}",
                     f"chain z* <= v_PR <= z_LR: {'holds' if ok else 'VIOLATED'}"]
    except SearchSpaceTooLarge as exc:
        raise _Fail(EXIT_GUARD, str(exc)) from None
    text = "\n".join(lines) + "\n"
    _emit(args, text)
    if args.out:
        _write(args.out, text)
    return EXIT_OK


def cmd_bench(args):
    from .bench import TABLE1_COLUMNS, TABLE2_COLUMNS, ExperimentSpec, rows_to_csv, run_table1, run_table2

    try:
        spec = ExperimentSpec.load(args.spec)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {args.spec}: {exc}") from None
    except (ValueError, TypeError) as exc:
        raise _Fail(EXIT_USAGE, f"invalid experiment spec: {exc}") from None
    if args.time_limit is not None:
        spec.time_limit = args.time_limit
    if args.table == "table1":
        text = rows_to_csv(run_table1(spec, args.timing), TABLE1_COLUMNS)
    else:
        text = rows_to_csv(run_table2(spec, args.timing), TABLE2_COLUMNS)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "simulate": cmd_simulate,
            "exact": cmd_exact, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        print(f"pomdp-lp {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
