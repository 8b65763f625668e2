"""Module to expose the scl computations on the command line.

    Exit codes: 0 success, 1 failed certification, 2 malformed input,
    3 nonzero t-homology, 4 resource ceiling or exhausted piece bound,
    5 internal failure.
"""

import json
import sys
from argparse import ArgumentParser, Namespace
from contextlib import contextmanager
from logging import DEBUG, INFO, error, getLogger, info
from pathlib import Path
from time import perf_counter
from typing import Optional, Sequence

from tabulate import tabulate

from code.bs_words import Chain, GroupParams, chain_to_string, parse_chain
from code.constants import (
    COSTS_PATH,
    DEFAULT_MAX_TURNS,
    DEFAULT_POWER_BOUND,
    DEFAULT_SETUP,
    DEFAULT_SOLVER,
    MAX_DV,
    SOLVER_TAGS,
    SWEEP_WORKERS,
)
from code.encoding import winding_context
from code.exact_lp import dump_model
from code.exceptions import GluingConditionError, InputError, ResourceLimitError
from code.extremal import check_reducedness, extremal_verdict, sufficient_extremal_check
from code.formulas import FORMULA_NAMES, builtin_cost_table, evaluate_formula
from code.helpers import format_fraction, fraction_to_json, parse_fraction
from code.solver_block import (
    CostTable,
    SclResult,
    SolverOptions,
    build_block_lp,
    build_winding_lp,
    load_cost_table,
    verify_turn_costs,
)
from code.solver_pieces import (
    PieceSolution,
    build_piece_lp,
    cached_scl,
    export_surface,
    scl_pieces_escalating,
)
from code.sweep import parse_d_range, surgery_sweep


EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_INPUT = 2
EXIT_OBSTRUCTED = 3
EXIT_RESOURCE = 4
EXIT_INTERNAL = 5

OBSTRUCTED_MESSAGE = "scl undefined/infinite: nonzero t-homology"
BUILTIN_COSTS = ("eg2", "eg2_uniform", "eg3")


# --------------------------------------------------------------------- #
#                               PARSER                                  #
# --------------------------------------------------------------------- #
def _add_group(parser: ArgumentParser):
    parser.add_argument("--M", type=int, required=True, help="exponent M in a^M = t a^L t^-1")
    parser.add_argument("--L", type=int, required=True, help="exponent L in a^M = t a^L t^-1")


def _add_solver(parser: ArgumentParser):
    parser.add_argument("--solver", choices=SOLVER_TAGS, default=DEFAULT_SOLVER)
    parser.add_argument("--max-turns", type=int, default=DEFAULT_MAX_TURNS,
                        help="first turn bound of the piece oracle, doubled until its optimum is certified")
    parser.add_argument("--setup", type=int, choices=(1, 2), default=DEFAULT_SETUP)
    parser.add_argument("--max-dv", type=int, default=MAX_DV, help="ceiling on |D_v|")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="bs-scl", description="Exact stable commutator length in Baumslag-Solitar groups"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr, twice for debug output")
    commands = parser.add_subparsers(dest="command", required=True)

    scl_parser = commands.add_parser("scl", help="compute scl of a chain")
    _add_group(scl_parser)
    scl_parser.add_argument("chain", help="chain such as '1/2 atAT + at^2At^-2'")
    _add_solver(scl_parser)
    scl_parser.add_argument("--json", action="store_true", help="print the JSON report")
    scl_parser.add_argument("--extremal", action="store_true", help="add the extremal verdict")
    scl_parser.add_argument("--certify", action="store_true", help="add the optimality check")
    scl_parser.add_argument("--export", type=Path, help="write the admissible surface as JSON")
    scl_parser.add_argument("--dump-lp", type=Path, help="write the solved LP in text form")
    scl_parser.add_argument("--timing", action="store_true", help="report the solve time")

    formula_parser = commands.add_parser("formula", help="evaluate a closed-form value")
    _add_group(formula_parser)
    formula_parser.add_argument("name", choices=FORMULA_NAMES)
    formula_parser.add_argument("--k", type=int, help="exponent k of the eg1 chain")

    sweep_parser = commands.add_parser("sweep", help="sweep scl over BS(d m, d l)")
    sweep_parser.add_argument("--m", type=int, required=True)
    sweep_parser.add_argument("--l", dest="ell", type=int, required=True)
    sweep_parser.add_argument("--d", dest="d_range", required=True, help="e.g. 2..6 or 1,3,5")
    sweep_parser.add_argument("chain", help="chain, possibly containing {d}")
    _add_solver(sweep_parser)
    sweep_parser.add_argument("--workers", type=int, default=SWEEP_WORKERS)
    sweep_parser.add_argument("--limit", help="known limit value for the gap column")
    sweep_parser.add_argument("--json", action="store_true", help="print JSON instead of CSV")
    sweep_parser.add_argument("--table", action="store_true", help="print a table instead of CSV")
    sweep_parser.add_argument("--output", type=Path, help="write the report to this file")

    extremal_parser = commands.add_parser("extremal", help="decide whether scl is extremal")
    _add_group(extremal_parser)
    extremal_parser.add_argument("chain")
    _add_solver(extremal_parser)
    extremal_parser.add_argument("--power-bound", type=int, default=DEFAULT_POWER_BOUND)
    extremal_parser.add_argument("--json", action="store_true")

    certify_parser = commands.add_parser("certify", help="check a turn cost lower bound")
    _add_group(certify_parser)
    certify_parser.add_argument("chain")
    certify_parser.add_argument("--costs", required=True,
                                help=f"cost table JSON file or one of {BUILTIN_COSTS}")
    certify_parser.add_argument("--bound", type=int,
                                help="largest number of turns of the checked pieces, all when omitted")
    certify_parser.add_argument("--setup", type=int, choices=(1, 2), default=DEFAULT_SETUP)
    certify_parser.add_argument("--json", action="store_true")
    return parser


@contextmanager
def reading_input():
    """Turns the ValueErrors raised while arguments and files are read into
    InputErrors."""
    try:
        yield
    except (InputError, GluingConditionError):
        raise
    except (ValueError, KeyError, OSError) as err:
        raise InputError(str(err)) from err


def _options(args: Namespace) -> SolverOptions:
    with reading_input():
        return SolverOptions(
            solver=args.solver, max_turns=args.max_turns, setup=args.setup, max_dv=args.max_dv
        )


def _print_json(data: dict):
    print(json.dumps(data, indent=2))


# --------------------------------------------------------------------- #
#                              COMMANDS                                 #
# --------------------------------------------------------------------- #
def _group_json(params: GroupParams) -> dict:
    return {"M": params.M, "L": params.L, "d": params.d, "m": params.m, "l": params.ell}


def _result_exit(result: SclResult) -> int:
    if result.infinite:
        return EXIT_OBSTRUCTED
    if result.value is None or result.status == "upper_bound":
        return EXIT_RESOURCE
    return EXIT_OK


def _dump_lp(result: SclResult, chain: Chain, params: GroupParams, pieces, path: Path):
    if result.solver == "block":
        model = build_block_lp(chain, params, winding_context(chain, params))
    elif result.solver == "winding":
        model = build_winding_lp(chain, params, winding_context(chain, params))
    elif result.solver == "pieces" and pieces is not None and pieces.ctx is not None:
        model = build_piece_lp(chain, pieces.ctx, pieces.pieces)
    else:
        info("No LP was solved for this chain, nothing to dump")
        return
    dump_model(model, path)


def cmd_scl(args: Namespace) -> int:
    with reading_input():
        params = GroupParams(args.M, args.L)
        chain = parse_chain(args.chain, params)
    options = _options(args)
    start = perf_counter()
    pieces: Optional[PieceSolution] = None
    if args.solver == "pieces" or args.export or args.extremal:
        pieces = scl_pieces_escalating(chain, params, options)
    result = pieces.result if args.solver == "pieces" else cached_scl(chain, params, options)
    elapsed = int(1000 * (perf_counter() - start))

    if result.infinite:
        print(OBSTRUCTED_MESSAGE)
        return EXIT_OBSTRUCTED

    verdict = None
    if args.extremal:
        verdict = extremal_verdict(chain, params, pieces, options=options)
    if args.export:
        if pieces is None or not pieces.weights:
            info("No piece solution to export: %s", pieces.result if pieces else result)
        else:
            with open(args.export, "w", encoding="utf-8") as outfile:
                json.dump(export_surface(pieces).to_json(), outfile, indent=2)
                outfile.write("\n")
    if args.dump_lp:
        _dump_lp(result, chain, params, pieces, args.dump_lp)

    if args.json:
        report = {
            "group": _group_json(params),
            "chain": chain_to_string(chain),
            "rho": result.rho,
            "Dv": result.Dv_abs,
            "scl": None if result.value is None else fraction_to_json(result.value),
            "status": result.status,
            "solver": result.solver,
            "lp": {
                "vars": result.lp_stats.variables,
                "constraints": result.lp_stats.constraints,
                "pivots": result.lp_stats.pivots,
            },
            "homology_note": result.homology_note,
            "dropped_elliptic": list(chain.dropped_elliptic),
            "extremal": None if verdict is None else verdict.to_json(),
            "timing_ms": elapsed if args.timing else None,
        }
        if args.certify:
            report["verified"] = result.verified
        _print_json(report)
        return _result_exit(result)

    if result.value is None:
        print(result.status)
    elif result.status == "upper_bound":
        print(f"<= {format_fraction(result.value)} (piece bound exhausted)")
    else:
        print(format_fraction(result.value))
    if verdict is not None:
        print(f"extremal: {verdict.status}" + "".join(f"\n  {r}" for r in verdict.reasons))
    if args.certify:
        state = "hold" if result.verified else "were not checked"
        print(f"optimality conditions {state} ({result.solver}, {result.lp_stats.pivots} pivots)")
    if args.timing:
        print(f"time: {elapsed} ms")
    return _result_exit(result)


def cmd_formula(args: Namespace) -> int:
    with reading_input():
        result = evaluate_formula(args.name, GroupParams(args.M, args.L), args.k)
    print(result)
    return EXIT_OK


def cmd_sweep(args: Namespace) -> int:
    with reading_input():
        limit = parse_fraction(args.limit) if args.limit else None
        d_values = parse_d_range(args.d_range)
        GroupParams(args.m, args.ell)
    report = surgery_sweep(
        args.chain,
        args.m,
        args.ell,
        d_values,
        _options(args),
        args.workers,
        limit,
    )
    if args.output:
        if args.json:
            report.write_json(args.output)
        else:
            report.write_csv(args.output)
    elif args.json:
        _print_json(report.to_json())
    elif args.table:
        print(report.table())
    else:
        print(report.csv_text(), end="")
    return EXIT_OK


def cmd_extremal(args: Namespace) -> int:
    with reading_input():
        params = GroupParams(args.M, args.L)
        chain = parse_chain(args.chain, params)
    options = _options(args)
    check = sufficient_extremal_check(chain, params)
    reducedness = check_reducedness(chain, params, args.power_bound, options)
    pieces = scl_pieces_escalating(chain, params, options)
    if pieces.result.infinite:
        print(OBSTRUCTED_MESSAGE)
        return EXIT_OBSTRUCTED
    verdict = extremal_verdict(chain, params, pieces, reducedness, options)
    if args.json:
        _print_json(
            {
                "group": _group_json(params),
                "chain": chain_to_string(chain),
                "sufficient_check": {"passed": check.passed, "reasons": list(check.reasons)},
                "reducedness": {"status": reducedness.status, "detail": str(reducedness)},
                "scl": None if pieces.result.value is None else fraction_to_json(pieces.result.value),
                "extremal": verdict.to_json(),
            }
        )
        return EXIT_OK
    print(f"sufficient check: {check}")
    print(f"reducedness: {reducedness}")
    print(f"scl (pieces, max_turns {pieces.max_turns}): {pieces.result}")
    print(f"extremal: {verdict.status}")
    for reason in verdict.reasons:
        print(f"  {reason}")
    if verdict.surface is not None:
        rows = [
            [len(c.nodes), "yes" if c.balanced else "no", "" if c.s_value is None else str(c.s_value)]
            for c in verdict.surface.components
        ]
        print(tabulate(rows, headers=["pieces", "balanced", "s"]))
    return EXIT_OK


def _cost_table(name: str, params: GroupParams) -> CostTable:
    if name in BUILTIN_COSTS:
        return builtin_cost_table(name, params)
    path = Path(name)
    if not path.exists() and (COSTS_PATH / name).exists():
        path = COSTS_PATH / name
    return load_cost_table(path)


def cmd_certify(args: Namespace) -> int:
    with reading_input():
        params = GroupParams(args.M, args.L)
        chain = parse_chain(args.chain, params)
        table = _cost_table(args.costs, params)
        # a table without a cost for some turn is only noticed here
        certificate = verify_turn_costs(chain, params, table, args.bound, args.setup)
    if certificate.status == "obstructed":
        print(OBSTRUCTED_MESSAGE)
        return EXIT_OBSTRUCTED
    if args.json:
        _print_json(
            {
                "group": _group_json(params),
                "chain": chain_to_string(chain),
                "checked_up_to": certificate.checked_up_to,
                "certified": certificate.certified,
                "kappa_bound": None if certificate.kappa_bound is None else str(certificate.kappa_bound),
                "lower_bound": None if certificate.lower_bound is None else fraction_to_json(certificate.lower_bound),
                "violations": [
                    {"piece": " + ".join(f"{n}{t}" for t, n in piece), "cost": str(cost)}
                    for piece, cost in certificate.violations
                ],
            }
        )
    else:
        print(certificate)
        if certificate.violations:
            rows = [
                [" + ".join(f"{n}{t}" for t, n in piece), format_fraction(cost)]
                for piece, cost in certificate.violations
            ]
            print(tabulate(rows, headers=["piece", "cost"]))
    return EXIT_OK if certificate.certified else EXIT_NOT_CERTIFIED


COMMANDS = {
    "scl": cmd_scl,
    "formula": cmd_formula,
    "sweep": cmd_sweep,
    "extremal": cmd_extremal,
    "certify": cmd_certify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        getLogger().setLevel(DEBUG if args.verbose > 1 else INFO)
    try:
        return COMMANDS[args.command](args)
    except ResourceLimitError as err:
        print(f"resource limit: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as err:
        error("%s failed: %s", args.command, err, exc_info=True)
        print(f"internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
