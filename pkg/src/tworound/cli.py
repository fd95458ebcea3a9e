"""Command-line interface for the two-round auction toolkit.

Subcommands: ``validate``, ``check-dsic``, ``analyze-ne``, ``simulate`` and
``reproduce``.  Exit codes: 0 success, 1 usage/parse error, 2 schema or
invariant violation, 3 negative analytic verdict (mechanism not DSIC, or no
equilibrium found).  Errors are emitted as single JSON lines on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import equilibrium, experiments
from .dsic import ResourceLimitError, check_dsic, find_deviation
from .engine import BidProfile, ConfigurationError, Mechanism, simulate_run
from .equilibrium import (
    DegenerateRatioError,
    N12_ORDERINGS,
    N12Params,
    n11_classify,
    n11_revenue,
    n12_check_rank,
)
from .secondround import ContractViolation
from .selection import ExclusionY, SelectionError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_NEGATIVE = 3

SEED_ENV_VAR = "TWOROUND_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        _error("usage", message)
        raise SystemExit(EXIT_USAGE)


def _error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else experiments.DEFAULT_SEED


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON in {path}: {exc}") from exc


class SchemaError(ValueError):
    pass


def _load_mechanism(path: str) -> Mechanism:
    doc = _load_json(path)
    try:
        return Mechanism.from_json_dict(doc)
    except (SelectionError, ConfigurationError, ContractViolation, ValueError) as exc:
        raise SchemaError(f"invalid mechanism in {path}: {exc}") from exc


def _load_vector(path: str, key: str) -> list[float]:
    doc = _load_json(path)
    if isinstance(doc, dict):
        doc = doc.get(key)
    if not isinstance(doc, list) or not all(isinstance(x, (int, float)) for x in doc):
        raise SchemaError(f"{path}: expected a list of numbers (or {{\"{key}\": [...]}})")
    return [float(x) for x in doc]


def _load_bids(path: str) -> BidProfile:
    doc = _load_json(path)
    try:
        return BidProfile(tuple(doc["first_round"]), tuple(doc["second_round"]))
    except (KeyError, TypeError, ConfigurationError) as exc:
        raise SchemaError(f"invalid bid profile in {path}: {exc}") from exc


def _parse_grid(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise SchemaError(f"grid must look like start:stop:step, got {spec!r}") from exc
    if step <= 0 or stop < start:
        raise SchemaError(f"bad grid bounds {spec!r}")
    return list(np.arange(start, stop + step / 2, step))


def _cmd_validate(args) -> int:
    checked = []
    if args.mechanism:
        _load_mechanism(args.mechanism)
        checked.append("mechanism")
    if args.values:
        vals = _load_vector(args.values, "values")
        if any(v < 0 for v in vals):
            raise SchemaError("values must be nonnegative")
        checked.append("values")
    if args.Y:
        try:
            ExclusionY(tuple(_load_vector(args.Y, "Y")))
        except SelectionError as exc:
            raise SchemaError(f"invalid exclusion vector: {exc}") from exc
        checked.append("Y")
    if args.bids:
        _load_bids(args.bids)
        checked.append("bids")
    if not checked:
        raise SchemaError("nothing to validate: pass --mechanism/--values/--Y/--bids")
    print(json.dumps({"valid": True, "checked": checked}))
    return EXIT_OK


def _cmd_check_dsic(args) -> int:
    mech = _load_mechanism(args.mechanism)
    verdict = check_dsic(mech)
    doc = verdict.to_json_dict()
    if args.oracle:
        grid = _parse_grid(args.grid)
        try:
            witness = find_deviation(mech, grid, n=args.n)
        except ResourceLimitError as exc:
            raise SchemaError(str(exc)) from exc
        doc["oracle_witness_found"] = witness is not None
        if witness is not None:
            doc["oracle_witness"] = {
                "value": witness.value,
                "first_round_bid": witness.first_round_bid,
                "second_round_bid": witness.second_round_bid,
                "opponent_bids": list(witness.opponent_bids),
                "gain": witness.gain,
                "family": witness.family,
            }
    print(json.dumps(doc))
    return EXIT_OK if verdict.is_dsic else EXIT_NEGATIVE


def _cmd_analyze_ne(args) -> int:
    values = _load_vector(args.values, "values")
    y_vec = _load_vector(args.Y, "Y")
    if args.mode == "n11":
        if len(values) < 3:
            raise SchemaError("n11 analysis needs at least three values")
        try:
            Y = ExclusionY(tuple(y_vec))
            cls = n11_classify(values[0], values[1], values[2], Y)
        except (SelectionError, DegenerateRatioError, ValueError) as exc:
            raise SchemaError(str(exc)) from exc
        doc = cls.to_json_dict()
        if cls.truthful_ne:
            doc["truthful_revenue"] = n11_revenue("truthful", *values[:3], Y)
        if cls.risky_ne:
            doc["risky_revenue"] = n11_revenue("risky", *values[:3], Y)
        print(json.dumps(doc))
        return EXIT_OK if (cls.truthful_ne or cls.risky_ne) else EXIT_NEGATIVE
    # n12
    if len(values) != 5:
        raise SchemaError("n12 analysis needs exactly five values")
    overrides = {}
    if args.b2 is not None:
        overrides["b2"] = args.b2
    if args.b3 is not None:
        overrides["b3"] = args.b3
    try:
        params = N12Params(tuple(values), tuple(y_vec), args.x2, overrides)
        reports = [n12_check_rank(params, ordering) for ordering in N12_ORDERINGS]
    except (ValueError, equilibrium.FormulaDomainError) as exc:
        raise SchemaError(str(exc)) from exc
    doc = {"mode": "n12", "x2": args.x2, "ranks": [r.to_json_dict() for r in reports]}
    print(json.dumps(doc))
    return EXIT_OK if any(r.is_ne for r in reports) else EXIT_NEGATIVE


def _cmd_simulate(args) -> int:
    mech = _load_mechanism(args.mechanism)
    bids = _load_bids(args.bids)
    rng = np.random.default_rng(args.seed)
    results = []
    for _ in range(args.runs):
        res = simulate_run(mech, bids, rng)
        results.append(
            {
                "subset": list(res.realized_subset),
                "winner_bidder": res.realized_winner,
                "payment": res.realized_payment,
            }
        )
    print(json.dumps({"runs": results}))
    return EXIT_OK


GAP_VALUATIONS = ((450, 350, 200), (450, 400, 200), (450, 425, 200), (450, 440, 200))
THETA_VALUATION = (450, 400, 200)


def _cmd_reproduce(args) -> int:
    if args.table == 2:
        config = experiments.ExperimentConfig(
            valuations=GAP_VALUATIONS, thetas=(3,), draws=args.draws, seed=args.seed
        )
        rows = experiments.run_gap_experiment(config)
    elif args.table == 3:
        config = experiments.ExperimentConfig(
            valuations=(THETA_VALUATION,),
            thetas=(3, 4, 5, 6),
            draws=args.draws,
            seed=args.seed,
        )
        rows = experiments.run_theta_experiment(config)
    else:
        config = experiments.ExperimentConfig(
            thetas=(3, 4, 5, 6),
            draws=args.draws,
            n_valuations=args.n_valuations,
            seed=args.seed,
        )
        rows = experiments.run_random_valuation_experiment(config)
    if args.out:
        experiments.write_rows_csv(rows, args.out)
    writer = [experiments.CSV_COLUMNS] + [experiments.rows_to_record(r) for r in rows]
    for record in writer:
        print(",".join(str(c) for c in record))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tworound", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate input documents")
    p.add_argument("--mechanism")
    p.add_argument("--values")
    p.add_argument("--Y")
    p.add_argument("--bids")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("check-dsic", help="closed-form DSIC verdict, optional oracle")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--grid", default="0:8:1")
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=_cmd_check_dsic)

    p = sub.add_parser("analyze-ne", help="classify Nash equilibria")
    p.add_argument("--mode", choices=("n11", "n12"), required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--Y", required=True)
    p.add_argument("--x2", type=float, default=0.25)
    p.add_argument("--b2", type=float, default=None)
    p.add_argument("--b3", type=float, default=None)
    p.set_defaults(func=_cmd_analyze_ne)

    p = sub.add_parser("simulate", help="sampled single runs of a mechanism")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--bids", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--runs", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reproduce", help="run a revenue experiment table")
    p.add_argument("--table", type=int, choices=(2, 3, 4), required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--n-valuations", type=int, default=1_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SchemaError as exc:
        _error("schema", str(exc))
        return EXIT_SCHEMA
    except (SelectionError, ConfigurationError, ContractViolation, ValueError) as exc:
        _error("invariant", str(exc))
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
