"""Batch experiment driver.

Subcommands: scheme, simulate, eliminate, check-sybil, bounds, lp-oracle,
custody. Exit codes: 0 success, 1 domain error, 2 usage or parameter
error. Every randomized run takes --seed and reproduces byte-identically.

A JSON config file (--config) mirrors the flags; explicit flags override
file values.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import bounds as bounds_mod
from . import custody as custody_mod
from .elimination import (
    EliminationGame,
    clone_cap_elimination,
    iterate_elimination,
    trace_to_jsonl,
)
from .errors import (
    InvalidConfigError,
    InvalidParameterError,
    PreconditionViolatedError,
    RelayGameError,
    SizeLimitError,
)
from .game import full_propagation_profile, simulate_authorization
from .schemes import (
    RewardTable,
    SchemeAssignment,
    check_individual_rationality,
    hybrid_expected_payment,
    make_almost_uniform,
    make_geometric,
    make_hybrid,
    table_from_json,
    table_to_json,
    total_payment,
    uniform_assignment,
)
from .sybil import best_sybil_response, sybil_gain
from .topology import NetworkConfig, build_forest

USAGE_ERRORS = (
    InvalidConfigError,
    InvalidParameterError,
    SizeLimitError,
    PreconditionViolatedError,
)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _decimal_str(x: Fraction, digits: int = 70) -> str:
    """Fixed-point decimal expansion, truncated toward zero."""
    sign = "-" if x < 0 else ""
    x = abs(x)
    scaled = x.numerator * 10**digits // x.denominator
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}".rstrip("0").rstrip(".")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _load_config(args: argparse.Namespace) -> None:
    """Fill argparse defaults from a JSON config; flags keep priority."""
    if not getattr(args, "config", None):
        return
    doc = json.loads(Path(args.config).read_text())
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            if attr in ("beta", "base", "ratio"):
                value = Fraction(str(value))
            setattr(args, attr, value)


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise InvalidParameterError(f"missing required option --{name.replace('_', '-')}")


def _build_table(args: argparse.Namespace) -> RewardTable:
    kind = args.scheme
    if kind == "almost-uniform":
        _require(args, "beta")
        height = args.scheme_height or args.H
        if height is None:
            raise InvalidParameterError("need --scheme-height or --H for the table height")
        return make_almost_uniform(args.beta, height)
    if kind == "geometric":
        _require(args, "base", "ratio")
        height = args.scheme_height or args.H or 32
        return make_geometric(args.base, args.ratio, height)
    raise InvalidParameterError(f"unknown scheme kind {kind!r}")


def _assignment(args: argparse.Namespace, t: int) -> SchemeAssignment:
    if args.scheme == "hybrid":
        _require(args, "a", "b", "d", "H")
        return make_hybrid(args.a, args.b, args.d, args.H)
    return uniform_assignment(_build_table(args), t)


def _add_scheme_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scheme",
        choices=["almost-uniform", "geometric", "hybrid"],
        default=None,
        help="reward scheme kind",
    )
    parser.add_argument("--beta", type=_fraction, default=None, help="per-identity reward")
    parser.add_argument("--base", type=_fraction, default=None, help="geometric base reward")
    parser.add_argument("--ratio", type=_fraction, default=None, help="geometric decay ratio")
    parser.add_argument(
        "--scheme-height", type=int, default=None, help="reward horizon (defaults to H)"
    )
    parser.add_argument("--a", type=int, default=None, help="hybrid group A size")
    parser.add_argument("--b", type=int, default=None, help="hybrid group B size")


def _cmd_scheme(args: argparse.Namespace) -> int:
    if args.scheme == "hybrid":
        _require(args, "a", "b", "d", "H")
        assignment = make_hybrid(args.a, args.b, args.d, args.H)
        expected = hybrid_expected_payment(assignment, args.d, args.H)
        doc = {
            "schema": "relaygame.scheme/1",
            "kind": "hybrid",
            "groups": {"a": len(assignment.group_a), "b": len(assignment.group_b)},
            "warnings": list(assignment.warnings),
            "expected_payment": _frac_str(expected),
            "expected_payment_approx": float(expected),
            "table_a": json.loads(table_to_json(assignment.tables[assignment.group_a[0]])),
            "table_b": json.loads(table_to_json(assignment.tables[assignment.group_b[0]])),
        }
        _write(args.out, json.dumps(doc, sort_keys=True, indent=2))
        return 0
    table = _build_table(args)
    ir = check_individual_rationality(table, table.height)
    doc = {
        "schema": "relaygame.scheme/1",
        "kind": args.scheme,
        "table": json.loads(table_to_json(table)),
        "individually_rational": ir.ok,
        "first_ir_violation": ir.first_violation,
        "total_payments": {
            str(h): _frac_str(total_payment(table, h)) for h in range(1, table.height + 1)
        },
    }
    _write(args.out, json.dumps(doc, sort_keys=True, indent=2))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "t", "d", "H", "scheme", "trials", "seed")
    config = NetworkConfig(t=args.t, d=args.d, H=args.H)
    forest = build_forest(config)
    assignment = _assignment(args, args.t)
    profile = full_propagation_profile(forest)
    result = simulate_authorization(
        forest,
        profile,
        assignment,
        trials=args.trials,
        rng_seed=args.seed,
        external_attempters=args.external or 0,
    )
    rows = [
        (node, result.mean_rewards[node], result.win_frequency(node))
        for node in range(forest.node_count)
    ]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_id", "mean_reward", "win_freq"])
            for node, mean, freq in rows:
                writer.writerow([node, repr(mean), repr(freq)])
    summary = {
        "schema": "relaygame.simulate/1",
        "trials": result.trials,
        "attempters": len(result.attempters),
        "external_attempters": result.external_attempters,
        "total_payment_distribution": {
            _frac_str(value): count
            for value, count in sorted(result.total_payment_distribution.items())
        },
        "mean_reward_sum": sum(result.mean_rewards.values()),
    }
    _write(args.json, json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _cmd_eliminate(args: argparse.Namespace) -> int:
    _require(args, "t", "d", "H", "scheme")
    height = args.scheme_height or args.H
    tree = build_forest(NetworkConfig(t=1, d=args.d, H=args.H))
    if args.scheme != "almost-uniform":
        raise InvalidParameterError("elimination requires an almost-uniform scheme")
    _require(args, "beta", "extra_aware")
    table = make_almost_uniform(args.beta, height)
    game = EliminationGame.from_hypotheses(
        tree, table, seeds=args.t, extra_aware=args.extra_aware
    )
    if args.order == "lemma":
        result = clone_cap_elimination(game)
    else:
        result = iterate_elimination(game, order=args.order, rng_seed=args.seed)
    survivors = {
        str(node): {
            str(level): sorted(list(t) for t in tuples)
            for level, tuples in sorted(levels.items())
        }
        for node, levels in sorted(result.state.surviving.items())
    }
    doc = {
        "schema": "relaygame.eliminate/1",
        "order": args.order,
        "k": game.k,
        "warnings": list(result.warnings),
        "converged_to_full_propagation": result.converged,
        "removals": len(result.trace),
        "survivors": survivors,
    }
    _write(args.survivors, json.dumps(doc, sort_keys=True, indent=2))
    if args.trace:
        _write(args.trace, trace_to_jsonl(result.trace))
    return 0


def _cmd_check_sybil(args: argparse.Namespace) -> int:
    rows: list[tuple[str, str, str, str]] = []
    if args.position is not None:
        _require(args, "chain_length", "clones")
        table = _build_table(args)
        gain = sybil_gain(table, args.position, args.chain_length, args.clones)
        rows.append(
            (
                args.scheme,
                f"position={args.position}",
                f"clones+{args.clones}@h={args.chain_length}",
                _frac_str(gain),
            )
        )
    else:
        _require(args, "t", "d", "H", "max_clones")
        config = NetworkConfig(t=args.t, d=args.d, H=args.H)
        forest = build_forest(config)
        assignment = _assignment(args, args.t)
        profile = full_propagation_profile(forest)
        for node in range(forest.node_count):
            deviation, gain = best_sybil_response(
                forest,
                node,
                profile,
                assignment,
                max_clones=args.max_clones,
                external_attempters=args.external or 0,
            )
            label = (
                "honest"
                if deviation is None
                else f"p+{deviation.pre_auth_added},c+{list(deviation.child_clones_added)}"
            )
            rows.append((args.scheme, str(node), label, _frac_str(gain)))
    lines = ["scheme,node,deviation,gain"]
    lines += [",".join(row) for row in rows]
    _write(args.out, "\n".join(lines))
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    _require(args, "t", "H")
    bound = bounds_mod.dominant_scheme_payment_bound(args.t, args.H)
    doc = {
        "schema": "relaygame.bounds/1",
        "t": args.t,
        "H": args.H,
        "lower": _decimal_str(bound.lower),
        "upper": _decimal_str(bound.upper),
        "approx": float(bound),
        "rational_term": _frac_str(bound.rational_term),
    }
    if args.floor_position is not None:
        floor = bounds_mod.position_reward_floor(args.floor_position, args.t)
        doc["position_reward_floor"] = _frac_str(floor.exact)
    _write(args.out, json.dumps(doc, sort_keys=True, indent=2))
    return 0


def _cmd_lp_oracle(args: argparse.Namespace) -> int:
    _require(args, "height_s", "t")
    result = bounds_mod.min_payment_oracle(
        args.height_s, args.t, objective=args.objective, d=args.d or 3
    )
    doc = {
        "schema": "relaygame.lp-oracle/1",
        "params": dict(result.params),
        "objective": result.objective,
        "value": _frac_str(result.value.exact),
        "value_approx": float(result.value),
        "table": json.loads(table_to_json(result.table)),
    }
    _write(args.out, json.dumps(doc, sort_keys=True, indent=2))
    return 0


def _cmd_custody(args: argparse.Namespace) -> int:
    if args.action == "demo":
        _require(args, "seed", "fee", "beta", "height", "hops")
        signer = custody_mod.KeyedHashSigner(seed=args.seed)
        payer = signer.generate_keypair()
        payee = signer.generate_keypair()
        seed_key = signer.generate_keypair()
        record = custody_mod.init_transaction(
            payer,
            payee.public,
            amount=args.amount or 0,
            fee=args.fee,
            beta=args.beta,
            height=args.height,
            seeds=[seed_key.public],
            signer=signer,
        )
        envelope = custody_mod.open_envelope(record, seed_key.public)
        current = seed_key
        for i in range(args.hops):
            receiver = signer.generate_keypair()
            fakes = args.fakes if i == 0 else 0
            envelope = custody_mod.forward(
                envelope, current, receiver.public, signer, fake_identities=fakes
            )
            current = receiver
        if args.out:
            Path(args.out).write_bytes(custody_mod.encode_envelope(envelope))
        if args.keys:
            Path(args.keys).write_text(
                json.dumps(signer.export_registry(), sort_keys=True, indent=2)
            )
        sys.stdout.write(custody_mod.envelope_debug_json(envelope) + "\n")
        return 0
    # verify / settle operate on an encoded envelope file
    _require(args, "infile", "keys")
    envelope = custody_mod.decode_envelope(Path(args.infile).read_bytes())
    signer = custody_mod.KeyedHashSigner()
    signer.import_registry(json.loads(Path(args.keys).read_text()))
    if args.action == "verify":
        h = custody_mod.verify_chain(envelope, signer)
        sys.stdout.write(json.dumps({"chain_length": h, "valid": True}) + "\n")
        return 0
    if args.action == "settle":
        payout = custody_mod.settle(envelope, signer)
        doc = {key.hex(): units for key, units in sorted(payout.items())}
        sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return 0
    raise InvalidParameterError(f"unknown custody action {args.action!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaygame",
        description="Propagation-reward experiments on forests of d-ary trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, topology: bool = True) -> None:
        p.add_argument("--config", default=None, help="JSON config file; flags override")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if topology:
            p.add_argument("--t", type=int, default=None, help="seed count")
            p.add_argument("--d", type=int, default=None, help="branching factor")
            p.add_argument("--H", type=int, default=None, help="tree height")

    p = sub.add_parser("scheme", help="build a reward table or hybrid assignment")
    common(p)
    _add_scheme_flags(p)
    p.set_defaults(func=_cmd_scheme)

    p = sub.add_parser("simulate", help="seeded Monte Carlo authorization")
    common(p)
    _add_scheme_flags(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--external", type=int, default=None, help="external attempters")
    p.add_argument("--csv", default=None, help="per-node CSV output path")
    p.add_argument("--json", default=None, help="JSON summary path (default stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("eliminate", help="iterated elimination of dominated strategies")
    common(p)
    _add_scheme_flags(p)
    p.add_argument("--extra-aware", type=int, default=None, dest="extra_aware")
    p.add_argument("--order", choices=["lemma", "greedy", "random"], default="lemma")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--survivors", default=None, help="survivors JSON path (default stdout)")
    p.add_argument("--trace", default=None, help="removal trace JSONL path")
    p.set_defaults(func=_cmd_eliminate)

    p = sub.add_parser("check-sybil", help="deviation profitability report")
    common(p)
    _add_scheme_flags(p)
    p.add_argument("--position", type=int, default=None, help="chain position to audit")
    p.add_argument("--chain-length", type=int, default=None, dest="chain_length")
    p.add_argument("--clones", type=int, default=None)
    p.add_argument("--max-clones", type=int, default=None, dest="max_clones")
    p.add_argument("--external", type=int, default=None)
    p.set_defaults(func=_cmd_check_sybil)

    p = sub.add_parser("bounds", help="dominant-strategy payment floor")
    common(p, topology=False)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--H", type=int, default=None)
    p.add_argument("--floor-position", type=int, default=None, dest="floor_position")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("lp-oracle", help="exact polytope minimization")
    common(p, topology=False)
    p.add_argument("--height-s", type=int, default=None, dest="height_s")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument(
        "--objective",
        choices=["root_reward", "expected_payment"],
        default="root_reward",
    )
    p.set_defaults(func=_cmd_lp_oracle)

    p = sub.add_parser("custody", help="chain-of-custody envelopes")
    p.add_argument("action", choices=["demo", "verify", "settle"])
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hops", type=int, default=None)
    p.add_argument("--fakes", type=int, default=0)
    p.add_argument("--amount", type=int, default=None)
    p.add_argument("--fee", type=int, default=None)
    p.add_argument("--beta", type=_fraction, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--out", default=None, help="encoded envelope output path")
    p.add_argument("--keys", default=None, help="demo key registry JSON path")
    p.add_argument("--in", dest="infile", default=None, help="encoded envelope input")
    p.set_defaults(func=_cmd_custody)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _load_config(args)
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except RelayGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
