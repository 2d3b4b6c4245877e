"""Command-line entry point: ``adsbauth <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import crypto
from .crypto import UasKeys
from .demo import demo_network, run_demo
from .errors import AdsbAuthError
from .experiments import (
    DEFAULT_DISTANCE_GRID, DEFAULT_PAYLOAD_SIZES, DEFAULT_PLR_GRID, SweepConfig,
    check_practical_config, rows_to_csv, run_plr_sweep, run_range_limited, summary_table,
)
from .frame import FrameParams, build_frame, parse_frame
from .ledger import (
    AtmNetwork, AtmNode, Chain, FlightPlan, RuleSet, seal_credential, sign_plan, unseal_credential,
    verify_chain,
)
from .ltcode import Droplet

NODES_FILE = "nodes.json"
CHAIN_FILE = "chain.ndjson"
RULES_FILE = "rules.json"


# --- network directory -------------------------------------------------------


def _save_network(net: AtmNetwork, root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    nodes = [
        {
            "node_id": n.node_id,
            "position": list(n.position),
            "recent_latency_ms": n.recent_latency_ms,
            "signing_key": crypto.private_bytes(n.signing_key).hex(),
        }
        for n in net.nodes.values()
    ]
    (root / NODES_FILE).write_text(json.dumps(nodes, indent=2) + "\n", encoding="utf-8")
    (root / RULES_FILE).write_text(json.dumps(net.rules.to_dict(), indent=2) + "\n", encoding="utf-8")
    net.chain.save(root / CHAIN_FILE)


def _load_network(root: Path) -> AtmNetwork:
    raw = json.loads((root / NODES_FILE).read_text(encoding="utf-8"))
    nodes = [
        AtmNode(
            d["node_id"], tuple(d["position"]), float(d["recent_latency_ms"]),
            Ed25519PrivateKey.from_private_bytes(bytes.fromhex(d["signing_key"])),
        )
        for d in raw
    ]
    chain = Chain.load(root / CHAIN_FILE, {n.node_id: n.public_key for n in nodes})
    rules_path = root / RULES_FILE
    rules = RuleSet.from_dict(json.loads(rules_path.read_text(encoding="utf-8"))) if rules_path.exists() else None
    return AtmNetwork(nodes, chain, rules)


def _load_plan(path: str) -> FlightPlan:
    return FlightPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_keys(path: str) -> UasKeys:
    return UasKeys.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- commands ------------------------------------------------------------------


def cmd_keygen(args: argparse.Namespace) -> int:
    keys = UasKeys.generate(args.seed)
    data = keys.to_dict() | {"signing_public": keys.signing_public.hex(), "sealing_public": keys.sealing_public.hex()}
    Path(args.out).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    print(f"signing public key {keys.signing_public.hex()}")
    return 0


def cmd_net_init(args: argparse.Namespace) -> int:
    net = demo_network(args.seed)
    if args.rules:
        net.rules = RuleSet.from_dict(json.loads(Path(args.rules).read_text(encoding="utf-8")))
    _save_network(net, Path(args.dir))
    print(f"{len(net.nodes)} nodes, genesis {net.chain[0].hash.hex()[:16]}... in {args.dir}")
    return 0


def cmd_plan_sign(args: argparse.Namespace) -> int:
    print(sign_plan(_load_plan(args.plan), _load_keys(args.key).signing).hex())
    return 0


def cmd_plan_submit(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    net = _load_network(root)
    plan = _load_plan(args.plan)
    if args.signature:
        signature = bytes.fromhex(args.signature)
    elif args.key:
        signature = sign_plan(plan, _load_keys(args.key).signing)
    else:
        raise SystemExit("plan submit needs --signature or --key")
    index = net.submit(plan, signature)
    net.chain.save(root / CHAIN_FILE)
    print(f"PlanSubmitted block {index}")
    return 0


def cmd_plan_assess(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    net = _load_network(root)
    verdict = net.assess(_load_plan(args.plan))
    net.chain.save(root / CHAIN_FILE)
    print("approve" if verdict else f"reject {verdict.reason}")
    return 0 if verdict else 1


def cmd_credential_issue(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    net = _load_network(root)
    plan = _load_plan(args.plan)
    verdict = net.assess(plan)
    params = FrameParams.for_payload(args.payload_bits, args.symbol_bits, args.redundancy, strict=not args.ceil_n)
    cred = net.issue(plan, verdict, params, args.seed)
    net.chain.save(root / CHAIN_FILE)
    recipient = json.loads(Path(args.recipient).read_text(encoding="utf-8"))["sealing_public"]
    Path(args.out).write_bytes(seal_credential(cred, bytes.fromhex(recipient)))
    print(f"credential from {cred.issuer_id}: k={params.k} n={params.n_columns} L_h={params.hint_bits} -> {args.out}")
    return 0


def cmd_credential_open(args: argparse.Namespace) -> int:
    cred = unseal_credential(Path(args.sealed).read_bytes(), _load_keys(args.key).sealing)
    p = cred.params
    print(
        json.dumps(
            {
                "issuer": cred.issuer_id,
                "id_fp": cred.id_fp.hex(),
                "icao_address": f"{cred.icao_address:06X}",
                "challenge": f"{cred.challenge.value:016X}",
                "matrix": {"k": p.k, "n": p.n_columns, "seed": cred.matrix_seed},
                "payload_bits": p.payload_bits,
                "symbol_bits": p.symbol_bits,
            },
            indent=2,
        )
    )
    return 0


def cmd_chain_verify(args: argparse.Namespace) -> int:
    net = _load_network(Path(args.dir))
    bad = verify_chain(net.chain)
    if bad is None:
        print(f"ok ({len(net.chain)} blocks)")
        return 0
    print(f"first bad block {bad}")
    return 1


def _frame_params(args: argparse.Namespace) -> FrameParams:
    if args.n_columns:
        return FrameParams(args.payload_bits, args.symbol_bits, args.n_columns, args.redundancy)
    return FrameParams.for_payload(args.payload_bits, args.symbol_bits, args.redundancy)


def cmd_frame_build(args: argparse.Namespace) -> int:
    p = _frame_params(args)
    droplet = Droplet(args.column, int(args.data, 16), p.symbol_bits)
    print(build_frame(int(args.icao, 16), droplet, p).hex())
    return 0


def cmd_frame_parse(args: argparse.Namespace) -> int:
    icao, droplet = parse_frame(args.hex, _frame_params(args))
    width = (droplet.symbol_size + 3) // 4
    print(f"icao {icao:06X} column {droplet.column_index} data {droplet.data:0{width}X}")
    return 0


def _sweep_config(args: argparse.Namespace, **extra) -> SweepConfig:
    return SweepConfig(
        payload_sizes_bits=tuple(args.payload_sizes),
        symbol_bits=args.symbol_bits,
        trials=args.trials,
        seed=args.seed,
        redundancy=args.redundancy,
        workers=args.workers,
        **extra,
    )


def _emit(rows, args: argparse.Namespace) -> None:
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(summary_table(rows))
    else:
        sys.stdout.write(text)


def cmd_sweep_plr(args: argparse.Namespace) -> int:
    _emit(run_plr_sweep(_sweep_config(args, plr_grid=tuple(args.plr_grid))), args)
    return 0


def cmd_sweep_range(args: argparse.Namespace) -> int:
    _emit(run_range_limited(_sweep_config(args, distance_grid=tuple(args.distance_grid))), args)
    return 0


def cmd_check_config(args: argparse.Namespace) -> int:
    report = check_practical_config(args.payload_bits, args.symbol_bits, args.redundancy)
    print("\n".join(report.lines()))
    return 0 if report.passes else 1


def cmd_demo(args: argparse.Namespace) -> int:
    summary = run_demo(args.distance, args.seed, transcript=args.transcript)
    return 0 if summary.get("accepted") else 1


# --- parser --------------------------------------------------------------------


def _add_sizing(p: argparse.ArgumentParser) -> None:
    p.add_argument("--payload-bits", type=int, default=1024)
    p.add_argument("--symbol-bits", type=int, default=32)
    p.add_argument("--redundancy", type=float, default=3.25)
    p.add_argument("--n-columns", type=int, default=None, help="override N (default: smallest N > r0*M/L_C)")


def _add_sweep(p: argparse.ArgumentParser, symbol_bits: int) -> None:
    p.add_argument("--payload-sizes", type=int, nargs="+", default=list(DEFAULT_PAYLOAD_SIZES))
    p.add_argument("--symbol-bits", type=int, default=symbol_bits)
    p.add_argument("--redundancy", type=float, default=3.25)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: CSV to stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adsbauth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="create a UAS operator key file")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keygen)

    net = sub.add_parser("net", help="ATM network directory").add_subparsers(dest="net_cmd", required=True)
    p = net.add_parser("init")
    p.add_argument("dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rules")
    p.set_defaults(func=cmd_net_init)

    plan = sub.add_parser("plan", help="flight plans").add_subparsers(dest="plan_cmd", required=True)
    p = plan.add_parser("sign")
    p.add_argument("plan")
    p.add_argument("--key", required=True)
    p.set_defaults(func=cmd_plan_sign)
    p = plan.add_parser("submit")
    p.add_argument("dir")
    p.add_argument("plan")
    p.add_argument("--signature")
    p.add_argument("--key")
    p.set_defaults(func=cmd_plan_submit)
    p = plan.add_parser("assess")
    p.add_argument("dir")
    p.add_argument("plan")
    p.set_defaults(func=cmd_plan_assess)

    cred = sub.add_parser("credential", help="credentials").add_subparsers(dest="cred_cmd", required=True)
    p = cred.add_parser("issue")
    p.add_argument("dir")
    p.add_argument("plan")
    p.add_argument("--recipient", required=True, help="key file holding the operator's sealing public key")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ceil-n", action="store_true", help="N = ceil(r0*M/L_C) instead of the strict bound")
    p.add_argument("--payload-bits", type=int, default=1024)
    p.add_argument("--symbol-bits", type=int, default=32)
    p.add_argument("--redundancy", type=float, default=3.25)
    p.set_defaults(func=cmd_credential_issue)
    p = cred.add_parser("open")
    p.add_argument("sealed")
    p.add_argument("--key", required=True)
    p.set_defaults(func=cmd_credential_open)

    chain = sub.add_parser("chain", help="ledger").add_subparsers(dest="chain_cmd", required=True)
    p = chain.add_parser("verify")
    p.add_argument("dir")
    p.set_defaults(func=cmd_chain_verify)

    frame = sub.add_parser("frame", help="112-bit frames as 28 hex digits").add_subparsers(dest="frame_cmd", required=True)
    p = frame.add_parser("build")
    p.add_argument("--icao", required=True, help="24-bit address in hex")
    p.add_argument("--column", type=int, required=True)
    p.add_argument("--data", required=True, help="droplet data in hex")
    _add_sizing(p)
    p.set_defaults(func=cmd_frame_build)
    p = frame.add_parser("parse")
    p.add_argument("hex")
    _add_sizing(p)
    p.set_defaults(func=cmd_frame_parse)

    sweep = sub.add_parser("sweep", help="Monte Carlo sweeps").add_subparsers(dest="sweep_cmd", required=True)
    p = sweep.add_parser("plr")
    _add_sweep(p, symbol_bits=16)
    p.add_argument("--plr-grid", type=float, nargs="+", default=list(DEFAULT_PLR_GRID))
    p.set_defaults(func=cmd_sweep_plr)
    p = sweep.add_parser("range")
    _add_sweep(p, symbol_bits=32)
    p.add_argument("--distance-grid", type=float, nargs="+", default=list(DEFAULT_DISTANCE_GRID))
    p.set_defaults(func=cmd_sweep_range)

    p = sub.add_parser("check-config", help="hint/symbol budget for a configuration")
    p.add_argument("payload_bits", type=int)
    p.add_argument("symbol_bits", type=int)
    p.add_argument("redundancy", type=float)
    p.set_defaults(func=cmd_check_config)

    demo = sub.add_parser("demo", help="scripted runs").add_subparsers(dest="demo_cmd", required=True)
    p = demo.add_parser("e2e")
    p.add_argument("--distance", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdsbAuthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
