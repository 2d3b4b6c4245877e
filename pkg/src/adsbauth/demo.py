"""Scripted preflight + en-route run printing a human-readable transcript."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from .authflow import AtcSession, Decoded, UasSession, write_transcript
from .channel import ChannelModel, Transmission
from .crypto import UasKeys
from .experiments import check_practical_config
from .frame import FrameParams
from .ledger import (
    AtmNetwork, AtmNode, FlightPlan, RuleSet, issuer_score, seal_credential, sign_plan,
    unseal_credential, verify_chain,
)


def demo_network(seed: int = 0) -> AtmNetwork:
    sites = [
        ("ZJX-ARTCC", (30.30, -81.65), 420.0),
        ("DAB-TRACON", (29.18, -81.06), 180.0),
        ("MCO-TOWER", (28.43, -81.31), 250.0),
        ("ORL-WX", (28.55, -81.33), 900.0),
        ("SFB-TOWER", (28.78, -81.24), 150.0),
        ("JAX-TOWER", (30.49, -81.69), 300.0),
        ("TPA-TRACON", (27.98, -82.53), 210.0),
        ("MIA-ARTCC", (25.80, -80.29), 380.0),
        ("TLH-TOWER", (30.40, -84.35), 260.0),
        ("PNS-TOWER", (30.47, -87.19), 340.0),
        ("GNV-TOWER", (29.69, -82.27), 190.0),
        ("MLB-TOWER", (28.10, -80.65), 230.0),
    ]
    nodes = [AtmNode.from_seed(name, pos, lat, seed) for name, pos, lat in sites]
    rules = RuleSet(
        altitude_ceiling_m=120.0,
        restricted_zones=(((28.40, -81.33), (28.46, -81.33), (28.46, -81.27), (28.40, -81.27)),),
        max_duration_s=4 * 3600.0,
    )
    return AtmNetwork(nodes, rules=rules)


def run_demo(
    distance_km: float = 100.0,
    seed: int = 0,
    payload_bits: int = 1024,
    symbol_bits: int = 32,
    redundancy: float = 3.25,
    transcript: str | Path | None = None,
    out: Callable[[str], None] = print,
) -> dict:
    net = demo_network(seed)
    keys = UasKeys.generate(seed)
    plan = FlightPlan(
        registration_id="FA3XYZ7K9P",
        waypoints=((29.19, -81.05, 60.0), (29.25, -81.10, 110.0), (29.31, -81.02, 90.0)),
        etas=(1_700_000_000.0, 1_700_000_600.0, 1_700_001_200.0),
        submitter_public_key=keys.signing_public,
        icao_address=0xA1B2C3,
    )
    out("== preflight ==")
    idx = net.submit(plan, sign_plan(plan, keys.signing))
    out(f"plan {plan.registration_id} submitted, block {idx}, id_fp {plan.digest().hex()[:16]}...")
    verdict = net.assess(plan)
    out(f"smart-contract verdict: {'approve' if verdict else 'reject ' + str(verdict.reason)}")
    for node in sorted(net.nodes.values(), key=lambda n: -issuer_score(n, plan.takeoff))[:3]:
        out(f"  issuer candidate {node.node_id:<11} s = {issuer_score(node, plan.takeoff):.5f}")
    params = FrameParams.for_payload(payload_bits, symbol_bits, redundancy)
    for line in check_practical_config(payload_bits, symbol_bits, redundancy).lines():
        out(f"  {line}")
    cred = net.issue(plan, verdict, params, seed)
    out(f"credential issued by {cred.issuer_id}: k={params.k} n={params.n_columns} L_h={params.hint_bits}")
    sealed = seal_credential(cred, keys.sealing_public)
    uas_cred = unseal_credential(sealed, keys.sealing)
    out(f"sealed credential {len(sealed)} bytes, unsealed by UAS: {uas_cred == cred}")

    out(f"== en-route ({distance_km:g} km) ==")
    model = ChannelModel(distance_km, seed)
    out(f"channel PLR {model.plr:.4f}")
    uas = UasSession.from_credential(uas_cred)
    atc = AtcSession.from_credential(net.credentials[plan.icao_address], network=net)
    tx = Transmission(model, stream_id=1)
    frames = []
    result = None
    limit = 64 * params.n_columns
    while not isinstance(result, Decoded):
        gap = tx.next_delivery(limit)
        if gap is None:
            out("gave up: nothing decodable within the frame budget")
            return {"decoded": False}
        for _ in range(gap - 1):
            frames.append(uas.next_frame())
        frame = uas.next_frame()
        frames.append(frame)
        result = atc.ingest(frame.hex())
        if len(atc.collected) <= 3 or isinstance(result, Decoded):
            out(f"  rx #{atc.received:<3} sent {uas.sent:<4} {frame.hex()} rank {atc.collected.rank}")
    verdict = atc.verify(result)
    out(f"decoded after {uas.sent} broadcasts ({uas.elapsed_s:.1f} s), {atc.received} received")
    out(f"verification: {'accept' if verdict else 'reject ' + str(verdict.reason)}")

    old_payload = result.payload
    new_challenge = atc.rotate_challenge(1, seed)
    replay = atc.verify(Decoded(result.bits, old_payload))
    out(f"challenge rotated to seq {new_challenge.seq}; replayed payload: reject {replay.reason}")
    uas.answer(new_challenge)
    fresh = None
    while not isinstance(fresh, Decoded):
        fresh = atc.ingest(uas.next_frame())
    out(f"re-derived response: {'accept' if atc.verify(fresh) else 'reject'}")
    bad = verify_chain(net.chain)
    out(f"chain: {len(net.chain)} blocks, verify {'ok' if bad is None else f'bad at {bad}'}")
    if transcript is not None:
        write_transcript(frames, transcript)
        out(f"transcript: {len(frames)} frames -> {transcript}")
    return {
        "decoded": True,
        "broadcasts": len(frames),
        "accepted": verdict.approved,
        "replay_rejected": not replay.approved,
        "chain_ok": bad is None,
    }
