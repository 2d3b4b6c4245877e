"""One test per acceptance criterion, each at its stated tolerance and scale.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import dataclasses
import random
import time

import pytest

from acceptance_log import report
from adsbauth.authflow import (
    AtcSession, ChallengeWindow, UasSession, make_payload, rotate_challenge, verify_payload,
)
from adsbauth.bits import Bits
from adsbauth.channel import plr_at
from adsbauth.cli import main as cli_main
from adsbauth.crypto import DecryptFailure, UasKeys
from adsbauth.experiments import SweepConfig, check_practical_config, run_plr_sweep, run_range_limited
from adsbauth.frame import CrcMismatch, FrameParams, build_frame, parse_frame, validate_params
from adsbauth.ledger import (
    AtmNode, BadSignature, Block, Chain, seal_credential, sign_plan, unseal_credential, verify_chain,
)
from adsbauth.ltcode import (
    DataConflict, Droplet, Eliminator, GenerationMatrix, Stalled, decode_bp, decode_gauss, encode_droplet,
    generate_matrix, segment_payload,
)
from helpers import approved_credential, make_network, make_plan
from oracles import xor_encode


def test_criterion_1_practical_config_arithmetic():
    t0 = time.perf_counter()
    a = check_practical_config(1024, 32, 3.25)
    b = check_practical_config(2048, 32, 3.25)
    elapsed = time.perf_counter() - t0
    ok = (
        a.hint_bits == 7 and a.used_bits == 39 and a.used_bits <= 51
        and b.hint_bits == 8 and b.symbol_headroom_bits == 43 and elapsed < 1.0
    )
    report(1, ok, f"L_h={a.hint_bits} used={a.used_bits}; L_h={b.hint_bits} headroom={b.symbol_headroom_bits}; {elapsed:.3f}s")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="0.6739779 contradicts 65.366 + 0.020319*100 = 67.3979 %; the implementation follows the formula",
)
def test_criterion_2_plr_reference_values():
    t0 = time.perf_counter()
    got = (plr_at(0), plr_at(100), plr_at(1485))
    elapsed = time.perf_counter() - t0
    checks = [abs(g - w) <= 1e-9 for g, w in zip(got, (0.65366, 0.6739779, 0.95))]
    ok = all(checks) and elapsed < 1.0
    report(2, ok, f"plr_at(0,100,1485) = {got[0]:.9f}, {got[1]:.9f}, {got[2]:.9f}; per-value ok {checks}")
    assert ok


@pytest.mark.slow
def test_criterion_3_range_limited_delivery():
    t0 = time.perf_counter()
    cfg = SweepConfig(payload_sizes_bits=(1024,), symbol_bits=32, distance_grid=(100.0,), trials=1000, seed=0)
    (row,) = run_range_limited(cfg)
    elapsed = time.perf_counter() - t0
    ok = 100 <= row.mean_packets_transmitted <= 140 and 2.75 <= row.mean_r0_star <= 3.75
    report(
        3, ok,
        f"100 km, M=1024, L_C=32, N={row.n_columns}: mean tx {row.mean_packets_transmitted:.2f} "
        f"(N0 {row.mean_n0:.2f}), mean r0* {row.mean_r0_star:.3f}, accepted {row.accepted_fraction:.3f}; {elapsed:.0f}s",
    )
    assert ok


@pytest.mark.slow
def test_criterion_4_redundancy_trend():
    t0 = time.perf_counter()
    grid = (0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)
    cfg = SweepConfig(payload_sizes_bits=(256, 2048), symbol_bits=16, plr_grid=grid, trials=1000, seed=0)
    rows = run_plr_sweep(cfg)
    elapsed = time.perf_counter() - t0
    curves = {m: {r.plr: r.mean_r0_star for r in rows if r.payload_bits == m} for m in (256, 2048)}
    baseline_ok = all(c[0.0] == 1.0 for c in curves.values())
    increasing_ok = all(all(c[a] < c[b] for a, b in zip(grid, grid[1:])) for c in curves.values())
    floor_ok = all(c[p] > 1 / (1 - p) - 0.1 for c in curves.values() for p in grid)
    spread = max(abs(curves[256][p] - curves[2048][p]) / min(curves[256][p], curves[2048][p]) for p in grid)
    ok = baseline_ok and increasing_ok and floor_ok and spread < 0.10
    detail = ", ".join(f"{p:.2f}:{curves[256][p]:.2f}/{curves[2048][p]:.2f}" for p in grid)
    report(
        4, ok,
        f"r0*(0)=1 {baseline_ok}, strictly increasing {increasing_ok}, above 1/(1-p)-0.1 {floor_ok}, "
        f"max size spread {spread:.3%}; M=256/2048 {detail}; {elapsed:.0f}s",
    )
    assert ok


def _roundtrip_trial(rng: random.Random, m: GenerationMatrix, symbol_size: int, order: list[int]) -> tuple[bool, bool, int]:
    """Deliver columns in ``order`` until rank k; returns (exact, bp_agrees, overshoot)."""
    k = m.k
    payload = Bits(rng.getrandbits(k * symbol_size), k * symbol_size)
    sv = segment_payload(payload, symbol_size)
    elim = Eliminator(k)
    drops: list[Droplet] = []
    for j in order:
        d = encode_droplet(sv, m, j)
        assert d.data == xor_encode(sv.symbols, m.column(j))
        drops.append(d)
        elim.add(m.column(j))
        if elim.rank == k:
            break
    gauss = decode_gauss(drops, m)
    try:
        bp_ok = decode_bp(drops, m) == gauss
    except Stalled:
        bp_ok = True
    return gauss == payload, bp_ok, len(drops) - k


def _delivered_rank(m: GenerationMatrix, order: list[int]) -> int:
    elim = Eliminator(m.k)
    for j in order:
        elim.add(m.column(j))
    return elim.rank


@pytest.mark.slow
def test_criterion_5_coding_roundtrip_suite():
    t0 = time.perf_counter()
    rng = random.Random(2024)
    trials = 10_000
    exact = agree = 0
    lt_overshoot = uniform_overshoot = 0
    for _ in range(trials):
        k = rng.randint(1, 48)
        size = rng.randint(1, 48)
        # LT matrix from the credential path, random erasure pattern over its columns
        m = generate_matrix(k, k + rng.randint(1, 3 * k + 4), rng.getrandbits(64))
        order = [j for j in rng.sample(range(m.n), m.n) if rng.random() >= 0.3]
        if _delivered_rank(m, order) < k:
            # this loss pattern leaves the column space short; top up with the lost columns
            seen = set(order)
            order += [j for j in range(m.n) if j not in seen]
        e, b, o = _roundtrip_trial(rng, m, size, order)
        exact += e
        agree += b
        lt_overshoot += o
        # uniformly random columns: the stream keeps going until rank k
        cols = []
        elim = Eliminator(k)
        while elim.rank < k:
            c = rng.getrandbits(k)
            cols.append(c)
            elim.add(c)
        um = GenerationMatrix.from_columns(cols, k)
        e, b, o = _roundtrip_trial(rng, um, size, list(range(len(cols))))
        exact += e
        agree += b
        uniform_overshoot += o
    elapsed = time.perf_counter() - t0
    mean_uniform = uniform_overshoot / trials
    ok = exact == 2 * trials and agree == 2 * trials and mean_uniform <= 2.0
    report(
        5, ok,
        f"{2 * trials} rank-k deliveries ({trials} LT, {trials} uniform), exact {exact}, BP agrees {agree}; "
        f"mean overshoot uniform {mean_uniform:.3f} (LT {lt_overshoot / trials:.3f}); {elapsed:.0f}s",
    )
    assert ok


def test_criterion_6_frame_integrity():
    t0 = time.perf_counter()
    rng = random.Random(6)
    roundtrips = 0
    flipped = detected = 0
    for i in range(10_000):
        while True:
            lc = rng.randint(1, 44)
            p = FrameParams.for_payload(rng.randint(1, 64) * lc, lc, rng.choice((1.5, 2.0, 3.25, 4.0)))
            if not validate_params(p):
                break
        icao = rng.getrandbits(24)
        d = Droplet(rng.randrange(p.n_columns), rng.getrandbits(lc), lc)
        frame = build_frame(icao, d, p)
        roundtrips += parse_frame(frame.to_bytes(), p) == (icao, d)
        if i < 10:
            value = frame.to_int()
            for bit in range(88):
                flipped += 1
                try:
                    parse_frame(Bits(value ^ (1 << (111 - bit)), 112), p)
                except CrcMismatch:
                    detected += 1
    elapsed = time.perf_counter() - t0
    ok = roundtrips == 10_000 and detected == flipped == 880
    report(6, ok, f"round trips {roundtrips}/10000, single-bit flips detected {detected}/{flipped}; {elapsed:.1f}s")
    assert ok


def test_criterion_7_security_properties():
    t0 = time.perf_counter()
    results = {}

    # forged plan signature
    keys, thief = UasKeys.generate(70), UasKeys.generate(71)
    net = make_network(seed=70)
    plan = make_plan(keys)
    try:
        net.submit(plan, sign_plan(plan, thief.signing))
        results["forged plan rejected"] = False
    except BadSignature:
        results["forged plan rejected"] = len(net.chain) == 1

    # tampered block located
    nodes = [AtmNode.from_seed(f"N{i}", (0.0, 0.0), 0.0, 7) for i in range(3)]
    chain = Chain.create(nodes)
    for i in range(1, 100):
        chain.append("EnRouteVerdict", f"event {i}".encode(), nodes[i % 3])
    clean = verify_chain(chain) is None
    chain.replace(50, dataclasses.replace(chain[50], payload=b"tampered"))
    by_hash = verify_chain(chain) == 50
    b = chain[50]
    chain.replace(50, Block.create(50, b.prev_hash, b.kind, b"tampered", AtmNode.from_seed("EVIL", (0.0, 0.0), 0.0, 8)))
    results["tampered block located"] = clean and by_hash and verify_chain(chain) == 50

    # replay after rotation
    _, uas_keys, _, cred = approved_credential(seed=72)
    old = make_payload(cred, cred.challenge)
    window = ChallengeWindow(cred.challenge)
    window.push(rotate_challenge(cred.challenge, 1, seed=9))
    results["replay after rotation stale"] = verify_payload(old, cred, window).reason == "StaleSequence"

    # conflicting duplicate droplet
    uas, atc = UasSession.from_credential(cred), AtcSession.from_credential(cred)
    f = uas.next_frame()
    atc.ingest(f)
    forged_droplet = Droplet(0, parse_frame(f.hex(), cred.params)[1].data ^ 1, cred.params.symbol_bits)
    forged = build_frame(cred.icao_address, forged_droplet, cred.params)
    try:
        atc.ingest(forged)
        results["conflicting duplicate"] = False
    except DataConflict:
        results["conflicting duplicate"] = True

    # unsealing under wrong key and every single-bit flip
    sealed = seal_credential(cred, uas_keys.sealing_public)
    intact = unseal_credential(sealed, uas_keys.sealing) == cred
    try:
        unseal_credential(sealed, thief.sealing)
        wrong_key = False
    except DecryptFailure:
        wrong_key = True
    flips_caught = 0
    for bit in range(8 * len(sealed)):
        blob = bytearray(sealed)
        blob[bit // 8] ^= 0x80 >> (bit % 8)
        try:
            unseal_credential(bytes(blob), uas_keys.sealing)
        except DecryptFailure:
            flips_caught += 1
    results["sealing"] = intact and wrong_key and flips_caught == 8 * len(sealed)

    elapsed = time.perf_counter() - t0
    ok = all(results.values()) and elapsed < 10.0
    detail = ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in results.items())
    report(7, ok, f"{detail}; {flips_caught}/{8 * len(sealed)} ciphertext flips rejected; {elapsed:.1f}s")
    assert ok


def test_criterion_8_sweep_csv_determinism(tmp_path, capsys):
    argv = ["sweep", "plr", "--payload-sizes", "256", "512", "--trials", "25", "--seed", "11"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli_main(argv + ["--out", str(a)]) == 0
    assert cli_main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    ok = a.read_bytes() == b.read_bytes() and len(a.read_bytes()) > 0
    report(8, ok, f"two `sweep plr` runs with seed 11: {len(a.read_bytes())} bytes each, identical {ok}")
    assert ok
