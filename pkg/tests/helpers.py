"""Shared fixtures-by-function for the protocol tests."""

from __future__ import annotations

from adsbauth.crypto import UasKeys
from adsbauth.frame import FrameParams
from adsbauth.ledger import AtmNetwork, AtmNode, FlightPlan, RuleSet, sign_plan

P1024 = FrameParams.for_payload(1024, 32, 3.25)


def make_plan(keys: UasKeys, icao: int = 0xA1B2C3, etas=(1000.0, 1600.0, 2200.0), alt: float = 80.0) -> FlightPlan:
    return FlightPlan(
        registration_id="FA-TEST-01",
        waypoints=((29.19, -81.05, alt), (29.25, -81.10, alt), (29.31, -81.02, alt))[: len(etas)],
        etas=tuple(etas),
        submitter_public_key=keys.signing_public,
        icao_address=icao,
    )


def make_network(count: int = 4, seed: int = 0, rules: RuleSet | None = None) -> AtmNetwork:
    nodes = [AtmNode.from_seed(f"N{i:02d}", (29.0 + 0.1 * i, -81.0), 100.0 * i, seed) for i in range(count)]
    return AtmNetwork(nodes, rules=rules)


def approved_credential(seed: int = 1, params: FrameParams = P1024, icao: int = 0xA1B2C3):
    keys = UasKeys.generate(seed)
    net = make_network(seed=seed)
    plan = make_plan(keys, icao=icao)
    net.submit(plan, sign_plan(plan, keys.signing))
    verdict = net.assess(plan)
    cred = net.issue(plan, verdict, params, seed=seed)
    return net, keys, plan, cred
