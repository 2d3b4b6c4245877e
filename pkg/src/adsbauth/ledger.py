"""Permissioned ATM ledger: flight-plan submission, smart-contract
assessment, issuer selection and credential issuance.

The chain is a single append-only log of hash-linked blocks, each signed by
a member node.  Consensus is not simulated; membership is a fixed registry
of node public keys, and :func:`verify_chain` rejects anything signed by a
non-member.
"""

from __future__ import annotations

import json
import math
import os
import struct
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from shapely.geometry import LineString, Point, Polygon

from . import crypto
from ._rng import SplitMix64, derive_seed
from .crypto import DecryptFailure
from .errors import AdsbAuthError
from .frame import FrameParams, ParamViolation, validate_params
from .ltcode import GenerationMatrix, generate_matrix

EARTH_RADIUS_KM = 6371.0088
ISSUER_SHORTLIST = 10
HASH_BYTES = 32
GENESIS_PREV = bytes(HASH_BYTES)

BLOCK_KINDS = ("Genesis", "PlanSubmitted", "PlanAssessed", "CredentialIssued", "EnRouteVerdict")

__all__ = [
    "AtmNetwork", "AtmNode", "AuthCredential", "BadSignature", "Block", "Chain", "Challenge",
    "DecryptFailure", "FlightPlan", "MalformedPlan", "NoNodes", "NotApproved", "RuleSet",
    "Verdict", "assess_plan", "issue_credential", "issuer_score", "local_distance_km",
    "seal_credential", "select_issuer", "sign_plan", "submit_plan", "unseal_credential",
    "verify_chain",
]


class LedgerError(AdsbAuthError):
    pass


class BadSignature(LedgerError):
    pass


class MalformedPlan(LedgerError):
    pass


class NoNodes(LedgerError):
    pass


class NotApproved(LedgerError):
    pass


class UnknownSigner(LedgerError):
    pass


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated record")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def lp(self) -> bytes:
        (n,) = struct.unpack(">I", self.take(4))
        return self.take(n)

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ValueError("trailing bytes in record")


# --- flight plans ----------------------------------------------------------


@dataclass(frozen=True)
class FlightPlan:
    """Waypoints are ``(lat_deg, lon_deg, altitude_m)``; ETAs are Unix seconds."""

    registration_id: str
    waypoints: tuple[tuple[float, float, float], ...]
    etas: tuple[float, ...]
    submitter_public_key: bytes
    icao_address: int

    def problems(self) -> list[str]:
        out = []
        if not self.waypoints:
            out.append("no waypoints")
        if len(self.waypoints) != len(self.etas):
            out.append(f"{len(self.waypoints)} waypoints but {len(self.etas)} ETAs")
        if any(b <= a for a, b in zip(self.etas, self.etas[1:])):
            out.append("ETAs are not strictly increasing")
        if not 0 <= self.icao_address < 1 << 24:
            out.append("ICAO address outside 24 bits")
        for lat, lon, _ in self.waypoints:
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                out.append(f"waypoint ({lat}, {lon}) off the globe")
        return out

    def canonical_bytes(self) -> bytes:
        """Length-prefixed fields in declaration order.

        Coordinates are micro-degrees, altitudes millimetres, ETAs
        milliseconds, all as big-endian signed 64-bit integers.
        """
        wps = b"".join(
            struct.pack(">qqq", round(lat * 1e6), round(lon * 1e6), round(alt * 1e3))
            for lat, lon, alt in self.waypoints
        )
        etas = b"".join(struct.pack(">q", round(t * 1e3)) for t in self.etas)
        return b"".join(
            [
                _lp(self.registration_id.encode("utf-8")),
                _lp(wps),
                _lp(etas),
                _lp(bytes(self.submitter_public_key)),
                _lp(struct.pack(">I", self.icao_address)),
            ]
        )

    def digest(self) -> bytes:
        return crypto.digest(self.canonical_bytes())

    @property
    def takeoff(self) -> tuple[float, float]:
        lat, lon, _ = self.waypoints[0]
        return lat, lon

    @property
    def duration_s(self) -> float:
        return self.etas[-1] - self.etas[0] if self.etas else 0.0

    def to_dict(self) -> dict:
        return {
            "registration_id": self.registration_id,
            "icao_address": f"{self.icao_address:06X}",
            "waypoints": [list(w) for w in self.waypoints],
            "etas": list(self.etas),
            "submitter_public_key": self.submitter_public_key.hex(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> FlightPlan:
        return cls(
            registration_id=data["registration_id"],
            waypoints=tuple(tuple(float(x) for x in w) for w in data["waypoints"]),  # type: ignore[misc]
            etas=tuple(float(t) for t in data["etas"]),
            submitter_public_key=bytes.fromhex(data["submitter_public_key"]),
            icao_address=int(data["icao_address"], 16),
        )


def sign_plan(plan: FlightPlan, key: Ed25519PrivateKey) -> bytes:
    return crypto.sign(key, plan.canonical_bytes())


# --- smart contract --------------------------------------------------------


@dataclass(frozen=True)
class RuleSet:
    """Assessment rules. Zones are polygons of ``(lat, lon)`` vertices."""

    altitude_ceiling_m: float | None = None
    restricted_zones: tuple[tuple[tuple[float, float], ...], ...] = ()
    max_duration_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "altitude_ceiling_m": self.altitude_ceiling_m,
            "restricted_zones": [[list(v) for v in z] for z in self.restricted_zones],
            "max_duration_s": self.max_duration_s,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> RuleSet:
        return cls(
            altitude_ceiling_m=data.get("altitude_ceiling_m"),
            restricted_zones=tuple(
                tuple((float(a), float(b)) for a, b in z) for z in data.get("restricted_zones", ())
            ),
            max_duration_s=data.get("max_duration_s"),
        )


@dataclass(frozen=True)
class Verdict:
    approved: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.approved


APPROVE = Verdict(True)


def assess_plan(plan: FlightPlan, rules: RuleSet) -> Verdict:
    """Deterministic rule check; the first failing rule names the rejection."""
    if rules.altitude_ceiling_m is not None:
        if any(alt > rules.altitude_ceiling_m for _, _, alt in plan.waypoints):
            return Verdict(False, "AltitudeViolation")
    if rules.restricted_zones:
        pts = [(lon, lat) for lat, lon, _ in plan.waypoints]
        path = LineString(pts) if len(pts) > 1 else Point(pts[0])
        for zone in rules.restricted_zones:
            if Polygon([(lon, lat) for lat, lon in zone]).intersects(path):
                return Verdict(False, "ZoneViolation")
    if rules.max_duration_s is not None and plan.duration_s > rules.max_duration_s:
        return Verdict(False, "DurationExceeded")
    return APPROVE


# --- ATM nodes and issuer selection ---------------------------------------


@dataclass(frozen=True)
class AtmNode:
    node_id: str
    position: tuple[float, float]
    recent_latency_ms: float
    signing_key: Ed25519PrivateKey = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.recent_latency_ms < 0:
            raise ValueError("latency must be non-negative")

    @classmethod
    def from_seed(cls, node_id: str, position: tuple[float, float], latency_ms: float, seed: int) -> AtmNode:
        return cls(node_id, position, latency_ms, crypto.signing_key(seed, f"node:{node_id}"))

    @property
    def public_key(self) -> bytes:
        return crypto.public_bytes(self.signing_key)

    def sign(self, message: bytes) -> bytes:
        return crypto.sign(self.signing_key, message)


def local_distance_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Euclidean distance after an equirectangular projection about the midpoint."""
    lat0 = math.radians((a[0] + b[0]) / 2)
    dx = math.radians(b[1] - a[1]) * math.cos(lat0)
    dy = math.radians(b[0] - a[0])
    return EARTH_RADIUS_KM * math.hypot(dx, dy)


def issuer_score(node: AtmNode, takeoff: tuple[float, float]) -> float:
    """``1 / (D + L + 1)`` with D in km and L (mean issuance latency) in seconds."""
    d = local_distance_km(node.position, takeoff)
    return 1.0 / (d + node.recent_latency_ms / 1000.0 + 1.0)


def select_issuer(
    nodes: Iterable[AtmNode], takeoff: tuple[float, float], rng_seed: int, top: int = ISSUER_SHORTLIST
) -> AtmNode:
    ranked = sorted(nodes, key=lambda n: (-issuer_score(n, takeoff), n.node_id))
    if not ranked:
        raise NoNodes("no ATM nodes to choose an issuer from")
    shortlist = ranked[:top]
    return shortlist[SplitMix64(derive_seed(rng_seed, 0x155)).randbelow(len(shortlist))]


# --- credentials -----------------------------------------------------------


@dataclass(frozen=True)
class Challenge:
    """64-bit challenge: 48-bit nonce in the high bits, 16-bit sequence number low."""

    nonce: int
    seq: int

    @property
    def value(self) -> int:
        return (self.nonce << 16) | self.seq

    @classmethod
    def from_value(cls, value: int) -> Challenge:
        return cls(value >> 16, value & 0xFFFF)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(8, "big")


@dataclass(frozen=True)
class AuthCredential:
    sk_p: bytes
    id_fp: bytes
    challenge: Challenge
    issuer_id: str
    signature: bytes
    params: FrameParams
    matrix_seed: int
    icao_address: int

    @property
    def matrix_spec(self) -> tuple[int, int, int]:
        return self.params.k, self.params.n_columns, self.matrix_seed

    @cached_property
    def _matrix(self) -> GenerationMatrix:
        return generate_matrix(*self.matrix_spec)

    def matrix(self) -> GenerationMatrix:
        """The generation matrix, rebuilt once per credential object."""
        return self._matrix

    def body_bytes(self) -> bytes:
        p = self.params
        return b"".join(
            [
                self.sk_p,
                self.id_fp,
                self.challenge.to_bytes(),
                _lp(self.issuer_id.encode("utf-8")),
                struct.pack(">IIId", p.payload_bits, p.symbol_bits, p.n_columns, p.redundancy),
                struct.pack(">QI", self.matrix_seed, self.icao_address),
            ]
        )

    def to_bytes(self) -> bytes:
        return self.body_bytes() + _lp(self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> AuthCredential:
        r = _Reader(data)
        sk_p = r.take(16)
        id_fp = r.take(HASH_BYTES)
        (challenge,) = r.unpack(">Q")
        issuer_id = r.lp().decode("utf-8")
        m, lc, n, red = r.unpack(">IIId")
        seed, icao = r.unpack(">QI")
        signature = r.lp()
        r.done()
        return cls(
            sk_p, id_fp, Challenge.from_value(challenge), issuer_id, signature,
            FrameParams(m, lc, n, red), seed, icao,
        )

    def verify(self, issuer_public_key: bytes | Ed25519PublicKey) -> bool:
        return crypto.verify(issuer_public_key, self.signature, self.body_bytes())


def issue_credential(
    plan: FlightPlan, verdict: Verdict, issuer: AtmNode, params: FrameParams, seed: int | None = None
) -> AuthCredential:
    """Build and sign the credential for an approved plan.

    With a seed, the session key, challenge nonce and matrix seed all follow
    from it; without one they come from the OS entropy pool.
    """
    if not verdict.approved:
        raise NotApproved(f"plan {plan.registration_id} was rejected: {verdict.reason}")
    violations = validate_params(params)
    if violations:
        raise ParamViolation(violations)
    if seed is None:
        material = os.urandom(32)
    else:
        material = crypto.seed_bytes("credential", seed, 32)
    sk_p = material[:16]
    nonce = int.from_bytes(material[16:22], "big")
    matrix_seed = int.from_bytes(material[22:30], "big")
    unsigned = AuthCredential(
        sk_p, plan.digest(), Challenge(nonce, 0), issuer.node_id, b"", params, matrix_seed, plan.icao_address
    )
    return AuthCredential(
        unsigned.sk_p, unsigned.id_fp, unsigned.challenge, unsigned.issuer_id,
        issuer.sign(unsigned.body_bytes()), params, matrix_seed, plan.icao_address,
    )


def seal_credential(cred: AuthCredential, recipient_public_key: bytes | X25519PublicKey) -> bytes:
    return crypto.seal(cred.to_bytes(), recipient_public_key)


def unseal_credential(sealed: bytes, recipient_private_key: X25519PrivateKey) -> AuthCredential:
    plain = crypto.unseal(sealed, recipient_private_key)
    try:
        return AuthCredential.from_bytes(plain)
    except (ValueError, struct.error) as exc:
        raise DecryptFailure("sealed credential is malformed") from exc


# --- chain -----------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    kind: str
    payload: bytes
    signer: str
    signature: bytes
    hash: bytes

    @staticmethod
    def header_bytes(index: int, prev_hash: bytes, kind: str, payload: bytes, signer: str) -> bytes:
        return b"".join(
            [struct.pack(">Q", index), prev_hash, _lp(kind.encode()), _lp(payload), _lp(signer.encode())]
        )

    @staticmethod
    def compute_hash(index: int, prev_hash: bytes, kind: str, payload: bytes, signer: str, signature: bytes) -> bytes:
        return crypto.digest(Block.header_bytes(index, prev_hash, kind, payload, signer) + _lp(signature))

    @classmethod
    def create(cls, index: int, prev_hash: bytes, kind: str, payload: bytes, signer: AtmNode) -> Block:
        sig = signer.sign(cls.header_bytes(index, prev_hash, kind, payload, signer.node_id))
        return cls(
            index, prev_hash, kind, payload, signer.node_id, sig,
            cls.compute_hash(index, prev_hash, kind, payload, signer.node_id, sig),
        )

    def to_line(self) -> str:
        return json.dumps(
            {
                "index": self.index,
                "prev_hash": self.prev_hash.hex(),
                "kind": self.kind,
                "payload": self.payload.hex(),
                "signer": self.signer,
                "signature": self.signature.hex(),
                "hash": self.hash.hex(),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_line(cls, line: str) -> Block:
        d = json.loads(line)
        return cls(
            int(d["index"]), bytes.fromhex(d["prev_hash"]), d["kind"], bytes.fromhex(d["payload"]),
            d["signer"], bytes.fromhex(d["signature"]), bytes.fromhex(d["hash"]),
        )


class Chain:
    """Append-only block log; appends are serialised by a lock."""

    def __init__(self, members: Mapping[str, bytes], blocks: Iterable[Block] = ()) -> None:
        self.members = dict(members)
        self._blocks: list[Block] = list(blocks)
        self._lock = threading.Lock()

    @classmethod
    def create(cls, nodes: Sequence[AtmNode], founder: AtmNode | None = None) -> Chain:
        chain = cls({n.node_id: n.public_key for n in nodes})
        founder = founder or nodes[0]
        chain.append("Genesis", b"ATM ledger genesis", founder)
        return chain

    def append(self, kind: str, payload: bytes, signer: AtmNode) -> Block:
        if kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {kind!r}")
        if signer.node_id not in self.members:
            raise UnknownSigner(f"{signer.node_id} is not a ledger member")
        with self._lock:
            prev = self._blocks[-1].hash if self._blocks else GENESIS_PREV
            block = Block.create(len(self._blocks), prev, kind, payload, signer)
            self._blocks.append(block)
        return block

    @property
    def blocks(self) -> list[Block]:
        return list(self._blocks)

    def replace(self, index: int, block: Block) -> None:
        """Overwrite a block in place. Only for tamper simulations."""
        with self._lock:
            self._blocks[index] = block

    def __len__(self) -> int:
        return len(self._blocks)

    def __getitem__(self, index: int) -> Block:
        return self._blocks[index]

    def __iter__(self) -> Iterator[Block]:
        return iter(list(self._blocks))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(b.to_line() + "\n" for b in self._blocks), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, members: Mapping[str, bytes]) -> Chain:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(members, (Block.from_line(line) for line in lines if line.strip()))


def verify_chain(chain: Chain) -> int | None:
    """Index of the first block failing a link, hash or signature check; None if all pass."""
    prev = GENESIS_PREV
    for pos, b in enumerate(chain):
        key = chain.members.get(b.signer)
        ok = (
            b.index == pos
            and b.prev_hash == prev
            and b.kind in BLOCK_KINDS
            and (pos == 0) == (b.kind == "Genesis")
            and b.hash == Block.compute_hash(b.index, b.prev_hash, b.kind, b.payload, b.signer, b.signature)
            and key is not None
            and crypto.verify(key, b.signature, Block.header_bytes(b.index, b.prev_hash, b.kind, b.payload, b.signer))
        )
        if not ok:
            return pos
        prev = b.hash
    return None


# --- block payloads --------------------------------------------------------


def plan_submitted_payload(plan: FlightPlan, signature: bytes) -> bytes:
    return _lp(plan.canonical_bytes()) + _lp(signature)


def plan_assessed_payload(id_fp: bytes, verdict: Verdict) -> bytes:
    return id_fp + bytes([verdict.approved]) + _lp((verdict.reason or "").encode())


def enroute_payload(id_fp: bytes, icao: int, challenge: Challenge, event: str) -> bytes:
    return id_fp + struct.pack(">IQ", icao, challenge.value) + _lp(event.encode())


def decode_enroute_payload(payload: bytes) -> tuple[bytes, int, Challenge, str]:
    r = _Reader(payload)
    id_fp = r.take(HASH_BYTES)
    icao, challenge = r.unpack(">IQ")
    event = r.lp().decode()
    r.done()
    return id_fp, icao, Challenge.from_value(challenge), event


def submit_plan(plan: FlightPlan, signature: bytes, chain: Chain, via: AtmNode) -> int:
    """Check the operator's signature and record the plan; returns the block index."""
    problems = plan.problems()
    if problems:
        raise MalformedPlan("; ".join(problems))
    if not crypto.verify(plan.submitter_public_key, signature, plan.canonical_bytes()):
        raise BadSignature(f"plan {plan.registration_id} is not signed by its submitter key")
    return chain.append("PlanSubmitted", plan_submitted_payload(plan, signature), via).index


class AtmNetwork:
    """The ATM facilities sharing one chain, plus the ICAO -> credential index."""

    def __init__(self, nodes: Sequence[AtmNode], chain: Chain | None = None, rules: RuleSet | None = None) -> None:
        if not nodes:
            raise NoNodes("an ATM network needs at least one node")
        self.nodes = {n.node_id: n for n in nodes}
        self.chain = chain if chain is not None else Chain.create(nodes)
        self.rules = rules or RuleSet()
        self.credentials: dict[int, AuthCredential] = {}
        for block in self.chain:
            if block.kind == "CredentialIssued":
                cred = AuthCredential.from_bytes(block.payload)
                self.credentials[cred.icao_address] = cred

    @property
    def gateway(self) -> AtmNode:
        return next(iter(self.nodes.values()))

    def submit(self, plan: FlightPlan, signature: bytes) -> int:
        return submit_plan(plan, signature, self.chain, self.gateway)

    def assess(self, plan: FlightPlan) -> Verdict:
        verdict = assess_plan(plan, self.rules)
        self.chain.append("PlanAssessed", plan_assessed_payload(plan.digest(), verdict), self.gateway)
        return verdict

    def issue(self, plan: FlightPlan, verdict: Verdict, params: FrameParams, seed: int | None = None) -> AuthCredential:
        pick_seed = seed if seed is not None else int.from_bytes(os.urandom(8), "big")
        issuer = select_issuer(self.nodes.values(), plan.takeoff, pick_seed)
        cred = issue_credential(plan, verdict, issuer, params, seed)
        self.chain.append("CredentialIssued", cred.to_bytes(), issuer)
        self.credentials[cred.icao_address] = cred
        return cred

    def issuer_key(self, cred: AuthCredential) -> bytes:
        return self.chain.members[cred.issuer_id]

    def record(self, id_fp: bytes, icao: int, challenge: Challenge, event: str) -> Block:
        return self.chain.append("EnRouteVerdict", enroute_payload(id_fp, icao, challenge, event), self.gateway)
