"""En-route broadcast authentication sessions.

The UAS side turns its authentication payload into LT droplets and emits one
DF17 frame per droplet, walking the generation-matrix columns round-robin.
The ATC side collects frames, decodes once the received columns reach rank
``k`` and checks the challenge response against the credential.
"""

from __future__ import annotations

import enum
import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import crypto
from ._rng import SplitMix64, derive_seed
from .bits import Bits
from .errors import AdsbAuthError
from .frame import AUTH_TYPE_CODE, AuthFrame, FrameParams, build_frame, parse_frame, peek_icao
from .ledger import AtmNetwork, AuthCredential, Challenge, Verdict
from .ltcode import DropletSet, GenerationMatrix, encode_droplet, segment_payload

SEQ_MOD = 1 << 16
DEFAULT_FRAMES_PER_SECOND = 2.0


class AuthflowError(AdsbAuthError):
    pass


class SequenceRegression(AuthflowError):
    pass


class MalformedPayload(AuthflowError):
    pass


class PayloadTooLarge(AuthflowError):
    pass


class UnknownAircraft(AuthflowError):
    pass


class ResponseMode(enum.Enum):
    MAC = "mac"
    SIGNATURE = "signature"

    @property
    def response_bytes(self) -> int:
        return crypto.MAC_BYTES if self is ResponseMode.MAC else 64


# --- payload ---------------------------------------------------------------


@dataclass(frozen=True)
class AuthPayload:
    """``id_fp(256) | response | sequence(16) | true_length(16) | zero pad``."""

    id_fp: bytes
    response: bytes
    sequence_number: int

    @property
    def true_length(self) -> int:
        return 8 * (len(self.id_fp) + len(self.response)) + 32

    def encode(self, payload_bits: int) -> Bits:
        if self.true_length > payload_bits:
            raise PayloadTooLarge(f"{self.true_length}-bit payload exceeds M = {payload_bits}")
        head = self.id_fp + self.response + struct.pack(">HH", self.sequence_number, self.true_length)
        return Bits(int.from_bytes(head, "big") << (payload_bits - self.true_length), payload_bits)

    @classmethod
    def decode(cls, bits: Bits, mode: ResponseMode = ResponseMode.MAC) -> AuthPayload:
        nbytes = 32 + mode.response_bytes + 4
        if bits.nbits < 8 * nbytes:
            raise MalformedPayload(f"{bits.nbits} bits cannot hold a {mode.value} payload")
        pad = bits.nbits - 8 * nbytes
        if bits.value & ((1 << pad) - 1):
            raise MalformedPayload("non-zero padding")
        head = (bits.value >> pad).to_bytes(nbytes, "big")
        seq, true_length = struct.unpack(">HH", head[-4:])
        if true_length != 8 * nbytes:
            raise MalformedPayload(f"true_length {true_length} does not match the {mode.value} layout")
        return cls(head[:32], head[32 : 32 + mode.response_bytes], seq)


def response_message(challenge: Challenge, id_fp: bytes, seq: int) -> bytes:
    return challenge.to_bytes() + id_fp + struct.pack(">H", seq)


def make_payload(
    cred: AuthCredential,
    challenge: Challenge,
    mode: ResponseMode = ResponseMode.MAC,
    signing_key: Ed25519PrivateKey | None = None,
) -> AuthPayload:
    msg = response_message(challenge, cred.id_fp, challenge.seq)
    if mode is ResponseMode.MAC:
        response = crypto.mac(cred.sk_p, msg)
    else:
        if signing_key is None:
            raise ValueError("signature mode needs the operator's signing key")
        response = crypto.sign(signing_key, msg)
    return AuthPayload(cred.id_fp, response, challenge.seq)


# --- challenges ------------------------------------------------------------


def rotate_challenge(current: Challenge, new_seq: int, seed: int) -> Challenge:
    """Fresh nonce under a strictly later sequence number (mod 2**16 half-window)."""
    step = (new_seq - current.seq) % SEQ_MOD
    if not 0 < step < SEQ_MOD // 2:
        raise SequenceRegression(f"sequence {new_seq} does not follow {current.seq}")
    nonce = SplitMix64(derive_seed(seed, current.value, new_seq)).next_u64() >> 16
    return Challenge(nonce, new_seq % SEQ_MOD)


class ChallengeWindow:
    """The last ``width`` challenges; payloads answering older ones are stale."""

    def __init__(self, initial: Challenge, width: int = 1) -> None:
        if width < 1:
            raise ValueError("window width must be >= 1")
        self._recent: deque[Challenge] = deque([initial], maxlen=width)

    @property
    def current(self) -> Challenge:
        return self._recent[-1]

    def push(self, challenge: Challenge) -> None:
        self._recent.append(challenge)

    def lookup(self, seq: int) -> Challenge | None:
        for ch in self._recent:
            if ch.seq == seq:
                return ch
        return None


def verify_payload(
    p: AuthPayload,
    cred: AuthCredential,
    window: ChallengeWindow,
    *,
    mode: ResponseMode = ResponseMode.MAC,
    uas_public_key: bytes | None = None,
) -> Verdict:
    if p.id_fp != cred.id_fp:
        return Verdict(False, "WrongFlightPlan")
    challenge = window.lookup(p.sequence_number)
    if challenge is None:
        return Verdict(False, "StaleSequence")
    msg = response_message(challenge, cred.id_fp, p.sequence_number)
    if mode is ResponseMode.MAC:
        ok = crypto.mac_equal(p.response, crypto.mac(cred.sk_p, msg))
    else:
        ok = uas_public_key is not None and crypto.verify(uas_public_key, p.response, msg)
    return Verdict(True) if ok else Verdict(False, "BadResponse")


# --- sessions --------------------------------------------------------------


class UasSession:
    """Round-robin droplet broadcaster for one payload epoch at a time."""

    def __init__(
        self,
        matrix: GenerationMatrix,
        params: FrameParams,
        icao: int,
        payload: Bits,
        *,
        type_code: int = AUTH_TYPE_CODE,
        frames_per_second: float = DEFAULT_FRAMES_PER_SECOND,
    ) -> None:
        self.matrix = matrix
        self.params = params
        self.icao = icao
        self.type_code = type_code
        self.frames_per_second = frames_per_second
        self.epoch = -1
        self.sent = 0
        self.credential: AuthCredential | None = None
        self.mode = ResponseMode.MAC
        self.signing_key: Ed25519PrivateKey | None = None
        self.challenge: Challenge | None = None
        self.load_payload(payload)

    @classmethod
    def from_credential(
        cls,
        cred: AuthCredential,
        *,
        mode: ResponseMode = ResponseMode.MAC,
        signing_key: Ed25519PrivateKey | None = None,
        **kwargs,
    ) -> UasSession:
        payload = make_payload(cred, cred.challenge, mode, signing_key).encode(cred.params.payload_bits)
        session = cls(cred.matrix(), cred.params, cred.icao_address, payload, **kwargs)
        session.credential = cred
        session.mode = mode
        session.signing_key = signing_key
        session.challenge = cred.challenge
        return session

    def load_payload(self, payload: Bits) -> None:
        """Start a new epoch: re-segment and restart the column cursor at 0."""
        if payload.nbits != self.params.payload_bits:
            raise PayloadTooLarge(f"payload is {payload.nbits} bits, params say {self.params.payload_bits}")
        self.payload = payload
        self.symbols = segment_payload(payload, self.params.symbol_bits)
        self.cursor = 0
        self.epoch += 1

    def answer(self, challenge: Challenge) -> None:
        """Re-derive the response for a rotated challenge and start a new epoch."""
        if self.credential is None:
            raise AuthflowError("session was not built from a credential")
        self.challenge = challenge
        payload = make_payload(self.credential, challenge, self.mode, self.signing_key)
        self.load_payload(payload.encode(self.params.payload_bits))

    def _advance(self) -> int:
        j = self.cursor
        self.cursor += 1
        self.sent += 1
        if self.cursor == self.matrix.n:
            self.cursor = 0
        return j

    def next_frame(self) -> AuthFrame:
        droplet = encode_droplet(self.symbols, self.matrix, self._advance())
        return build_frame(self.icao, droplet, self.params, type_code=self.type_code)

    def skip(self, count: int) -> None:
        """Account for ``count`` broadcasts nobody received without encoding them."""
        if count < 0:
            raise ValueError("count must be >= 0")
        self.sent += count
        self.cursor = (self.cursor + count) % self.matrix.n

    @property
    def elapsed_s(self) -> float:
        return self.sent / self.frames_per_second


def uas_next_frame(session: UasSession) -> AuthFrame:
    return session.next_frame()


@dataclass(frozen=True)
class Pending:
    rank: int


@dataclass(frozen=True)
class Decoded:
    bits: Bits
    payload: AuthPayload | None
    error: str | None = None


class AtcSession:
    """Collects one aircraft's frames and verifies its decoded payload."""

    def __init__(
        self,
        matrix: GenerationMatrix,
        params: FrameParams,
        icao: int,
        *,
        type_code: int = AUTH_TYPE_CODE,
    ) -> None:
        self.matrix = matrix
        self.params = params
        self.icao = icao
        self.type_code = type_code
        self.credential: AuthCredential | None = None
        self.window: ChallengeWindow | None = None
        self.mode = ResponseMode.MAC
        self.uas_public_key: bytes | None = None
        self.network: AtmNetwork | None = None
        self.reset()

    @classmethod
    def from_credential(
        cls,
        cred: AuthCredential,
        *,
        window_width: int = 1,
        mode: ResponseMode = ResponseMode.MAC,
        uas_public_key: bytes | None = None,
        network: AtmNetwork | None = None,
        **kwargs,
    ) -> AtcSession:
        session = cls(cred.matrix(), cred.params, cred.icao_address, **kwargs)
        session.credential = cred
        session.window = ChallengeWindow(cred.challenge, window_width)
        session.mode = mode
        session.uas_public_key = uas_public_key
        session.network = network
        return session

    def reset(self) -> None:
        self.collected = DropletSet(self.matrix)
        self.received = 0
        self.result: Decoded | None = None

    def ingest(self, raw: bytes | str | Bits | AuthFrame) -> Pending | Decoded:
        if isinstance(raw, AuthFrame):
            raw = raw.to_bits()
        icao, droplet = parse_frame(raw, self.params, type_code=self.type_code)
        if icao != self.icao:
            raise UnknownAircraft(f"frame from {icao:06X} routed to session {self.icao:06X}")
        self.received += 1
        self.collected.add(droplet)
        if self.result is not None:
            return self.result
        if not self.collected.complete:
            return Pending(self.collected.rank)
        bits = self.collected.decode()
        payload, error = None, None
        if self.credential is not None:
            try:
                payload = AuthPayload.decode(bits, self.mode)
            except MalformedPayload as exc:
                error = str(exc)
        self.result = Decoded(bits, payload, error)
        return self.result

    def verify(self, decoded: Decoded) -> Verdict:
        if self.credential is None or self.window is None:
            raise AuthflowError("session was not built from a credential")
        if decoded.payload is None:
            verdict = Verdict(False, "MalformedPayload")
        else:
            verdict = verify_payload(
                decoded.payload, self.credential, self.window, mode=self.mode, uas_public_key=self.uas_public_key
            )
        if self.network is not None:
            event = "accept" if verdict.approved else f"reject:{verdict.reason}"
            self.network.record(self.credential.id_fp, self.icao, self.window.current, event)
        return verdict

    def rotate_challenge(self, new_seq: int, seed: int) -> Challenge:
        """Issue the next challenge; frames collected so far belong to the old epoch."""
        if self.window is None or self.credential is None:
            raise AuthflowError("session was not built from a credential")
        challenge = rotate_challenge(self.window.current, new_seq, seed)
        self.window.push(challenge)
        self.reset()
        if self.network is not None:
            self.network.record(self.credential.id_fp, self.icao, challenge, "rotate")
        return challenge


def atc_ingest(session: AtcSession, bits: bytes | str | Bits | AuthFrame) -> Pending | Decoded:
    return session.ingest(bits)


class AtcFacility:
    """Routes incoming frames to per-aircraft sessions by ICAO address."""

    def __init__(self, credentials: Mapping[int, AuthCredential] | None = None, **session_kwargs) -> None:
        self.session_kwargs = session_kwargs
        self.sessions: dict[int, AtcSession] = {}
        for cred in (credentials or {}).values():
            self.register(cred)

    def register(self, cred: AuthCredential) -> AtcSession:
        session = AtcSession.from_credential(cred, **self.session_kwargs)
        self.sessions[cred.icao_address] = session
        return session

    def ingest(self, raw: bytes | str | Bits) -> tuple[int, Pending | Decoded]:
        if isinstance(raw, AuthFrame):
            raw = raw.to_bits()
        icao = peek_icao(raw)
        session = self.sessions.get(icao)
        if session is None:
            raise UnknownAircraft(f"no credential registered for {icao:06X}")
        return icao, session.ingest(raw)


def write_transcript(frames: Iterable[AuthFrame | str], path: str | Path) -> None:
    lines = [f.hex() if isinstance(f, AuthFrame) else f.upper() for f in frames]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_transcript(path: str | Path) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
