"""112-bit DF17 extended-squitter authentication frames.

Layout, MSB first::

    DF(5)=17 | CA(3) | ICAO(24) | TC(5) | auth field(51) | PI(24)

The 51-bit auth field carries the encoding hint (the generation-matrix column
index, ``L_h`` bits) followed by the droplet data (``L_C`` bits) and zero
padding.  PI is the Mode S CRC-24 of the first 88 bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .bits import Bits
from .errors import AdsbAuthError
from .ltcode import Droplet

FRAME_BITS = 112
DATA_BITS = 88
AUTH_FIELD_BITS = 51
DF_EXTENDED_SQUITTER = 17
AUTH_TYPE_CODE = 23
DEFAULT_CAPABILITY = 5
CRC24_GENERATOR = 0x1FFF409


class FrameError(AdsbAuthError):
    pass


class ParamViolation(FrameError):
    def __init__(self, violations: list[Violation]) -> None:
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


class IndexOverflow(FrameError):
    pass


class HintOutOfRange(FrameError):
    pass


class CrcMismatch(FrameError):
    pass


class WrongLength(FrameError):
    pass


class WrongDownlinkFormat(FrameError):
    pass


class WrongTypeCode(FrameError):
    pass


class MalformedPadding(FrameError):
    pass


def _make_crc_table() -> tuple[int, ...]:
    poly = CRC24_GENERATOR & 0xFFFFFF
    table = []
    for byte in range(256):
        reg = byte << 16
        for _ in range(8):
            reg = (reg << 1) ^ poly if reg & 0x800000 else reg << 1
        table.append(reg & 0xFFFFFF)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc24(message: int, nbits: int = DATA_BITS) -> int:
    """Mode S parity: remainder of ``message * x^24`` modulo the generator."""
    if nbits % 8 or message < 0 or message >> nbits:
        raise ValueError(f"message must fit in {nbits} bits (whole bytes)")
    reg = 0
    for byte in message.to_bytes(nbits // 8, "big"):
        reg = ((reg << 8) & 0xFFFFFF) ^ _CRC_TABLE[((reg >> 16) ^ byte) & 0xFF]
    return reg


def ceil_log2(x: int | Fraction) -> int:
    """Smallest ``h >= 0`` with ``2**h >= x``; exact for ints and fractions."""
    if x <= 1:
        return 0
    if isinstance(x, int):
        return (x - 1).bit_length()
    h = max(0, math.floor(x).bit_length() - 1)
    while (1 << h) < x:
        h += 1
    return h


@dataclass(frozen=True)
class Violation:
    constraint: str
    lhs: float
    relation: str
    rhs: float

    def __str__(self) -> str:
        return f"{self.constraint}: {self.lhs:g} {self.relation} {self.rhs:g} does not hold"


@dataclass(frozen=True)
class FrameParams:
    payload_bits: int
    symbol_bits: int
    n_columns: int
    redundancy: float

    @property
    def hint_bits(self) -> int:
        return ceil_log2(self.n_columns)

    @property
    def k(self) -> int:
        return self.payload_bits // self.symbol_bits

    @classmethod
    def for_payload(
        cls, payload_bits: int, symbol_bits: int, redundancy: float, *, strict: bool = True
    ) -> FrameParams:
        """Size ``N`` from the redundancy target.

        ``strict`` picks the smallest N with ``N > r0*M/L_C``; otherwise
        ``N = ceil(r0*M/L_C)``, which meets the bound with equality when the
        product is integral.
        """
        target = Fraction(redundancy) * payload_bits / symbol_bits
        n = math.floor(target) + 1 if strict else math.ceil(target)
        return cls(payload_bits, symbol_bits, n, redundancy)


def validate_params(p: FrameParams) -> list[Violation]:
    """Every violated sizing constraint, each with both sides evaluated. Empty means ok."""
    out: list[Violation] = []
    for name in ("payload_bits", "symbol_bits", "n_columns"):
        if getattr(p, name) <= 0:
            out.append(Violation(f"{name} positive", getattr(p, name), ">", 0))
    if out:
        return out
    m, lc, n, h = p.payload_bits, p.symbol_bits, p.n_columns, p.hint_bits
    if not p.redundancy > 1:
        out.append(Violation("redundancy above one", p.redundancy, ">", 1))
    if m % lc:
        out.append(Violation("payload splits into whole symbols", m % lc, "==", 0))
    if not lc < AUTH_FIELD_BITS - h:
        out.append(Violation("symbol strictly narrower than field minus hint", lc, "<", AUTH_FIELD_BITS - h))
    bound = Fraction(p.redundancy) * m / lc
    if not n > bound:
        out.append(Violation("columns exceed redundancy times symbols", n, ">", float(bound)))
    if not AUTH_FIELD_BITS - h >= lc:
        out.append(Violation("hint plus symbol fit the auth field", AUTH_FIELD_BITS - h, ">=", lc))
    return out


@dataclass(frozen=True)
class AuthFrame:
    downlink_format: int
    capability: int
    icao_address: int
    type_code: int
    auth_field: int
    parity: int

    def data_bits(self) -> int:
        """The first 88 bits as an int."""
        v = self.downlink_format
        v = (v << 3) | self.capability
        v = (v << 24) | self.icao_address
        v = (v << 5) | self.type_code
        return (v << AUTH_FIELD_BITS) | self.auth_field

    def to_int(self) -> int:
        return (self.data_bits() << 24) | self.parity

    def to_bits(self) -> Bits:
        return Bits(self.to_int(), FRAME_BITS)

    def to_bytes(self) -> bytes:
        return self.to_int().to_bytes(FRAME_BITS // 8, "big")

    def hex(self) -> str:
        return format(self.to_int(), "028X")

    @classmethod
    def from_int(cls, value: int) -> AuthFrame:
        b = Bits(value, FRAME_BITS)
        return cls(
            downlink_format=b.slice(0, 5),
            capability=b.slice(5, 3),
            icao_address=b.slice(8, 24),
            type_code=b.slice(32, 5),
            auth_field=b.slice(37, AUTH_FIELD_BITS),
            parity=b.slice(88, 24),
        )


def build_frame(
    icao: int,
    droplet: Droplet,
    p: FrameParams,
    *,
    capability: int = DEFAULT_CAPABILITY,
    type_code: int = AUTH_TYPE_CODE,
) -> AuthFrame:
    violations = validate_params(p)
    if violations:
        raise ParamViolation(violations)
    if not 0 <= icao < 1 << 24:
        raise ValueError(f"ICAO address {icao:#x} does not fit in 24 bits")
    h, lc = p.hint_bits, p.symbol_bits
    if droplet.column_index >= 1 << h:
        raise IndexOverflow(f"column {droplet.column_index} needs more than {h} hint bits")
    if droplet.column_index >= p.n_columns:
        raise HintOutOfRange(f"column {droplet.column_index} outside [0, {p.n_columns})")
    if droplet.symbol_size != lc:
        raise ValueError(f"droplet carries {droplet.symbol_size} bits, params say {lc}")
    pad = AUTH_FIELD_BITS - h - lc
    auth_field = ((droplet.column_index << lc) | droplet.data) << pad
    frame = AuthFrame(DF_EXTENDED_SQUITTER, capability, icao, type_code, auth_field, 0)
    return AuthFrame(
        DF_EXTENDED_SQUITTER, capability, icao, type_code, auth_field, crc24(frame.data_bits())
    )


def _frame_int(raw: bytes | str | Bits) -> int:
    if isinstance(raw, Bits):
        nbits, value = raw.nbits, raw.value
    elif isinstance(raw, str):
        text = raw.strip()
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise WrongLength(f"not a hex frame: {text!r}") from exc
        nbits = 4 * len(text)
    else:
        nbits, value = 8 * len(raw), int.from_bytes(raw, "big")
    if nbits != FRAME_BITS:
        raise WrongLength(f"expected {FRAME_BITS} bits, got {nbits}")
    return value


def peek_icao(raw: bytes | str | Bits) -> int:
    """ICAO address of a frame, without checking parity."""
    return (_frame_int(raw) >> (FRAME_BITS - 32)) & 0xFFFFFF


def parse_frame(
    raw: bytes | str | Bits, p: FrameParams, *, type_code: int = AUTH_TYPE_CODE
) -> tuple[int, Droplet]:
    """Inverse of :func:`build_frame`: returns ``(icao, droplet)``."""
    frame = AuthFrame.from_int(_frame_int(raw))
    if crc24(frame.data_bits()) != frame.parity:
        raise CrcMismatch("parity does not match the first 88 bits")
    if frame.downlink_format != DF_EXTENDED_SQUITTER:
        raise WrongDownlinkFormat(f"DF {frame.downlink_format} is not an extended squitter")
    if frame.type_code != type_code:
        raise WrongTypeCode(f"type code {frame.type_code} is not the authentication category")
    h, lc = p.hint_bits, p.symbol_bits
    pad = AUTH_FIELD_BITS - h - lc
    if pad < 0:
        raise ParamViolation(validate_params(p))
    if frame.auth_field & ((1 << pad) - 1):
        raise MalformedPadding("non-zero padding after droplet data")
    body = frame.auth_field >> pad
    column = body >> lc
    if column >= p.n_columns:
        raise HintOutOfRange(f"hint {column} outside [0, {p.n_columns})")
    return frame.icao_address, Droplet(column, body & ((1 << lc) - 1), lc)
