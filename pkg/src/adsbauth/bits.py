"""Fixed-width bit strings backed by Python ints (MSB first)."""

from __future__ import annotations

from typing import NamedTuple


class Bits(NamedTuple):
    value: int
    nbits: int

    @classmethod
    def from_bytes(cls, data: bytes) -> Bits:
        return cls(int.from_bytes(data, "big"), 8 * len(data))

    @classmethod
    def from_str(cls, text: str) -> Bits:
        """Parse a string of ``0``/``1`` characters."""
        text = text.replace("_", "").replace(" ", "")
        if text and set(text) - {"0", "1"}:
            raise ValueError(f"not a binary string: {text!r}")
        return cls(int(text, 2) if text else 0, len(text))

    def to_bytes(self) -> bytes:
        if self.nbits % 8:
            raise ValueError(f"{self.nbits} bits is not a whole number of bytes")
        return self.value.to_bytes(self.nbits // 8, "big")

    def __str__(self) -> str:
        return format(self.value, f"0{self.nbits}b") if self.nbits else ""

    def concat(self, other: Bits) -> Bits:
        return Bits((self.value << other.nbits) | other.value, self.nbits + other.nbits)

    def slice(self, start: int, length: int) -> int:
        """Integer value of ``length`` bits beginning ``start`` bits from the MSB."""
        shift = self.nbits - start - length
        if start < 0 or length < 0 or shift < 0:
            raise ValueError("slice outside bit string")
        return (self.value >> shift) & ((1 << length) - 1)

    def check(self) -> Bits:
        if self.nbits < 0 or self.value < 0 or self.value >> self.nbits:
            raise ValueError(f"value does not fit in {self.nbits} bits")
        return self
