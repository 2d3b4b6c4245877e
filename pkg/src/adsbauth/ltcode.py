"""LT fountain code over GF(2).

The payload is split into ``k`` equal symbols ``C_0 .. C_{k-1}``.  A
:class:`GenerationMatrix` holds ``n`` binary columns of height ``k``; column
``j`` is stored as an int whose bit ``i`` selects symbol ``C_i``.  Droplet
``j`` is the XOR of the selected symbols.  Receivers rebuild the payload from
any set of droplets whose columns span GF(2)^k, either by Gaussian
elimination or by peeling (belief propagation on the erasure channel).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from ._rng import SplitMix64, derive_seed
from .bits import Bits
from .errors import AdsbAuthError

SOLITON_C = 0.1
SOLITON_DELTA = 0.5


class LTCodeError(AdsbAuthError):
    pass


class NotMultiple(LTCodeError):
    pass


class EmptyPayload(LTCodeError):
    pass


class BadShape(LTCodeError):
    pass


class IndexOutOfRange(LTCodeError):
    pass


class InsufficientRank(LTCodeError):
    def __init__(self, rank: int, k: int) -> None:
        super().__init__(f"received columns have rank {rank} < {k}")
        self.rank = rank
        self.k = k


class Stalled(LTCodeError):
    def __init__(self, resolved: int, k: int) -> None:
        super().__init__(f"peeling stalled after resolving {resolved} of {k} symbols")
        self.resolved = resolved
        self.k = k


class DataConflict(LTCodeError):
    """Two droplets claim the same column but carry different data."""

    def __init__(self, column_index: int) -> None:
        super().__init__(f"conflicting data for column {column_index}")
        self.column_index = column_index


@dataclass(frozen=True)
class SymbolVector:
    symbols: tuple[int, ...]
    symbol_size: int

    def __post_init__(self) -> None:
        if not self.symbols:
            raise EmptyPayload("a symbol vector needs at least one symbol")
        if self.symbol_size <= 0:
            raise ValueError("symbol_size must be positive")
        limit = 1 << self.symbol_size
        if any(s < 0 or s >= limit for s in self.symbols):
            raise ValueError(f"symbol does not fit in {self.symbol_size} bits")

    @property
    def k(self) -> int:
        return len(self.symbols)

    def join(self) -> Bits:
        value = 0
        for s in self.symbols:
            value = (value << self.symbol_size) | s
        return Bits(value, self.k * self.symbol_size)

    def __xor__(self, other: SymbolVector) -> SymbolVector:
        if self.symbol_size != other.symbol_size or self.k != other.k:
            raise ValueError("symbol vectors differ in shape")
        return SymbolVector(tuple(a ^ b for a, b in zip(self.symbols, other.symbols)), self.symbol_size)


@dataclass(frozen=True)
class Droplet:
    column_index: int
    data: int
    symbol_size: int

    def __post_init__(self) -> None:
        if self.column_index < 0:
            raise IndexOutOfRange(f"negative column index {self.column_index}")
        if self.data < 0 or self.data >> self.symbol_size:
            raise ValueError(f"droplet data does not fit in {self.symbol_size} bits")


def segment_payload(payload: Bits | bytes, symbol_size: int) -> SymbolVector:
    """Split a payload into ``M / symbol_size`` symbols, most significant first."""
    if isinstance(payload, (bytes, bytearray)):
        payload = Bits.from_bytes(bytes(payload))
    if symbol_size <= 0:
        raise ValueError("symbol_size must be positive")
    if payload.nbits == 0:
        raise EmptyPayload("payload is empty")
    if payload.nbits % symbol_size:
        raise NotMultiple(f"payload length {payload.nbits} is not a multiple of {symbol_size}")
    k = payload.nbits // symbol_size
    mask = (1 << symbol_size) - 1
    value = payload.value
    symbols = [(value >> (symbol_size * (k - 1 - i))) & mask for i in range(k)]
    return SymbolVector(tuple(symbols), symbol_size)


# --- degree distribution -------------------------------------------------


@lru_cache(maxsize=64)
def robust_soliton(k: int, c: float = SOLITON_C, delta: float = SOLITON_DELTA) -> tuple[float, ...]:
    """Probabilities of degrees ``1..k`` under the robust soliton distribution."""
    if k < 1:
        raise ValueError("k must be positive")
    rho = [0.0] * (k + 1)
    rho[1] = 1.0 / k
    for d in range(2, k + 1):
        rho[d] = 1.0 / (d * (d - 1))
    spread = c * math.log(k / delta) * math.sqrt(k)
    tau = [0.0] * (k + 1)
    if spread > 0:
        spike = min(k, max(1, int(k / spread)))
        for d in range(1, spike):
            tau[d] = spread / (d * k)
        # spread < delta makes the log negative for tiny k; drop the spike then
        tau[spike] += max(0.0, spread * math.log(spread / delta) / k)
    weights = [rho[d] + tau[d] for d in range(1, k + 1)]
    total = math.fsum(weights)
    return tuple(w / total for w in weights)


@lru_cache(maxsize=64)
def _degree_cdf(k: int) -> tuple[float, ...]:
    acc = 0.0
    cdf = []
    for p in robust_soliton(k):
        acc += p
        cdf.append(acc)
    cdf[-1] = 1.0
    return tuple(cdf)


def _draw_column(k: int, seed: int, j: int) -> int:
    """Column ``j``: one uniform draw picks the degree, Floyd's algorithm picks the rows."""
    rng = SplitMix64(derive_seed(seed, j))
    degree = min(k, bisect.bisect_right(_degree_cdf(k), rng.random()) + 1)
    chosen: set[int] = set()
    for top in range(k - degree, k):
        r = rng.randbelow(top + 1)
        chosen.add(top if r in chosen else r)
    mask = 0
    for r in chosen:
        mask |= 1 << r
    return mask


# --- GF(2) elimination ---------------------------------------------------


class Eliminator:
    """Incremental GF(2) row reduction keyed by highest set bit.

    Each accepted vector is stored reduced against earlier pivots together with
    the matching XOR of right-hand sides, so solving is a single sweep once the
    rank is full.
    """

    __slots__ = ("k", "pivots")

    def __init__(self, k: int) -> None:
        self.k = k
        self.pivots: dict[int, tuple[int, int]] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def add(self, mask: int, rhs: int = 0) -> bool:
        """Insert a vector; return True when it raised the rank."""
        pivots = self.pivots
        while mask:
            p = mask.bit_length() - 1
            hit = pivots.get(p)
            if hit is None:
                pivots[p] = (mask, rhs)
                return True
            mask ^= hit[0]
            rhs ^= hit[1]
        return False

    def solve(self) -> list[int]:
        if self.rank < self.k:
            raise InsufficientRank(self.rank, self.k)
        values = [0] * self.k
        for p in range(self.k):
            mask, rhs = self.pivots[p]
            rest = mask ^ (1 << p)
            while rest:
                low = rest & -rest
                rhs ^= values[low.bit_length() - 1]
                rest ^= low
            values[p] = rhs
        return values


def gf2_rank(vectors: Iterable[int]) -> int:
    elim = Eliminator(0)
    for v in vectors:
        elim.add(v)
    return elim.rank


def _force_full_rank(columns: Sequence[int], k: int) -> list[int]:
    """Swap redundant columns for unit vectors until the rank reaches ``k``.

    Columns that add nothing to the span are replaced lowest degree first (ties
    by index); unit vectors ``e_0, e_1, ...`` are taken in order, skipping any
    already in the span.
    """
    cols = list(columns)
    elim = Eliminator(k)
    redundant = [j for j, c in enumerate(cols) if not elim.add(c)]
    if elim.rank == k:
        return cols
    needed = k - elim.rank
    if len(redundant) < needed:
        raise BadShape(f"{len(cols)} columns cannot reach rank {k}")
    redundant.sort(key=lambda j: (bin(cols[j]).count("1"), j))
    slots = iter(redundant)
    for i in range(k):
        if elim.rank == k:
            break
        if elim.add(1 << i):
            cols[next(slots)] = 1 << i
    return cols


@dataclass(frozen=True)
class GenerationMatrix:
    """K x N binary LT generation matrix, rebuilt bit-exactly from ``(k, n, seed)``.

    Columns are derived one at a time from ``derive_seed(seed, j)`` and cached on
    first access, so a lossy session only ever materialises the columns that
    were delivered.  ``overrides`` holds columns replaced by the full-rank repair.
    """

    k: int
    n: int
    seed: int
    overrides: dict[int, int] = field(default_factory=dict, repr=False, compare=False)
    _cache: dict[int, int] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_columns(cls, columns: Sequence[int], k: int) -> GenerationMatrix:
        """Explicit matrix (no shape or rank checks); mainly for hand-built cases."""
        if any(c < 0 or c >> k for c in columns):
            raise ValueError(f"column does not fit in {k} rows")
        return cls(k, len(columns), 0, dict(enumerate(columns)))

    def column(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise IndexOutOfRange(f"column {j} outside [0, {self.n})")
        col = self._cache.get(j)
        if col is None:
            col = self.overrides.get(j)
            if col is None:
                col = _draw_column(self.k, self.seed, j)
            self._cache[j] = col
        return col

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(self.column(j) for j in range(self.n))

    def degree(self, j: int) -> int:
        return bin(self.column(j)).count("1")

    def entry(self, i: int, j: int) -> int:
        return (self.column(j) >> i) & 1

    def to_rows(self) -> list[list[int]]:
        cols = self.columns
        return [[(c >> i) & 1 for c in cols] for i in range(self.k)]

    def rank(self) -> int:
        elim = Eliminator(self.k)
        for j in range(self.n):
            elim.add(self.column(j))
            if elim.rank == self.k:
                break
        return elim.rank


def generate_matrix(k: int, n: int, seed: int) -> GenerationMatrix:
    """Deterministic full-row-rank LT matrix with robust-soliton column degrees."""
    if k < 1 or n <= k:
        raise BadShape(f"need n > k >= 1, got k={k}, n={n}")
    m = GenerationMatrix(k, n, seed & ((1 << 64) - 1))
    if m.rank() < k:
        drawn = m.columns
        repaired = _force_full_rank(drawn, k)
        overrides = {j: c for j, (c, old) in enumerate(zip(repaired, drawn)) if c != old}
        m = GenerationMatrix(k, n, m.seed, overrides)
    return m


# --- encoding / decoding -------------------------------------------------


def encode_droplet(sv: SymbolVector, m: GenerationMatrix, column_index: int) -> Droplet:
    if sv.k != m.k:
        raise BadShape(f"symbol vector has {sv.k} symbols, matrix expects {m.k}")
    col = m.column(column_index)
    data = 0
    symbols = sv.symbols
    while col:
        low = col & -col
        data ^= symbols[low.bit_length() - 1]
        col ^= low
    return Droplet(column_index, data, sv.symbol_size)


def _unique(droplets: Iterable[Droplet], m: GenerationMatrix) -> tuple[list[Droplet], int]:
    seen: dict[int, Droplet] = {}
    size = None
    for d in droplets:
        if d.column_index >= m.n:
            raise IndexOutOfRange(f"column {d.column_index} outside [0, {m.n})")
        if size is None:
            size = d.symbol_size
        elif d.symbol_size != size:
            raise ValueError("droplets disagree on symbol size")
        prev = seen.get(d.column_index)
        if prev is not None and prev.data != d.data:
            raise DataConflict(d.column_index)
        seen[d.column_index] = d
    return list(seen.values()), size or 0


def rank_of(droplets: Iterable[Droplet], m: GenerationMatrix) -> int:
    elim = Eliminator(m.k)
    for d in droplets:
        elim.add(m.column(d.column_index))
    return elim.rank


def decode_gauss(droplets: Iterable[Droplet], m: GenerationMatrix) -> Bits:
    """Solve the received columns of ``M_LT`` by Gaussian elimination."""
    unique, size = _unique(droplets, m)
    elim = Eliminator(m.k)
    for d in unique:
        elim.add(m.column(d.column_index), d.data)
        if elim.rank == m.k:
            break
    return SymbolVector(tuple(elim.solve()), size).join()


def decode_bp(droplets: Iterable[Droplet], m: GenerationMatrix) -> Bits:
    """Peeling decoder: resolve degree-one droplets and substitute into the rest."""
    unique, size = _unique(droplets, m)
    k = m.k
    masks = []
    datas = []
    touching: list[list[int]] = [[] for _ in range(k)]
    ripple = []
    for idx, d in enumerate(unique):
        col = m.column(d.column_index)
        masks.append(col)
        datas.append(d.data)
        rest = col
        while rest:
            low = rest & -rest
            touching[low.bit_length() - 1].append(idx)
            rest ^= low
        if col & (col - 1) == 0:
            ripple.append(idx)

    values: list[int | None] = [None] * k
    resolved = 0
    while ripple:
        idx = ripple.pop()
        col = masks[idx]
        if col == 0:
            continue
        i = col.bit_length() - 1
        if values[i] is not None:
            continue
        value = datas[idx]
        values[i] = value
        resolved += 1
        bit = 1 << i
        for other in touching[i]:
            if masks[other] & bit:
                masks[other] ^= bit
                datas[other] ^= value
                rem = masks[other]
                if rem and rem & (rem - 1) == 0:
                    ripple.append(other)
    if resolved < k:
        raise Stalled(resolved, k)
    return SymbolVector(tuple(values), size).join()  # type: ignore[arg-type]


class DropletSet:
    """Received droplets deduplicated by column, with running GF(2) rank."""

    def __init__(self, m: GenerationMatrix) -> None:
        self.matrix = m
        self._by_column: dict[int, Droplet] = {}
        self._elim = Eliminator(m.k)

    def __len__(self) -> int:
        return len(self._by_column)

    @property
    def rank(self) -> int:
        return self._elim.rank

    @property
    def complete(self) -> bool:
        return self._elim.rank == self.matrix.k

    def droplets(self) -> list[Droplet]:
        return list(self._by_column.values())

    def add(self, droplet: Droplet) -> bool:
        """Store a droplet; False for an exact duplicate, DataConflict for a contradictory one."""
        prev = self._by_column.get(droplet.column_index)
        if prev is not None:
            if prev.data != droplet.data:
                raise DataConflict(droplet.column_index)
            return False
        col = self.matrix.column(droplet.column_index)
        self._by_column[droplet.column_index] = droplet
        self._elim.add(col)
        return True

    def decode(self) -> Bits:
        """Peel first; fall back to elimination when peeling stalls."""
        droplets = self.droplets()
        try:
            return decode_bp(droplets, self.matrix)
        except Stalled:
            return decode_gauss(droplets, self.matrix)
