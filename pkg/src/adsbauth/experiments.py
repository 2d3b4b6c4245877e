"""Monte Carlo sweeps over loss rate and distance, and the sizing report.

Every trial issues its own credential (so its own generation matrix), first
runs a loss-free session to measure ``N0``, then replays the UAS -> channel ->
ATC session at each grid point.  Per-trial redundancy is
``r0* = N_PLR / N0`` where ``N_PLR`` counts every broadcast up to the frame
that completes decoding, lost ones included.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from ._rng import SplitMix64, derive_seed
from .authflow import AtcSession, Decoded, UasSession
from .bits import Bits
from .channel import ChannelModel, Transmission, plr_at
from .crypto import MAC_BYTES
from .errors import AdsbAuthError
from .frame import AUTH_FIELD_BITS, FrameParams, ceil_log2, validate_params
from .ledger import APPROVE, AtmNode, AuthCredential, FlightPlan, issue_credential
from .ltcode import generate_matrix

DEFAULT_PAYLOAD_SIZES = (256, 512, 1024, 2048)
DEFAULT_PLR_GRID = (0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)
DEFAULT_DISTANCE_GRID = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)
MAC_PAYLOAD_BITS = 8 * (32 + MAC_BYTES) + 32


class ConfigInvalid(AdsbAuthError, ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    payload_sizes_bits: tuple[int, ...] = DEFAULT_PAYLOAD_SIZES
    symbol_bits: int = 16
    plr_grid: tuple[float, ...] = DEFAULT_PLR_GRID
    distance_grid: tuple[float, ...] = DEFAULT_DISTANCE_GRID
    trials: int = 1000
    seed: int = 0
    redundancy: float = 3.25
    n_columns: int | None = None
    cap_factor: int = 64
    workers: int = 1


@dataclass(frozen=True)
class SessionResult:
    transmissions: int
    delivered: int
    distinct: int
    decoded: bool
    accepted: bool


@dataclass
class SweepRow:
    payload_bits: int
    symbol_bits: int
    n_columns: int
    distance_km: float | None
    plr: float
    trials: int
    decoded_fraction: float
    accepted_fraction: float
    mean_n0: float
    mean_packets_transmitted: float
    std_packets_transmitted: float
    mean_packets_delivered: float
    mean_distinct_delivered: float
    mean_r0_star: float
    std_r0_star: float


# --- one trial -----------------------------------------------------------------

_ISSUER = AtmNode.from_seed("sim-issuer", (0.0, 0.0), 0.0, 0)
_PLAN = FlightPlan("SIM-UAS", ((0.0, 0.0, 100.0),), (0.0,), bytes(32), 0x5A5A5A)


@dataclass
class Trial:
    """One aircraft's credential-equivalent state, reused across grid points."""

    params: FrameParams
    seed: int
    cred: AuthCredential | None = field(default=None)

    def __post_init__(self) -> None:
        if self.params.payload_bits >= MAC_PAYLOAD_BITS:
            self.cred = issue_credential(_PLAN, APPROVE, _ISSUER, self.params, self.seed)
            self.matrix = self.cred.matrix()
            self.payload = None
        else:
            # too small for id_fp + MAC: ship random bits and check them bit-exactly
            self.matrix = generate_matrix(self.params.k, self.params.n_columns, derive_seed(self.seed, 1))
            rng = SplitMix64(derive_seed(self.seed, 2))
            nbits = self.params.payload_bits
            self.payload = Bits(int.from_bytes(rng.randbytes((nbits + 7) // 8), "big") >> (-nbits % 8), nbits)

    def sessions(self) -> tuple[UasSession, AtcSession]:
        if self.cred is not None:
            uas = UasSession.from_credential(self.cred)
            atc = AtcSession.from_credential(self.cred)
        else:
            uas = UasSession(self.matrix, self.params, _PLAN.icao_address, self.payload)
            atc = AtcSession(self.matrix, self.params, _PLAN.icao_address)
        return uas, atc


def simulate_session(trial: Trial, model: ChannelModel, stream_id: int, cap: int) -> SessionResult:
    """Broadcast until the ATC side decodes or ``cap`` frames have been sent.

    Frames lost on the channel are counted but never encoded; every delivered
    frame goes through build -> hex-level parse -> collection.
    """
    uas, atc = trial.sessions()
    tx = Transmission(model, stream_id)
    delivered = 0
    while True:
        gap = tx.next_delivery(cap)
        if gap is None:
            return SessionResult(tx.sent, delivered, len(atc.collected), False, False)
        uas.skip(gap - 1)
        result = atc.ingest(uas.next_frame().to_bits())
        delivered += 1
        if isinstance(result, Decoded):
            if trial.cred is not None:
                accepted = atc.verify(result).approved
            else:
                accepted = result.bits == trial.payload
            return SessionResult(uas.sent, delivered, len(atc.collected), True, accepted)


def _run_trials(args: tuple) -> list[list[SessionResult]]:
    params, base_seed, plrs, trial_ids, cap = args
    out = []
    for t in trial_ids:
        seed = derive_seed(base_seed, params.payload_bits, params.symbol_bits, t)
        trial = Trial(params, seed)
        baseline = simulate_session(trial, ChannelModel.with_plr(0.0, seed), 0, cap)
        row = [baseline]
        for idx, plr in enumerate(plrs, start=1):
            if plr == 0.0:
                row.append(baseline)
            else:
                row.append(simulate_session(trial, ChannelModel.with_plr(plr, seed), idx, cap))
        out.append(row)
    return out


def _simulate(cfg: SweepConfig, params: FrameParams, plrs: Sequence[float]) -> list[list[SessionResult]]:
    """Per-trial results; column 0 is the loss-free baseline, then one per plr."""
    cap = cfg.cap_factor * params.n_columns
    ids = list(range(cfg.trials))
    if cfg.workers <= 1:
        return _run_trials((params, cfg.seed, tuple(plrs), ids, cap))
    chunks = [ids[i :: cfg.workers] for i in range(cfg.workers)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(_run_trials, [(params, cfg.seed, tuple(plrs), c, cap) for c in chunks]))
    merged: dict[int, list[SessionResult]] = {}
    for chunk, part in zip(chunks, parts):
        merged.update(zip(chunk, part))
    return [merged[t] for t in ids]


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def _aggregate(
    params: FrameParams, results: list[list[SessionResult]], col: int, plr: float, distance: float | None
) -> SweepRow:
    pairs = [(r[0], r[col]) for r in results]
    ok = [(b, s) for b, s in pairs if b.decoded and s.decoded]
    tx_mean, tx_std = _mean_std([s.transmissions for _, s in ok])
    r0_mean, r0_std = _mean_std([s.transmissions / b.transmissions for b, s in ok])
    n = len(pairs)
    return SweepRow(
        payload_bits=params.payload_bits,
        symbol_bits=params.symbol_bits,
        n_columns=params.n_columns,
        distance_km=distance,
        plr=plr,
        trials=n,
        decoded_fraction=sum(s.decoded for _, s in pairs) / n,
        accepted_fraction=sum(s.accepted for _, s in pairs) / n,
        mean_n0=_mean_std([b.transmissions for b, _ in ok])[0],
        mean_packets_transmitted=tx_mean,
        std_packets_transmitted=tx_std,
        mean_packets_delivered=_mean_std([s.delivered for _, s in ok])[0],
        mean_distinct_delivered=_mean_std([s.distinct for _, s in ok])[0],
        mean_r0_star=r0_mean,
        std_r0_star=r0_std,
    )


def _check_sizes(cfg: SweepConfig) -> None:
    if cfg.trials < 1:
        raise ConfigInvalid("trials must be >= 1")
    if not cfg.payload_sizes_bits:
        raise ConfigInvalid("no payload sizes")
    for m in cfg.payload_sizes_bits:
        if m <= 0 or cfg.symbol_bits <= 0 or m % cfg.symbol_bits:
            raise ConfigInvalid(f"payload of {m} bits does not split into {cfg.symbol_bits}-bit symbols")


def _params(cfg: SweepConfig, payload_bits: int, redundancy: float) -> FrameParams:
    if cfg.n_columns is not None:
        p = FrameParams(payload_bits, cfg.symbol_bits, cfg.n_columns, redundancy)
    else:
        p = FrameParams.for_payload(payload_bits, cfg.symbol_bits, redundancy)
    problems = validate_params(p)
    if problems:
        raise ConfigInvalid("; ".join(map(str, problems)))
    return p


def sweep_redundancy(cfg: SweepConfig) -> float:
    """Redundancy used to size N in the loss-rate sweep.

    Large enough that a session at the worst grid point almost never wraps
    past column N-1 and starts repeating droplets.
    """
    worst = max(cfg.plr_grid)
    return max(cfg.redundancy, 2.0 / (1.0 - worst))


def run_plr_sweep(cfg: SweepConfig) -> list[SweepRow]:
    _check_sizes(cfg)
    if not cfg.plr_grid or any(not 0.0 <= p < 1.0 for p in cfg.plr_grid):
        raise ConfigInvalid("plr grid must be non-empty and inside [0, 1)")
    if any(not 0.65 <= p <= 0.95 for p in cfg.plr_grid if p > 0):
        raise ConfigInvalid("non-zero plr grid points must lie in [0.65, 0.95]")
    plrs = [0.0] + sorted(p for p in set(cfg.plr_grid) if p > 0)
    redundancy = sweep_redundancy(cfg)
    rows = []
    for m in cfg.payload_sizes_bits:
        params = _params(cfg, m, redundancy)
        results = _simulate(cfg, params, plrs)
        rows += [_aggregate(params, results, i + 1, plr, None) for i, plr in enumerate(plrs)]
    return rows


def run_range_limited(cfg: SweepConfig) -> list[SweepRow]:
    _check_sizes(cfg)
    if not cfg.distance_grid or any(not 0.0 <= d <= 100.0 for d in cfg.distance_grid):
        raise ConfigInvalid("distance grid must be non-empty and inside [0, 100] km")
    distances = sorted(set(cfg.distance_grid))
    plrs = [plr_at(d) for d in distances]
    rows = []
    for m in cfg.payload_sizes_bits:
        params = _params(cfg, m, cfg.redundancy)
        results = _simulate(cfg, params, plrs)
        rows += [_aggregate(params, results, i + 1, plr, d) for i, (d, plr) in enumerate(zip(distances, plrs))]
    return rows


CSV_COLUMNS = [f.name for f in fields(SweepRow)]


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in asdict(row).values()])
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def summary_table(rows: Sequence[SweepRow]) -> str:
    head = f"{'M':>6} {'dist':>7} {'plr':>8} {'N0':>8} {'tx':>10} {'r0*':>8} {'ok':>6}"
    lines = [head, "-" * len(head)]
    for r in rows:
        dist = "-" if r.distance_km is None else f"{r.distance_km:.0f}"
        lines.append(
            f"{r.payload_bits:>6} {dist:>7} {r.plr:>8.4f} {r.mean_n0:>8.2f} "
            f"{r.mean_packets_transmitted:>10.2f} {r.mean_r0_star:>8.3f} {r.accepted_fraction:>6.3f}"
        )
    return "\n".join(lines)


# --- sizing report ---------------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityReport:
    payload_bits: int
    symbol_bits: int
    redundancy: float
    columns_needed: Fraction
    n_columns: int
    hint_bits: int
    used_bits: int
    field_bits: int
    symbol_headroom_bits: int
    passes: bool

    def lines(self) -> list[str]:
        verdict = "PASS" if self.passes else "FAIL"
        return [
            f"payload M = {self.payload_bits} bits, symbol L_C = {self.symbol_bits} bits, r0 = {self.redundancy:g}",
            f"columns r0*M/L_C = {float(self.columns_needed):g} -> N = {self.n_columns}",
            f"hint bits L_h = ceil(log2({float(self.columns_needed):g})) = {self.hint_bits}",
            f"L_h + L_C = {self.hint_bits} + {self.symbol_bits} = {self.used_bits} vs {self.field_bits}: {verdict}",
            f"symbol headroom 51 - L_h = {self.symbol_headroom_bits} bits",
        ]


def check_practical_config(payload_bits: int, symbol_bits: int, redundancy: float) -> FeasibilityReport:
    if payload_bits <= 0 or symbol_bits <= 0 or redundancy <= 0:
        raise ValueError("inputs must be positive")
    needed = Fraction(redundancy) * payload_bits / symbol_bits
    hint = ceil_log2(needed)
    used = hint + symbol_bits
    return FeasibilityReport(
        payload_bits=payload_bits,
        symbol_bits=symbol_bits,
        redundancy=redundancy,
        columns_needed=needed,
        n_columns=math.floor(needed) + 1,
        hint_bits=hint,
        used_bits=used,
        field_bits=AUTH_FIELD_BITS,
        symbol_headroom_bits=AUTH_FIELD_BITS - hint,
        passes=used <= AUTH_FIELD_BITS,
    )


__all__ = [
    "ConfigInvalid", "FeasibilityReport", "SessionResult", "SweepConfig", "SweepRow", "Trial",
    "check_practical_config", "rows_to_csv", "run_plr_sweep", "run_range_limited",
    "simulate_session", "summary_table", "sweep_redundancy", "write_csv",
]

