"""Random linear network coding over GF(2^8) and the merged-arrival experiment.

Coded packets carry a coefficient vector drawn uniformly over the field plus
the matching linear combination of the block payloads; the decoder runs
incremental Gauss-Jordan elimination and recovers the block once its rank
reaches the block size.  A GF(2) mode exists solely so small cases can be
tested by exhaustive enumeration.

The multi-server experiment checks the modelling assumption that m coded
Poisson delivery processes merge into a single Poisson process of the sum
rate with (almost) no redundant receptions.

Field realization: GF(2^8) as polynomials over GF(2) modulo
x^8 + x^4 + x^3 + x^2 + 1 (0x11D), generator 0x02.  Wire format: the W
coefficient bytes followed by the payload bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, LengthMismatch
from .rngstream import Stream

REDUCTION_POLY = 0x11D
SUPPORTED_FIELDS = (2, 256)


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= REDUCTION_POLY
    exp[255:510] = exp[0:255]  # wraparound spares a modulo in products
    return exp, log


_EXP, _LOG = _build_tables()


class Field:
    """Arithmetic helper for GF(2) or GF(2^8), vectorized over uint8 arrays."""

    def __init__(self, q: int):
        if q not in SUPPORTED_FIELDS:
            raise DomainError(f"field size must be one of {SUPPORTED_FIELDS}, got {q}")
        self.q = q

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.uint8)
        b = np.asarray(b, dtype=np.uint8)
        if self.q == 2:
            # scalars are bits but payload cells pack 8 symbols per byte, so
            # a zero coefficient must blank the whole byte
            return np.where(a == 0, np.uint8(0), b)
        out = _EXP[_LOG[a] + _LOG[b]]
        return np.where((a == 0) | (b == 0), np.uint8(0), out)

    def inv(self, a: int) -> int:
        if a == 0:
            raise DomainError("zero has no inverse")
        if self.q == 2:
            return 1
        return int(_EXP[255 - _LOG[a]])

    def add(self, a, b):
        return np.bitwise_xor(a, b)

    def rand_coeffs(self, w: int, stream: Stream) -> np.ndarray:
        if self.q == 2:
            return np.array([stream.randbit() for _ in range(w)], dtype=np.uint8)
        return np.array([stream.randbyte() for _ in range(w)], dtype=np.uint8)


@dataclass(frozen=True)
class CodedPacket:
    coeffs: np.ndarray  # uint8[w]
    payload: np.ndarray  # uint8[len]

    def to_bytes(self) -> bytes:
        return self.coeffs.tobytes() + self.payload.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, w: int) -> "CodedPacket":
        if len(data) < w:
            raise LengthMismatch(f"wire data shorter than {w} coefficient bytes")
        raw = np.frombuffer(data, dtype=np.uint8)
        return cls(coeffs=raw[:w].copy(), payload=raw[w:].copy())


def encode(block: list[np.ndarray] | np.ndarray, stream: Stream, q: int = 256) -> CodedPacket:
    """Random linear combination of the block's packets.

    Coefficients are i.i.d. uniform over the field; the payload is the
    symbolwise combination.  All payloads must share one length.
    """
    block = np.asarray(block, dtype=np.uint8)
    if block.ndim != 2 or block.shape[0] == 0:
        raise LengthMismatch("block must be a nonempty list of equal-length payloads")
    f = Field(q)
    coeffs = f.rand_coeffs(block.shape[0], stream)
    payload = np.zeros(block.shape[1], dtype=np.uint8)
    for c, pkt in zip(coeffs, block):
        payload ^= f.mul(np.uint8(c), pkt)
    return CodedPacket(coeffs=coeffs, payload=payload)


class DecoderState:
    """Incremental Gauss-Jordan decoder for one block of w packets.

    Rows are kept fully reduced (each pivot column is zero everywhere else),
    so once rank == w the stored payload rows are the decoded packets.
    """

    def __init__(self, w: int, payload_len: int, q: int = 256):
        if w < 1 or payload_len < 1:
            raise DomainError("need w >= 1 and payload_len >= 1")
        self.w = w
        self.payload_len = payload_len
        self.field = Field(q)
        self.rank = 0
        self.received = 0
        self.rows = np.zeros((w, w + payload_len), dtype=np.uint8)
        self.pivots: list[int] = []

    def receive(self, pkt: CodedPacket) -> str:
        """Fold one packet in; returns "innovative" or "redundant"."""
        if pkt.coeffs.shape[0] != self.w or pkt.payload.shape[0] != self.payload_len:
            raise LengthMismatch(
                f"packet dims ({pkt.coeffs.shape[0]}, {pkt.payload.shape[0]}) do not "
                f"match decoder ({self.w}, {self.payload_len})"
            )
        self.received += 1
        f = self.field
        row = np.concatenate([pkt.coeffs, pkt.payload]).astype(np.uint8)
        for r, col in zip(self.rows, self.pivots):
            if row[col]:
                row ^= f.mul(np.uint8(row[col]), r)
        nz = np.flatnonzero(row[: self.w])
        if nz.size == 0:
            return "redundant"
        col = int(nz[0])
        row = f.mul(np.uint8(f.inv(int(row[col]))), row)
        for i in range(self.rank):
            if self.rows[i, col]:
                self.rows[i] ^= f.mul(np.uint8(self.rows[i, col]), row)
        self.rows[self.rank] = row
        self.pivots.append(col)
        self.rank += 1
        return "innovative"

    @property
    def complete(self) -> bool:
        return self.rank == self.w

    def decode(self) -> np.ndarray:
        """Recovered block, rows in original packet order."""
        if not self.complete:
            raise DomainError(f"rank {self.rank} < {self.w}: block not decodable yet")
        order = np.argsort(np.asarray(self.pivots))
        return self.rows[order, self.w:].copy()


def full_rank_probability(q: int, w: int) -> float:
    """Probability that w i.i.d. uniform coefficient vectors have full rank:
    prod_{i=1..w} (1 - q^-i).  Companion formula to the coding model,
    validated by exhaustive enumeration in the tests."""
    if q not in SUPPORTED_FIELDS:
        raise DomainError(f"field size must be one of {SUPPORTED_FIELDS}, got {q}")
    if w < 1:
        raise DomainError(f"block size must be >= 1, got {w}")
    out = 1.0
    for i in range(1, w + 1):
        out *= -math.expm1(-i * math.log(q))
    return out


def expected_redundancy_per_block(q: int, w: int) -> float:
    """Expected redundant receptions per decoded block under the
    1 - q^-deficit innovation model: sum_d q^-d / (1 - q^-d)."""
    return sum(q**-dd / (1.0 - q**-dd) for dd in range(1, w + 1))


@dataclass
class MergeReport:
    """Outcome of the multi-server merge experiment."""

    rates: tuple[float, ...]
    horizon: float
    w: int
    q: int
    payload_len: int
    blocks_decoded: int
    arrivals: int
    redundant: int
    redundant_per_block: float
    expected_redundant_per_block: float
    ks_statistic: float
    ks_critical_1pct: float
    ks_consistent: bool
    mean_count_expected: float
    decode_errors: int
    rows: list[dict] = field(default_factory=list)


def _ks_exponential(gaps: np.ndarray, rate: float) -> float:
    """One-sample Kolmogorov-Smirnov statistic against Exponential(rate)."""
    x = np.sort(gaps)
    n = x.size
    cdf = -np.expm1(-rate * x)
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(0, n) / n)
    return float(max(d_plus, d_minus))


def merge_experiment(server_rates: list[float], horizon: float, w: int, q: int,
                     replicas_seed: int, payload_len: int = 32) -> MergeReport:
    """Stream one block sequence from m coded servers and merge the arrivals.

    Each server delivers independently encoded packets of the receiver's
    current block as a Poisson process.  Reports the redundant-reception
    rate per block, a KS test of the merged inter-arrival times against the
    sum-rate exponential, and the merged count against its Poisson mean.
    """
    if not server_rates or any(r <= 0.0 for r in server_rates):
        raise DomainError(f"server rates must be positive, got {server_rates}")
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    total_rate = float(sum(server_rates))

    arrival_times = []
    server_of = []
    streams = []
    for k, r in enumerate(server_rates):
        st = Stream(replicas_seed, k)
        streams.append(Stream(replicas_seed, 1000 + k))  # coefficient stream
        t = st.exponential(r)
        while t <= horizon:
            arrival_times.append(t)
            server_of.append(k)
            t += st.exponential(r)
    arrival_times = np.asarray(arrival_times)
    server_of = np.asarray(server_of)
    order = np.argsort(arrival_times, kind="stable")
    arrival_times = arrival_times[order]
    server_of = server_of[order]

    payload_stream = Stream(replicas_seed, 2000)
    block = np.array([[payload_stream.randbyte() for _ in range(payload_len)]
                      for _ in range(w)], dtype=np.uint8)
    decoder = DecoderState(w, payload_len, q)

    redundant = 0
    blocks_decoded = 0
    decode_errors = 0
    row_list = []
    block_redundant = 0
    block_arrivals = 0
    for k in server_of:
        pkt = encode(block, streams[k], q)
        block_arrivals += 1
        if decoder.receive(pkt) == "redundant":
            redundant += 1
            block_redundant += 1
        if decoder.complete:
            if not np.array_equal(decoder.decode(), block):
                decode_errors += 1
            row_list.append({"block": blocks_decoded, "arrivals": block_arrivals,
                             "redundant": block_redundant})
            blocks_decoded += 1
            block = np.array([[payload_stream.randbyte() for _ in range(payload_len)]
                              for _ in range(w)], dtype=np.uint8)
            decoder = DecoderState(w, payload_len, q)
            block_redundant = 0
            block_arrivals = 0

    gaps = np.diff(np.concatenate([[0.0], arrival_times]))
    n_gaps = gaps.size
    ks = _ks_exponential(gaps, total_rate) if n_gaps else math.nan
    # asymptotic 1% critical value of the Kolmogorov distribution
    ks_crit = 1.6276 / math.sqrt(n_gaps) if n_gaps else math.nan
    return MergeReport(
        rates=tuple(server_rates),
        horizon=horizon,
        w=w,
        q=q,
        payload_len=payload_len,
        blocks_decoded=blocks_decoded,
        arrivals=int(arrival_times.size),
        redundant=redundant,
        redundant_per_block=redundant / blocks_decoded if blocks_decoded else math.nan,
        expected_redundant_per_block=expected_redundancy_per_block(q, w),
        ks_statistic=ks,
        ks_critical_1pct=ks_crit,
        ks_consistent=bool(ks < ks_crit) if n_gaps else False,
        mean_count_expected=total_rate * horizon,
        decode_errors=decode_errors,
        rows=row_list,
    )
