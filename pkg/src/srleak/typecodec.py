"""Exact finite-blocklength construction of the two-layer encrypted code.

The scheme, per source type inside the divergence ball:

* a first-layer codebook that covers the whole type class within D1,
  partitioned into bins of ``2**floor(n*r1)`` codewords,
* per first-layer codeword, a second-layer codebook covering its D1
  neighborhood inside the type class within D2, binned by ``2**floor(n*r2)``,
* messages carry (type id, bin index, within-bin index XOR key prefix); the
  within-bin field is the only encrypted part,
* sequences whose type falls outside the ball map to a reserved erasure
  message in both layers.

Codebooks are built greedily (maximum coverage, lexicographic tie-break) and
each source sequence is assigned to the codeword that first covered it, so
every codeword carries at least one sequence.  Messages are width-tagged
structured tuples (a variable-length wire format), which makes the
bin-counting closed form for maximal leakage agree exactly with the
definitional sum over messages of the largest conditional probability.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .errors import CapExceededError, CodebookError, DimensionError, RateConditionError
from .exponents import SystemSpec, max_rd_over_ball
from .probcore import (
    Distribution,
    TypeClass,
    all_sequences,
    count_types,
    enumerate_types,
    kl_divergence,
    type_class_members,
    type_class_probability,
)
from .rdsolver import rd_binary_hamming, rd_function

Which = Literal["M1", "M1M2"]

DEFAULT_SEQ_CAP = 1 << 22
DEFAULT_COVER_CELLS = 150_000_000
DEFAULT_ENUM_CAP = 1 << 24

_MAGIC = b"SRCB"
_VERSION = 1


@dataclass(frozen=True)
class Layer1Message:
    """First-layer message: type id, bin index, encrypted within-bin index.

    ``cipher_width`` is the bit width of the encrypted field and is part of
    the message identity (fields are not zero-padded on the wire).
    """

    type_id: int
    bin_index: int
    cipher: int
    cipher_width: int
    erasure: bool = False


@dataclass(frozen=True)
class Layer2Message:
    """Second-layer message: bin index and encrypted within-bin index.

    Both field widths vary with the first-layer codeword, so they belong to
    the message identity.
    """

    bin_index: int
    bin_width: int
    cipher: int
    cipher_width: int
    erasure: bool = False


M0_LAYER1 = Layer1Message(-1, 0, 0, 0, True)
M0_LAYER2 = Layer2Message(-1, 0, 0, 0, True)


@dataclass(frozen=True)
class KeyPair:
    """Uniformly sampled keys as integers of fixed bit widths."""

    k1: int
    k2: int
    bits1: int
    bits2: int

    def __post_init__(self) -> None:
        if not 0 <= self.k1 < (1 << self.bits1):
            raise ValueError("layer-1 key outside its bit width")
        if not 0 <= self.k2 < (1 << self.bits2):
            raise ValueError("layer-2 key outside its bit width")


@dataclass
class DecodeResult:
    xhat1: np.ndarray
    xhat2: np.ndarray
    erased: bool


def key_bits(n: int, rate: float) -> int:
    """Key length in bits for a blocklength and key rate: floor(n * rate)."""
    return int(math.floor(n * rate + 1e-9))


def _ceil_log2(m: int) -> int:
    return (m - 1).bit_length() if m > 1 else 0


def _key_prefix(key: int, total_bits: int, width: int) -> int:
    return key >> (total_bits - width) if width < total_bits else key


@dataclass
class _TypeBook:
    type_id: int
    counts: tuple[int, ...]
    y_codes: np.ndarray             # (ny, n) int8, lexicographic
    z_codes: list[np.ndarray]       # per y codeword, (nz, n) int8, lexicographic
    member_assign: np.ndarray       # (m, 2) int64: y position, z position per member


class CoverCodebook:
    """Built two-layer codebook with assignment maps and bin tables."""

    def __init__(self, spec: SystemSpec, n: int, delta: float, books: list[_TypeBook],
                 verified: bool) -> None:
        self.spec = spec
        self.n = n
        self.delta = delta
        self.books = books
        self.verified = verified
        self.bits1 = key_bits(n, spec.r1)
        self.bits2 = key_bits(n, spec.r2)
        self.cap1 = 1 << self.bits1
        self.cap2 = 1 << self.bits2
        self.total_types = count_types(n, spec.source.alphabet_size)
        self.type_field_bits = _ceil_log2(self.total_types)
        self.inball_type_ids = {b.type_id for b in books}
        self.has_out_of_ball = len(books) < self.total_types
        self._book_by_type_id = {b.type_id: k for k, b in enumerate(books)}
        self._assign: dict[bytes, tuple[int, int, int]] = {}
        for k, b in enumerate(books):
            members = type_class_members(TypeClass(n, b.counts))
            for row, (ypos, zpos) in zip(members, b.member_assign):
                self._assign[row.tobytes()] = (k, int(ypos), int(zpos))
        # realized message structure per (book, layer-1 bin)
        self._realized: dict[tuple[int, int], set[tuple[int, int, int]]] = {}
        for k, ypos, zpos in self._assign.values():
            b = self.books[k]
            i = ypos // self.cap1
            u = zpos // self.cap2
            triple = (_ceil_log2(self._z_nbins(b, ypos)), u, self._s2(b, ypos, u))
            self._realized.setdefault((k, i), set()).add(triple)

    # -- bin tables --------------------------------------------------------

    def y_nbins(self, k: int) -> int:
        return -(-len(self.books[k].y_codes) // self.cap1)

    def y_bin_size(self, k: int, i: int) -> int:
        ny = len(self.books[k].y_codes)
        return min(self.cap1, ny - i * self.cap1)

    def s1(self, k: int, i: int) -> int:
        return _ceil_log2(self.y_bin_size(k, i))

    def _z_nbins(self, b: _TypeBook, ypos: int) -> int:
        return -(-len(b.z_codes[ypos]) // self.cap2)

    def z_nbins(self, k: int, ypos: int) -> int:
        return self._z_nbins(self.books[k], ypos)

    def _s2(self, b: _TypeBook, ypos: int, u: int) -> int:
        nz = len(b.z_codes[ypos])
        return _ceil_log2(min(self.cap2, nz - u * self.cap2))

    def s2(self, k: int, ypos: int, u: int) -> int:
        return self._s2(self.books[k], ypos, u)

    # -- message-space accounting -------------------------------------------

    def layer1_message_count(self) -> int:
        return sum(
            sum(1 << self.s1(k, i) for i in range(self.y_nbins(k)))
            for k in range(len(self.books))
        )

    def layer2_message_count(self) -> int:
        shapes: set[tuple[int, int, int]] = set()
        for k, b in enumerate(self.books):
            for ypos in range(len(b.y_codes)):
                nb = self._z_nbins(b, ypos)
                wu = _ceil_log2(nb)
                for u in range(nb):
                    shapes.add((wu, u, self._s2(b, ypos, u)))
        return sum(1 << wv for (_, _, wv) in shapes)

    def total_y_codewords(self) -> int:
        return sum(len(b.y_codes) for b in self.books)

    def total_z_codewords(self) -> int:
        return sum(sum(len(z) for z in b.z_codes) for b in self.books)

    def lookup(self, x: np.ndarray) -> tuple[int, int, int] | None:
        return self._assign.get(np.asarray(x, dtype=np.int8).tobytes())


def _cover_matrix(
    members: np.ndarray, candidates: np.ndarray, dmat: np.ndarray, level: float, n: int
) -> np.ndarray:
    """Boolean matrix: candidate c covers member m within average distortion."""
    out = np.zeros((candidates.shape[0], members.shape[0]), dtype=bool)
    chunk = max(1, int(2_000_000 // max(members.shape[0], 1)))
    budget = level * n + 1e-9
    for start in range(0, candidates.shape[0], chunk):
        sl = slice(start, min(start + chunk, candidates.shape[0]))
        acc = np.zeros((sl.stop - sl.start, members.shape[0]))
        for t in range(n):
            acc += dmat[members[:, t][None, :], candidates[sl, t][:, None]]
        out[sl] = acc <= budget
    return out


def _greedy_cover(cover: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Maximum-coverage greedy selection.

    Returns the selected candidate indices in chronological order and, per
    member, the chronological rank of the selection that first covered it.
    """
    n_members = cover.shape[1]
    uncovered = np.ones(n_members, dtype=bool)
    selected: list[int] = []
    first_cover = np.full(n_members, -1, dtype=np.int64)
    while uncovered.any():
        gains = cover[:, uncovered].sum(axis=1)
        best = int(np.argmax(gains))
        if gains[best] == 0:
            raise CodebookError("covering infeasible: a member has no candidate within budget")
        newly = cover[best] & uncovered
        first_cover[newly] = len(selected)
        selected.append(best)
        uncovered &= ~cover[best]
    return selected, first_cover


def minimum_cover_size(cover: np.ndarray) -> int:
    """Exact minimum number of candidates covering all members (tiny inputs).

    Solved as a binary integer program; intended as an oracle for measuring
    the greedy construction at small blocklengths.
    """
    from scipy.optimize import LinearConstraint, milp

    n_cand, n_members = cover.shape
    keep = cover.any(axis=1)
    cov = cover[keep]
    constraints = LinearConstraint(cov.T.astype(np.float64), lb=np.ones(n_members))
    res = milp(
        c=np.ones(cov.shape[0]),
        constraints=constraints,
        integrality=np.ones(cov.shape[0]),
        bounds=(0, 1),
    )
    if not res.success:
        raise CodebookError(f"minimum-cover program failed: {res.message}")
    return int(round(res.fun))


def _rd_value(spec: SystemSpec, q: Distribution, layer: int) -> float:
    D = spec.D1 if layer == 1 else spec.D2
    if spec.is_binary_hamming:
        return rd_binary_hamming(float(q.probs[1]), D)
    return rd_function(q, spec.d1 if layer == 1 else spec.d2, D).value


def default_delta(spec: SystemSpec) -> float:
    """Half the layer-1 rate margin over the ball maximum, clamped positive."""
    ball_max = max_rd_over_ball(spec)
    margin = spec.R1 - ball_max
    if margin <= 0:
        raise RateConditionError(
            f"layer-1 rate {spec.R1} does not exceed the ball maximum {ball_max:.6f}"
        )
    return 0.5 * margin


def build_codebook(
    spec: SystemSpec,
    n: int,
    delta: float | None = None,
    *,
    verify: bool = True,
    max_sequences: int = DEFAULT_SEQ_CAP,
    max_cover_cells: int = DEFAULT_COVER_CELLS,
) -> CoverCodebook:
    """Construct the per-type covering codebooks and assignment maps.

    ``delta`` widens the divergence ball that selects which types get real
    codebooks; by default it is half the layer-1 rate margin.  Raises
    CodebookError when a type's rate requirement or the message-space budget
    conflicts with the configured rates, naming the offending type.
    """
    if n < 1:
        raise ValueError("blocklength must be positive")
    kx = spec.source.alphabet_size
    ka, kb = spec.d1.cols, spec.d2.cols
    for size in (kx, ka, kb):
        if size**n > max_sequences:
            raise CapExceededError(f"{size}^{n} sequences exceed the cap of {max_sequences}")
    if delta is None:
        delta = default_delta(spec)
    if delta <= 0:
        raise ValueError("delta must be positive")

    threshold = spec.alpha + delta
    cand_y = all_sequences(ka, n, max_sequences)
    cand_z = all_sequences(kb, n, max_sequences)

    books: list[_TypeBook] = []
    for type_id, t in enumerate(enumerate_types(n, kx)):
        emp = t.empirical()
        if kl_divergence(emp, spec.source) > threshold:
            continue
        rd1 = _rd_value(spec, emp, 1)
        if not rd1 < spec.R1 - 1e-12:
            raise CodebookError(
                f"type {t.counts} needs layer-1 rate {rd1:.6f}, which is not below R1={spec.R1}"
            )
        members = type_class_members(t)
        if members.shape[0] * cand_y.shape[0] > max_cover_cells:
            raise CapExceededError(
                f"cover matrix for type {t.counts} exceeds {max_cover_cells} cells"
            )
        cover1 = _cover_matrix(members, cand_y, spec.d1.matrix, spec.D1, n)
        chrono_y, first_y = _greedy_cover(cover1)

        # lexicographic codeword order; members keep their chronological owner
        y_sel = sorted(chrono_y)
        pos_of_candidate = {c: pos for pos, c in enumerate(y_sel)}
        y_codes = cand_y[y_sel]
        rank_to_pos = {r: pos_of_candidate[c] for r, c in enumerate(chrono_y)}

        z_codes: list[np.ndarray] = []
        z_first: list[dict[int, int]] = []  # per y position: member row -> z position
        for pos in range(len(y_sel)):
            cand_idx = y_sel[pos]
            domain_rows = np.nonzero(cover1[cand_idx])[0]
            domain = members[domain_rows]
            cover2 = _cover_matrix(domain, cand_z, spec.d2.matrix, spec.D2, n)
            chrono_z, first_z = _greedy_cover(cover2)
            z_sel = sorted(chrono_z)
            zpos_of_candidate = {c: p for p, c in enumerate(z_sel)}
            zrank_to_pos = {r: zpos_of_candidate[c] for r, c in enumerate(chrono_z)}
            z_codes.append(cand_z[z_sel])
            z_first.append(
                {int(domain_rows[m]): zrank_to_pos[int(first_z[m])] for m in range(len(domain_rows))}
            )

        assign = np.zeros((members.shape[0], 2), dtype=np.int64)
        for m in range(members.shape[0]):
            ypos = rank_to_pos[int(first_y[m])]
            assign[m, 0] = ypos
            assign[m, 1] = z_first[ypos][m]
        books.append(_TypeBook(type_id, t.counts, y_codes, z_codes, assign))

    cb = CoverCodebook(spec, n, delta, books, verified=False)
    _check_budgets(cb)
    if verify:
        verify_covering(cb)
    return cb


def _check_budgets(cb: CoverCodebook) -> None:
    spec, n = cb.spec, cb.n
    m1 = cb.layer1_message_count()
    if math.log2(m1 + 1) > n * spec.R1 + 1e-9:
        biggest = max(cb.books, key=lambda b: len(b.y_codes), default=None)
        name = biggest.counts if biggest else "(none)"
        raise CodebookError(
            f"layer-1 messages ({m1} patterns plus erasure) overflow 2^(n*R1); "
            f"largest codebook at type {name}"
        )
    m2 = cb.layer2_message_count()
    if math.log2(m2 + 1) > n * spec.R2 + 1e-9:
        biggest = max(cb.books, key=lambda b: sum(len(z) for z in b.z_codes), default=None)
        name = biggest.counts if biggest else "(none)"
        raise CodebookError(
            f"layer-2 messages ({m2} patterns plus erasure) overflow 2^(n*R2); "
            f"largest refinement codebook at type {name}"
        )


def verify_covering(cb: CoverCodebook) -> None:
    """Check both distortion guarantees for every assigned sequence."""
    spec, n = cb.spec, cb.n
    for b in cb.books:
        members = type_class_members(TypeClass(n, b.counts))
        for row, (ypos, zpos) in zip(members, b.member_assign):
            y = b.y_codes[ypos]
            z = b.z_codes[ypos][zpos]
            dist1 = float(spec.d1.matrix[row, y].sum()) / n
            dist2 = float(spec.d2.matrix[row, z].sum()) / n
            if dist1 > spec.D1 + 1e-9 or dist2 > spec.D2 + 1e-9:
                raise CodebookError(
                    f"covering violated at type {b.counts}: distortions ({dist1}, {dist2})"
                )
    cb.verified = True


# ---------------------------------------------------------------------------
# encoding, decoding, keys
# ---------------------------------------------------------------------------


def sample_keys(cb: CoverCodebook, rng: np.random.Generator) -> KeyPair:
    k1 = int(rng.integers(0, cb.cap1))
    k2 = int(rng.integers(0, cb.cap2))
    return KeyPair(k1, k2, cb.bits1, cb.bits2)


def encode(x: Iterable[int], keys: KeyPair, cb: CoverCodebook) -> tuple[Layer1Message, Layer2Message]:
    """Map a source sequence to its two messages (erasure pair when out of ball)."""
    arr = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=np.int8)
    if arr.shape != (cb.n,):
        raise DimensionError(f"sequence must have length {cb.n}")
    if keys.bits1 != cb.bits1 or keys.bits2 != cb.bits2:
        raise ValueError("key widths do not match the codebook rates")
    hit = cb.lookup(arr)
    if hit is None:
        return M0_LAYER1, M0_LAYER2
    k, ypos, zpos = hit
    b = cb.books[k]
    i, j = divmod(ypos, cb.cap1)
    s1 = cb.s1(k, i)
    cipher1 = j ^ _key_prefix(keys.k1, cb.bits1, s1)
    m1 = Layer1Message(b.type_id, i, cipher1, s1)
    u, v = divmod(zpos, cb.cap2)
    s2 = cb.s2(k, ypos, u)
    cipher2 = v ^ _key_prefix(keys.k2, cb.bits2, s2)
    m2 = Layer2Message(u, _ceil_log2(cb.z_nbins(k, ypos)), cipher2, s2)
    return m1, m2


def decode_layer1(m1: Layer1Message, keys: KeyPair, cb: CoverCodebook) -> tuple[np.ndarray, bool]:
    """First-layer reconstruction alone; returns (sequence, erased flag)."""
    if m1.erasure:
        return np.zeros(cb.n, dtype=np.int8), True
    k = cb._book_by_type_id.get(m1.type_id)
    if k is None:
        raise CodebookError(f"message names unknown type id {m1.type_id}")
    b = cb.books[k]
    i = m1.bin_index
    if not 0 <= i < cb.y_nbins(k):
        raise CodebookError("layer-1 bin index out of range")
    size1 = cb.y_bin_size(k, i)
    j = (m1.cipher ^ _key_prefix(keys.k1, cb.bits1, m1.cipher_width)) % size1
    return b.y_codes[i * cb.cap1 + j].copy(), False


def decode(
    m1: Layer1Message, m2: Layer2Message, keys: KeyPair, cb: CoverCodebook
) -> DecodeResult:
    """Reconstruct both layers; erasure messages yield fixed default outputs.

    With the matching keys, any in-ball sequence round-trips within both
    distortion targets.  With foreign keys the decrypted within-bin indices
    are garbled (reduced modulo the bin size), which voids the guarantee.
    """
    if m1.erasure or m2.erasure:
        return DecodeResult(
            np.zeros(cb.n, dtype=np.int8), np.zeros(cb.n, dtype=np.int8), True
        )
    k = cb._book_by_type_id.get(m1.type_id)
    if k is None:
        raise CodebookError(f"message names unknown type id {m1.type_id}")
    b = cb.books[k]
    i = m1.bin_index
    if not 0 <= i < cb.y_nbins(k):
        raise CodebookError("layer-1 bin index out of range")
    size1 = cb.y_bin_size(k, i)
    j = (m1.cipher ^ _key_prefix(keys.k1, cb.bits1, m1.cipher_width)) % size1
    ypos = i * cb.cap1 + j
    y = b.y_codes[ypos]
    nbz = cb.z_nbins(k, ypos)
    u = m2.bin_index % nbz
    size2 = min(cb.cap2, len(b.z_codes[ypos]) - u * cb.cap2)
    s2 = cb.s2(k, ypos, u)
    v = (m2.cipher ^ _key_prefix(keys.k2, cb.bits2, s2)) % size2
    z = b.z_codes[ypos][u * cb.cap2 + v]
    return DecodeResult(y.copy(), z.copy(), False)


# ---------------------------------------------------------------------------
# exact joint excess-distortion probability
# ---------------------------------------------------------------------------


def ball_complement_probability(source: Distribution, n: int, threshold: float) -> float:
    """Probability that the empirical type diverges from the source beyond the threshold."""
    total = 0.0
    for t in enumerate_types(n, source.alphabet_size):
        if kl_divergence(t.empirical(), source) > threshold:
            total += type_class_probability(t, source)
    return total


def jep_exact(cb: CoverCodebook) -> float:
    """Exact joint excess-distortion probability of the built scheme.

    Covered (in-ball) sequences never err under any key, and erased
    sequences always count as errors, so the probability is exactly the
    source mass of the out-of-ball types.
    """
    if not cb.verified:
        raise CodebookError("verify the covering before computing the exact error probability")
    return ball_complement_probability(cb.spec.source, cb.n, cb.spec.alpha + cb.delta)


def jep_type_count_bound(n: int, alphabet_size: int, alpha: float, delta: float) -> float:
    """Type-counting upper bound on the error probability."""
    return (n + 1) ** alphabet_size * 2.0 ** (-n * (alpha + delta))


def jep_exponent_threshold(alphabet_size: int, delta: float, n_cap: int = 1_000_000) -> int:
    """Smallest blocklength from which the type-counting bound beats 2^(-n*alpha).

    The comparison reduces to (n+1)^|X| <= 2^(n*delta), independent of alpha.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    for n in range(1, n_cap + 1):
        if alphabet_size * math.log2(n + 1) <= n * delta:
            return n
    raise CapExceededError("no blocklength below the cap satisfies the bound")


def simulate_jep(cb: CoverCodebook, samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of the end-to-end error rate of encode/decode."""
    spec = cb.spec
    seqs = rng.choice(spec.source.alphabet_size, size=(samples, cb.n), p=spec.source.probs)
    errors = 0
    for row in seqs.astype(np.int8):
        keys = sample_keys(cb, rng)
        m1, m2 = encode(row, keys, cb)
        out = decode(m1, m2, keys, cb)
        if out.erased:
            errors += 1
            continue
        d1 = float(spec.d1.matrix[row, out.xhat1].sum()) / cb.n
        d2 = float(spec.d2.matrix[row, out.xhat2].sum()) / cb.n
        if d1 > spec.D1 + 1e-9 or d2 > spec.D2 + 1e-9:
            errors += 1
    return errors / samples


# ---------------------------------------------------------------------------
# exact maximal leakage, two routes
# ---------------------------------------------------------------------------


def leakage_exact(cb: CoverCodebook, which: Which) -> float:
    """Closed-form maximal leakage of the scheme, in bits.

    Counts one unit per realized layer-1 bin (for M1) or per realized
    (bin, second-layer shape) combination (for M1M2), plus one unit for the
    erasure message when any sequence falls outside the ball.  The count is
    exact because the encrypted field is uniform over all its patterns for
    every sequence that can produce the message.
    """
    count = 1 if cb.has_out_of_ball else 0
    if which == "M1":
        count += len(cb._realized)
    elif which == "M1M2":
        count += sum(len(shapes) for shapes in cb._realized.values())
    else:
        raise ValueError(f"unknown leakage target {which!r}")
    return math.log2(count)


def leakage_oracle(cb: CoverCodebook, which: Which, *, max_enum: int = DEFAULT_ENUM_CAP) -> float:
    """Definitional maximal leakage: log2 of the sum over messages of the
    largest conditional probability, by exhaustive enumeration of sequences
    and keys."""
    spec, n = cb.spec, cb.n
    kx = spec.source.alphabet_size
    keyspace = cb.cap1 * (cb.cap2 if which == "M1M2" else 1)
    if kx**n * keyspace > max_enum:
        raise CapExceededError(
            f"{kx}^{n} sequences times {keyspace} keys exceed the enumeration cap {max_enum}"
        )
    best: dict[object, float] = {}
    seqs = all_sequences(kx, n, max_enum)
    for row in seqs:
        local: dict[object, float] = {}
        if which == "M1":
            p_each = 1.0 / cb.cap1
            for k1 in range(cb.cap1):
                m1, _ = encode(row, KeyPair(k1, 0, cb.bits1, cb.bits2), cb)
                local[m1] = local.get(m1, 0.0) + p_each
        else:
            p_each = 1.0 / (cb.cap1 * cb.cap2)
            for k1 in range(cb.cap1):
                for k2 in range(cb.cap2):
                    pair = encode(row, KeyPair(k1, k2, cb.bits1, cb.bits2), cb)
                    local[pair] = local.get(pair, 0.0) + p_each
        for msg, p in local.items():
            if p > best.get(msg, 0.0):
                best[msg] = p
    return math.log2(sum(best.values()))


@dataclass
class LeakageReport:
    closed_form_bits: float
    oracle_bits: float | None
    oracle_enabled: bool
    agree: bool | None


def leakage_report(cb: CoverCodebook, which: Which, *, max_enum: int = DEFAULT_ENUM_CAP) -> LeakageReport:
    closed = leakage_exact(cb, which)
    try:
        oracle = leakage_oracle(cb, which, max_enum=max_enum)
    except CapExceededError:
        return LeakageReport(closed, None, False, None)
    return LeakageReport(closed, oracle, True, abs(closed - oracle) <= 1e-12)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_codebook(cb: CoverCodebook, path: str) -> None:
    """Write the codebook to a versioned binary file (magic ``SRCB``)."""
    spec = cb.spec
    kx = spec.source.alphabet_size
    ka, kb = spec.d1.cols, spec.d2.cols
    if max(kx, ka, kb) > 255:
        raise CodebookError("serialization supports alphabets up to 255 symbols")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        fh.write(struct.pack("<HHHH", cb.n, kx, ka, kb))
        fh.write(
            struct.pack(
                "<8d",
                spec.alpha, cb.delta, spec.D1, spec.D2, spec.R1, spec.R2, spec.r1, spec.r2,
            )
        )
        fh.write(spec.source.probs.astype("<f8").tobytes())
        fh.write(spec.d1.matrix.astype("<f8").tobytes())
        fh.write(spec.d2.matrix.astype("<f8").tobytes())
        fh.write(struct.pack("<I", len(cb.books)))
        for b in cb.books:
            fh.write(struct.pack("<I", b.type_id))
            fh.write(struct.pack(f"<{kx}I", *b.counts))
            fh.write(struct.pack("<I", len(b.y_codes)))
            fh.write(b.y_codes.astype(np.uint8).tobytes())
            for z in b.z_codes:
                fh.write(struct.pack("<I", len(z)))
                fh.write(z.astype(np.uint8).tobytes())
            fh.write(struct.pack("<I", b.member_assign.shape[0]))
            fh.write(b.member_assign.astype("<u4").tobytes())


def load_codebook(path: str, *, verify: bool = True) -> CoverCodebook:
    """Read a codebook written by :func:`save_codebook` and re-verify it."""
    with open(path, "rb") as fh:
        raw = fh.read()
    off = 0

    def take(count: int) -> bytes:
        nonlocal off
        if off + count > len(raw):
            raise CodebookError("truncated codebook file")
        out = raw[off: off + count]
        off += count
        return out

    if take(4) != _MAGIC:
        raise CodebookError("not a codebook file (bad magic bytes)")
    (version,) = struct.unpack("<H", take(2))
    if version != _VERSION:
        raise CodebookError(f"unsupported codebook version {version}")
    n, kx, ka, kb = struct.unpack("<HHHH", take(8))
    alpha, delta, D1, D2, R1, R2, r1, r2 = struct.unpack("<8d", take(64))
    source = Distribution(np.frombuffer(take(8 * kx), dtype="<f8"))
    from .probcore import DistortionMeasure

    d1 = DistortionMeasure(np.frombuffer(take(8 * kx * ka), dtype="<f8").reshape(kx, ka))
    d2 = DistortionMeasure(np.frombuffer(take(8 * kx * kb), dtype="<f8").reshape(kx, kb))
    spec = SystemSpec(source, d1, d2, D1, D2, R1, R2, r1, r2, alpha)
    (n_books,) = struct.unpack("<I", take(4))
    books: list[_TypeBook] = []
    for _ in range(n_books):
        (type_id,) = struct.unpack("<I", take(4))
        counts = struct.unpack(f"<{kx}I", take(4 * kx))
        (ny,) = struct.unpack("<I", take(4))
        y_codes = np.frombuffer(take(ny * n), dtype=np.uint8).reshape(ny, n).astype(np.int8)
        z_codes = []
        for _y in range(ny):
            (nz,) = struct.unpack("<I", take(4))
            z_codes.append(
                np.frombuffer(take(nz * n), dtype=np.uint8).reshape(nz, n).astype(np.int8)
            )
        (m,) = struct.unpack("<I", take(4))
        assign = np.frombuffer(take(8 * m), dtype="<u4").reshape(m, 2).astype(np.int64)
        books.append(_TypeBook(int(type_id), tuple(int(c) for c in counts), y_codes, z_codes, assign))
    cb = CoverCodebook(spec, n, delta, books, verified=False)
    _check_budgets(cb)
    if verify:
        verify_covering(cb)
    return cb
