import math

import numpy as np
import pytest

from srleak.errors import CapExceededError, CodebookError
from srleak.exponents import SystemSpec
from srleak.probcore import (
    Distribution,
    DistortionMeasure,
    TypeClass,
    all_sequences,
    binary_kl,
    type_class_members,
    type_class_probability,
)
from srleak.typecodec import (
    KeyPair,
    M0_LAYER1,
    M0_LAYER2,
    ball_complement_probability,
    build_codebook,
    decode,
    encode,
    jep_exact,
    jep_exponent_threshold,
    jep_type_count_bound,
    key_bits,
    leakage_exact,
    leakage_oracle,
    leakage_report,
    load_codebook,
    minimum_cover_size,
    sample_keys,
    save_codebook,
    simulate_jep,
    _cover_matrix,
)

H2 = DistortionMeasure.hamming(2)


def make_spec(p=0.3, D1=0.2, D2=0.1, R1=1.0, R2=1.0, r1=0.0, r2=0.0, alpha=0.1):
    return SystemSpec(
        source=Distribution.bernoulli(p), d1=H2, d2=H2,
        D1=D1, D2=D2, R1=R1, R2=R2, r1=r1, r2=r2, alpha=alpha,
    )


def avg_distortion(d, x, y):
    return float(d.matrix[np.asarray(x), np.asarray(y)].sum()) / len(x)


class TestBuild:
    def test_single_codeword_at_huge_distortion(self):
        # at n=1 the erasure slot plus one pattern per type need R1 >= 2 bits
        spec = make_spec(D1=1.5, D2=1.2, alpha=3.0, R1=2.0, R2=2.0)
        cb = build_codebook(spec, 1, delta=0.5)
        assert len(cb.books) == 2
        for b in cb.books:
            assert len(b.y_codes) == 1

    def test_zero_distortion_needs_every_sequence(self):
        spec = SystemSpec(
            source=Distribution.bernoulli(0.5), d1=H2, d2=H2,
            D1=1e-13, D2=0.0, R1=3.0, R2=3.0, r1=0.0, r2=0.0, alpha=0.2,
        )
        cb = build_codebook(spec, 4, delta=0.05)
        (book,) = [b for b in cb.books if b.counts == (2, 2)]
        assert len(book.y_codes) == TypeClass(4, (2, 2)).cardinality == 6

    def test_greedy_vs_exact_minimum(self):
        # weight-4 type at n=8, radius-2 covering
        members = type_class_members(TypeClass(8, (4, 4)))
        cands = all_sequences(2, 8)
        cover = _cover_matrix(members, cands, H2.matrix, 0.25, 8)
        from srleak.typecodec import _greedy_cover

        chrono, _ = _greedy_cover(cover)
        exact = minimum_cover_size(cover)
        assert exact <= len(chrono)
        assert len(chrono) <= 2 * exact  # greedy stays in a sane band
        # asymptotic-size sanity: the exponent bound is extremely loose here
        q = 0.5
        bound = 2 ** (8 * (1 - (-0.25 * math.log2(0.25) - 0.75 * math.log2(0.75))) + 25 * math.log2(8))
        assert len(chrono) <= bound

    def test_rate_overflow_names_type(self):
        spec = make_spec(R1=0.31, R2=1.0, alpha=0.05)
        with pytest.raises(CodebookError):
            build_codebook(spec, 8, delta=0.02)

    def test_delta_defaults_positive(self):
        spec = make_spec()
        cb = build_codebook(spec, 4)
        assert cb.delta > 0

    def test_cap_guard(self):
        spec = make_spec()
        with pytest.raises(CapExceededError):
            build_codebook(spec, 8, delta=0.1, max_sequences=100)


class TestEncodeDecode:
    def test_out_of_ball_maps_to_erasure(self):
        spec = make_spec(alpha=0.01)
        cb = build_codebook(spec, 8, delta=0.005)
        # all-ones sequence diverges far from Bern(0.3)
        keys = KeyPair(0, 0, cb.bits1, cb.bits2)
        m1, m2 = encode(np.ones(8, dtype=np.int8), keys, cb)
        assert m1 == M0_LAYER1 and m2 == M0_LAYER2
        out = decode(m1, m2, keys, cb)
        assert out.erased

    def test_zero_key_rate_roundtrip(self):
        spec = make_spec(r1=0.0, r2=0.0)
        cb = build_codebook(spec, 6, delta=0.4)
        assert cb.bits1 == 0 and cb.bits2 == 0
        keys = KeyPair(0, 0, 0, 0)
        for b in cb.books:
            members = type_class_members(TypeClass(6, b.counts))
            for row in members:
                m1, m2 = encode(row, keys, cb)
                out = decode(m1, m2, keys, cb)
                assert not out.erased
                assert avg_distortion(H2, row, out.xhat1) <= spec.D1 + 1e-9
                assert avg_distortion(H2, row, out.xhat2) <= spec.D2 + 1e-9

    def test_keys_hide_only_within_bin_index(self):
        spec = make_spec(r1=0.25, r2=0.25)  # 2 key bits each at n=8
        cb = build_codebook(spec, 8, delta=0.4)
        assert cb.bits1 == 2 and cb.bits2 == 2
        x = None
        for b in cb.books:
            if b.counts == (6, 2):
                x = type_class_members(TypeClass(8, b.counts))[0]
        assert x is not None
        ka = KeyPair(0, 0, 2, 2)
        kb = KeyPair(3, 2, 2, 2)
        m1a, m2a = encode(x, ka, cb)
        m1b, m2b = encode(x, kb, cb)
        assert (m1a.type_id, m1a.bin_index) == (m1b.type_id, m1b.bin_index)
        assert m2a.bin_index == m2b.bin_index

    def test_exhaustive_roundtrip_with_keys(self):
        spec = make_spec(r1=0.25, r2=0.25, alpha=0.15)
        for n in (4, 6, 8):
            cb = build_codebook(spec, n, delta=0.3)
            for b in cb.books:
                members = type_class_members(TypeClass(n, b.counts))
                for row in members:
                    for k1 in range(cb.cap1):
                        for k2 in range(cb.cap2):
                            keys = KeyPair(k1, k2, cb.bits1, cb.bits2)
                            out = decode(*encode(row, keys, cb), keys, cb)
                            assert not out.erased
                            assert avg_distortion(H2, row, out.xhat1) <= spec.D1 + 1e-9
                            assert avg_distortion(H2, row, out.xhat2) <= spec.D2 + 1e-9

    def test_wrong_key_garbles(self):
        spec = make_spec(r1=0.5, r2=0.5)  # plenty of key bits at n=6
        cb = build_codebook(spec, 6, delta=0.4)
        right = KeyPair(0, 0, cb.bits1, cb.bits2)
        wrong = KeyPair(cb.cap1 - 1, cb.cap2 - 1, cb.bits1, cb.bits2)
        garbled = 0
        for b in cb.books:
            members = type_class_members(TypeClass(6, b.counts))
            for row in members:
                m1, m2 = encode(row, right, cb)
                out = decode(m1, m2, wrong, cb)
                if avg_distortion(H2, row, out.xhat1) > spec.D1 + 1e-9:
                    garbled += 1
        assert garbled > 0


class TestJep:
    def test_all_types_in_ball(self):
        spec = make_spec(alpha=3.0)
        cb = build_codebook(spec, 6, delta=0.5)
        assert not cb.has_out_of_ball
        assert jep_exact(cb) == 0.0

    def test_empty_ball_probability_one(self):
        assert ball_complement_probability(Distribution.bernoulli(0.3), 5, 1e-9) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_empty_ball_semantics(self):
        # no type fits inside a vanishing ball: every sequence erases, the
        # error probability is one, and a constant message leaks nothing
        spec = SystemSpec(
            source=Distribution([0.999, 0.001]), d1=H2, d2=H2,
            D1=0.2, D2=0.1, R1=1.0, R2=1.0, r1=0.0, r2=0.0, alpha=1e-6,
        )
        cb = build_codebook(spec, 4, delta=1e-6)
        assert len(cb.books) == 0
        assert jep_exact(cb) == 1.0
        assert leakage_exact(cb, "M1") == 0.0
        assert leakage_exact(cb, "M1M2") == 0.0
        m1, m2 = encode([0, 1, 0, 1], KeyPair(0, 0, 0, 0), cb)
        assert m1 == M0_LAYER1 and m2 == M0_LAYER2

    def test_matches_type_sum(self):
        spec = make_spec(alpha=0.1)
        cb = build_codebook(spec, 8, delta=0.05)
        expect = sum(
            type_class_probability(t, spec.source)
            for t in __import__("srleak.probcore", fromlist=["enumerate_types"]).enumerate_types(8, 2)
            if binary_kl(t.counts[1] / 8, 0.3) > 0.15
        )
        assert jep_exact(cb) == pytest.approx(expect, abs=1e-15)

    def test_type_count_bound_holds(self):
        spec = make_spec(alpha=0.1)
        cb = build_codebook(spec, 8, delta=0.05)
        assert jep_exact(cb) <= jep_type_count_bound(8, 2, 0.1, 0.05) + 1e-15

    def test_exponent_threshold(self):
        n_star = jep_exponent_threshold(2, 1.0)
        assert n_star == 6
        for n in range(n_star, n_star + 6):
            assert ball_complement_probability(
                Distribution.bernoulli(0.3), n, 0.05 + 1.0
            ) <= 2.0 ** (-n * 0.05) + 1e-15

    def test_monte_carlo_agrees(self):
        spec = make_spec(alpha=0.08)
        cb = build_codebook(spec, 10, delta=0.04)
        exact = jep_exact(cb)
        rng = np.random.default_rng(17)
        est = simulate_jep(cb, 40_000, rng)
        sigma = math.sqrt(exact * (1 - exact) / 40_000)
        assert abs(est - exact) <= 4 * sigma + 1e-12


class TestLeakage:
    def test_single_type_single_bin(self):
        # ball reaches only the all-ones type (divergence log2(1/0.95) = 0.074)
        spec = SystemSpec(
            source=Distribution([0.05, 0.95]), d1=H2, d2=H2,
            D1=0.6, D2=0.5, R1=2.0, R2=2.0, r1=0.0, r2=0.0, alpha=0.08,
        )
        cb = build_codebook(spec, 4, delta=0.005)
        assert len(cb.books) == 1
        assert cb.has_out_of_ball
        assert leakage_exact(cb, "M1") == pytest.approx(1.0)  # log2(1 + 1)

    def test_one_bin_per_type_collapse(self):
        # r1 high enough that each type codebook fits one bin
        spec = make_spec(r1=0.5, r2=0.5, alpha=0.15)
        cb = build_codebook(spec, 6, delta=0.1)
        for k in range(len(cb.books)):
            assert cb.y_nbins(k) == 1
        expect = math.log2(1 + len(cb.books))
        assert leakage_exact(cb, "M1") == pytest.approx(expect, abs=1e-12)
        assert leakage_oracle(cb, "M1") == pytest.approx(expect, abs=1e-12)

    def test_closed_form_equals_oracle(self):
        configs = [
            dict(p=0.3, r1=0.0, r2=0.0, alpha=0.1, n=4, delta=0.3),
            dict(p=0.3, r1=0.25, r2=0.25, alpha=0.1, n=4, delta=0.3),
            dict(p=0.3, r1=0.2, r2=0.4, alpha=0.15, n=6, delta=0.2),
            dict(p=0.4, r1=0.34, r2=0.17, alpha=0.2, n=6, delta=0.25),
            dict(p=0.3, r1=0.13, r2=0.13, alpha=0.1, n=8, delta=0.15),
            dict(p=0.5, r1=0.25, r2=0.125, alpha=0.3, n=8, delta=0.2),
        ]
        for cfg in configs:
            spec = make_spec(p=cfg["p"], r1=cfg["r1"], r2=cfg["r2"], alpha=cfg["alpha"])
            cb = build_codebook(spec, cfg["n"], delta=cfg["delta"])
            for which in ("M1", "M1M2"):
                closed = leakage_exact(cb, which)
                oracle = leakage_oracle(cb, which)
                assert closed == pytest.approx(oracle, abs=1e-12), (cfg, which)

    def test_uniform_cipher_distribution(self):
        spec = make_spec(r1=0.25, r2=0.25)
        cb = build_codebook(spec, 8, delta=0.3)
        for b in cb.books[:2]:
            members = type_class_members(TypeClass(8, b.counts))
            row = members[0]
            seen: dict = {}
            for k1 in range(cb.cap1):
                m1, _ = encode(row, KeyPair(k1, 0, cb.bits1, cb.bits2), cb)
                seen[m1] = seen.get(m1, 0) + 1
            s1 = next(iter(seen)).cipher_width
            assert len(seen) == 1 << s1
            assert all(c * (1 << s1) == cb.cap1 for c in seen.values())

    def test_report(self):
        spec = make_spec(r1=0.25, r2=0.25)
        cb = build_codebook(spec, 6, delta=0.3)
        rep = leakage_report(cb, "M1M2")
        assert rep.oracle_enabled and rep.agree

    def test_oracle_cap(self):
        spec = make_spec()
        cb = build_codebook(spec, 8, delta=0.1)
        with pytest.raises(CapExceededError):
            leakage_oracle(cb, "M1", max_enum=10)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        spec = make_spec(r1=0.25, r2=0.25, alpha=0.12)
        cb = build_codebook(spec, 6, delta=0.2)
        path = str(tmp_path / "book.srcb")
        save_codebook(cb, path)
        loaded = load_codebook(path)
        assert loaded.n == cb.n
        assert loaded.delta == cb.delta
        assert loaded.inball_type_ids == cb.inball_type_ids
        for which in ("M1", "M1M2"):
            assert leakage_exact(loaded, which) == leakage_exact(cb, which)
        rng = np.random.default_rng(3)
        for _ in range(20):
            keys = sample_keys(cb, rng)
            row = rng.choice(2, size=6, p=spec.source.probs).astype(np.int8)
            assert encode(row, keys, cb) == encode(row, keys, loaded)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.srcb"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CodebookError):
            load_codebook(str(path))

    def test_bad_version(self, tmp_path):
        spec = make_spec()
        cb = build_codebook(spec, 4, delta=0.2)
        path = str(tmp_path / "book.srcb")
        save_codebook(cb, path)
        raw = bytearray(open(path, "rb").read())
        raw[4] = 99
        open(path, "wb").write(bytes(raw))
        with pytest.raises(CodebookError):
            load_codebook(path)


class TestKeyBits:
    def test_floor_rule(self):
        assert key_bits(8, 0.25) == 2
        assert key_bits(8, 0.1) == 0
        assert key_bits(10, 0.1) == 1
        assert key_bits(12, 0.06) == 0


class TestLeakageTrend:
    def test_gap_bounded_and_shrinking_along_ladder(self):
        # ladder chosen so the integer covering radius floor(n*D1) grows with
        # every step; with a repeated radius the normalized codebook rate
        # rises and the finite-blocklength gap can tick up (see ledger)
        from srleak.exponents import leakage_exponent_m1

        spec = make_spec(r1=0.06, r2=0.1, R1=1.6, R2=1.6, alpha=0.1)
        lam1 = leakage_exponent_m1(spec)
        c1 = 4 * 2 * 2 + 9
        gaps = []
        for n in (4, 6, 10):
            cb = build_codebook(spec, n, delta=0.05)
            gap = leakage_exact(cb, "M1") / n - lam1
            bound = (2 * math.log2(n + 1) + c1 * math.log2(n)) / n + 0.05
            assert 0.0 <= gap <= bound
            gaps.append(gap)
        assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])), gaps
