import numpy as np
import pytest

from services.bitcore import BitVector, parity
from services.condenser import (
    DyadicProbability, bernoulli_bias_exact, bernoulli_bit, bernoulli_row, bernoulli_rows_array,
    build_condenser_matrix, collision_bound, condense, condenser_descriptor, condenser_params, export_matrix,
    SparseRowMatrix, parity_uint64, rebuild_matrix, row_probability, walk_vertices,
)
from services.errors import LengthMismatchError, ParameterError, VerificationError


@pytest.fixture(scope="module")
def small_params():
    """n = 16, k = 12: t = 120 rows of expected weight 32/3."""
    return condenser_params(16, 12)


@pytest.fixture(scope="module")
def small_seed(small_params):
    return BitVector.random(small_params.seed_length, np.random.default_rng(31))


class TestBernoulli:
    """Test cases for dyadic Bernoulli simulation."""

    def test_digits(self):
        """Test that b_1 is the most significant digit."""
        p = DyadicProbability(0b101, 3)
        assert p.digits == [1, 0, 1]
        assert p.value == 0.625

    def test_tie_gives_zero(self):
        """Test that a block equal to p in every digit yields 0."""
        p = DyadicProbability(0b101, 3)
        assert bernoulli_bit(0b101, p) == 0
        # s = 0.100 < 0.101
        assert bernoulli_bit(0b001, p) == 1
        # s = 0.110 > 0.101
        assert bernoulli_bit(0b011, p) == 0

    @pytest.mark.parametrize("t_bits", range(1, 9))
    def test_bias_is_exact(self, t_bits):
        """Test Pr[bit = 1] = 0.b_1…b_t for every numerator."""
        for numerator in range(1 << t_bits):
            p = DyadicProbability(numerator, t_bits)
            assert bernoulli_bias_exact(p) == p.value

    def test_bias_at_twelve_digits(self):
        """Test a few twelve-digit probabilities."""
        for numerator in (0, 1, 2731, 4095):
            p = DyadicProbability(numerator, 12)
            assert bernoulli_bias_exact(p) == p.value

    def test_numerator_range(self):
        """Test that p must lie in [0, 1)."""
        with pytest.raises(ParameterError):
            DyadicProbability(8, 3)
        with pytest.raises(ParameterError):
            DyadicProbability.from_float(1.0, 4)

    def test_rows_array_matches_scalar(self):
        """Test the vectorized rows against bernoulli_row."""
        p = DyadicProbability(11, 4)
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, size=(20, 24), dtype=np.uint8)
        rows = bernoulli_rows_array(bits, p, 6)
        for r in range(20):
            v = BitVector(24, sum(int(b) << i for i, b in enumerate(bits[r])))
            expected = bernoulli_row(v, p, 6)
            assert [int(e) for e in rows[r]] == [expected[i] for i in range(6)]

    def test_row_needs_enough_bits(self):
        """Test that a row of n entries needs n·t_bits bits."""
        with pytest.raises(LengthMismatchError):
            bernoulli_row(BitVector.zeros(10), DyadicProbability(1, 4), 3)


class TestParameters:
    """Test cases for condenser parameters."""

    def test_acceptance_scale(self):
        """Test n = 64, k = 16: t = 160, c = 48, clip = 57.6 and the derived seed length."""
        cp = condenser_params(64, 16)
        assert cp.t == 160
        assert cp.c == pytest.approx(48.0)
        assert cp.clip == pytest.approx(57.6)
        assert cp.p_bits == 12 and cp.r0 == 768
        assert (cp.prg_w, cp.prg_k, cp.r) == (32, 5, 352)
        assert cp.power == 38
        assert cp.seed_length == 18478
        assert cp.locality_claim == 57

    def test_collision_bound(self):
        """Test 2^{−0.5k+1} + (5/6 + λ)^t."""
        cp = condenser_params(64, 16)
        assert collision_bound(cp) == pytest.approx(2.0 ** -7 + (5 / 6 + 0.01) ** 160)

    def test_too_little_entropy(self):
        """Test that k ≤ 2 log₂ n leaves no room for sparse rows."""
        with pytest.raises(ParameterError, match="too small"):
            condenser_params(64, 8)

    def test_invalid(self):
        """Test the basic ranges."""
        with pytest.raises(ParameterError):
            condenser_params(2, 1)
        with pytest.raises(ParameterError):
            condenser_params(16, 17)


class TestCondenserMatrix:
    """Test cases for the generated sparse matrix."""

    def test_apply_hand_matrix(self):
        """Test row parities of a 3×5 matrix: x = 10110 gives 1, 0, 0."""
        matrix = SparseRowMatrix(n=5, rows=((0, 1), (2, 3, 4), ()), vertices=(0, 0, 0),
                                 clipped=(False, False, True), unclipped_weights=(2, 3, 9))
        y = matrix.apply(BitVector.from_string("10110"))
        assert y.to_string() == "100"
        with pytest.raises(LengthMismatchError):
            matrix.apply(BitVector.zeros(4))

    def test_row_count_and_clip(self, small_params, small_seed):
        """Test t rows, weights within 1.2c, clipped rows empty."""
        matrix = build_condenser_matrix(small_seed, small_params)
        assert matrix.t == 120
        assert len(matrix.vertices) == 120
        assert max(matrix.weights) <= small_params.clip
        for row, clipped, weight in zip(matrix.rows, matrix.clipped, matrix.unclipped_weights):
            if clipped:
                assert row == () and weight > small_params.clip
            else:
                assert len(row) == weight

    def test_walk_starts_at_seed_label(self, small_params, small_seed):
        """Test that the first row comes from the start label in the low seed bits."""
        vertices = walk_vertices(small_seed, small_params)
        assert len(vertices) == small_params.t
        assert vertices[0] == small_seed.bits & ((1 << small_params.r) - 1)

    def test_seed_length_checked(self, small_params):
        """Test that the seed must match the parameters."""
        with pytest.raises(LengthMismatchError):
            build_condenser_matrix(BitVector.zeros(small_params.seed_length - 1), small_params)

    def test_condense_is_row_parity(self, small_params, small_seed):
        """Test output bit i = ⟨row_i, x⟩."""
        x = BitVector.random(16, np.random.default_rng(4))
        out = condense(x, small_seed, small_params)
        matrix = build_condenser_matrix(small_seed, small_params)
        assert [out[i] for i in range(out.length)] == [parity(mask & x.bits) for mask in matrix.masks]

    def test_kills_array_matches_apply(self, small_params, small_seed):
        """Test kernel membership against explicit application."""
        matrix = build_condenser_matrix(small_seed, small_params)
        diffs = np.array([0, 1, 0xffff, 0x1234, 0x8001], dtype=np.uint64)
        kills = matrix.kills_array(diffs)
        assert kills[0]
        for d, k in zip(diffs, kills):
            assert bool(k) == (matrix.apply(BitVector(16, int(d))).bits == 0)

    def test_descriptor(self, small_params, small_seed):
        """Test the linear descriptor and its footprints."""
        ext = condenser_descriptor(small_params)
        assert (ext.n, ext.d, ext.m) == (16, small_params.seed_length, 120)
        rng = np.random.default_rng(5)
        a, b = BitVector.random(16, rng), BitVector.random(16, rng)
        assert ext(a ^ b, small_seed) == ext(a, small_seed) ^ ext(b, small_seed)
        assert max(row.bit_count() for row in ext.rows(small_seed)) <= ext.locality_claim

    def test_uncompressed_variant(self):
        """Test the variant that walks on full r0-bit labels."""
        cp = condenser_params(16, 12, compressed=False)
        assert cp.seed_length == cp.r0 + (cp.t - 1) * 3 * cp.power
        matrix = build_condenser_matrix(BitVector.random(cp.seed_length, np.random.default_rng(6)), cp)
        assert matrix.t == 120
        assert max(matrix.weights) <= cp.clip

    def test_row_probability(self, small_params):
        """Test that rows use p = 1/l rounded to t_bits digits."""
        p = row_probability(small_params)
        assert p.t_bits == 8
        assert p.value == pytest.approx(1 / small_params.l, abs=2.0 ** -8)


class TestExport:
    """Test cases for matrix export and rebuild."""

    def test_rebuild_matches(self, small_params, small_seed):
        """Test that an exported matrix rebuilds from its seed."""
        artifact = export_matrix(small_seed, small_params)
        assert len(artifact.rows) == 120
        rebuilt = rebuild_matrix(artifact)
        assert [list(r) for r in rebuilt.rows] == artifact.rows

    def test_tampered_rows(self, small_params, small_seed):
        """Test that edited rows are detected."""
        artifact = export_matrix(small_seed, small_params)
        artifact.rows[0] = [0, 1, 2]
        with pytest.raises(VerificationError, match="rows"):
            rebuild_matrix(artifact)

    def test_parity_uint64(self):
        """Test packed parity on a few words."""
        values = np.array([0, 1, 3, 0x8000000000000001, 0xffffffffffffffff], dtype=np.uint64)
        assert parity_uint64(values).tolist() == [False, True, False, False, False]
