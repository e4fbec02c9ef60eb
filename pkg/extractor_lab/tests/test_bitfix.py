import math

import numpy as np
import pytest

from services.bitcore import BitVector, parity
from services.bitfix import (
    BitFixingSource, bitfix_boost, bitfix_error_reduce, claimed_t_wise, compute_nobf_witness,
    design_graph_for_profile, obf_to_nobf, output_bias, pipeline_for_length, resilient_extract, sampled_complement,
    verification_profile,
)
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError
from services.primitives import short_seed_hash_descriptor
from services.resilient import TribesMajority, block_positions
from services.samplers import expander_walk_sampler


@pytest.fixture(scope="module")
def graph():
    """The 16 lines of GF(4)² as a design extractor."""
    return design_graph_for_profile(verification_profile())


class TestTribesMajority:
    """Test cases for the tribes-majority resilient function."""

    def test_balanced_width(self):
        """Test that 12-bit groups use tribes of width 3."""
        rf = TribesMajority(36, 1)
        assert (rf.schedule.width, rf.schedule.tribes, rf.schedule.groups) == (3, 4, 3)
        assert rf.schedule.block_size == 36

    def test_majority_of_groups(self):
        """Test that two satisfied groups out of three set the output."""
        rf = TribesMajority(36, 1)
        assert rf(BitVector(36, 0b111 | (0b111 << 12))) == BitVector(1, 1)
        assert rf(BitVector(36, 0b111)) == BitVector(1, 0)
        assert rf(BitVector(36, 0b011 | (0b111 << 12))) == BitVector(1, 0)

    def test_trailing_bits_unused(self):
        """Test that bits past the last block do not matter."""
        rf = TribesMajority(40, 1)
        y = BitVector(40, 0b111 << 12)
        assert rf(y) == rf(y ^ BitVector(40, 0xf << 36))

    def test_blocks_per_output(self):
        """Test that output i reads the i-th block."""
        rf = TribesMajority(72, 2)
        assert block_positions(rf, 1) == list(range(36, 72))
        y = BitVector(72, (0b111 << 36) | (0b111 << 48))
        assert rf(y) == BitVector(2, 0b10)

    def test_invalid(self):
        """Test the input and width checks."""
        with pytest.raises(ParameterError):
            TribesMajority(5, 2)
        with pytest.raises(ParameterError):
            TribesMajority(36, 0)
        with pytest.raises(ParameterError):
            TribesMajority(36, 1, width=13)
        with pytest.raises(LengthMismatchError):
            TribesMajority(36, 1)(BitVector.zeros(35))


class TestBitFixingSource:
    """Test cases for oblivious bit-fixing sources."""

    def test_assign(self):
        """Test that free positions take assignment bits in order and fixed bits stay."""
        source = BitFixingSource(n=6, free=(4, 1), fixed_values=0b100101)
        assert source.k == 2
        assert source.assign(0b00).to_string() == "101001"
        assert source.assign(0b01).to_string() == "101011"
        assert source.assign(0b10).to_string() == "111001"

    def test_all_assignments(self):
        """Test the packed enumeration against assign."""
        source = BitFixingSource(n=10, free=(0, 3, 7), fixed_values=0b1001000110)
        packed = source.all_assignments_array()
        assert [int(v) for v in packed] == [source.assign(a).bits for a in range(8)]

    def test_random(self):
        """Test that random sources have k distinct sorted free positions."""
        source = BitFixingSource.random(16, 12, np.random.default_rng(3))
        assert len(source.free) == 12
        assert list(source.free) == sorted(set(source.free))

    def test_invalid(self):
        """Test the position checks."""
        with pytest.raises(ParameterError):
            BitFixingSource(n=4, free=(4,))
        with pytest.raises(ParameterError):
            BitFixingSource(n=4, free=(1, 1))
        with pytest.raises(ParameterError):
            BitFixingSource(n=4, free=(0,), fixed_values=16)


class TestReduction:
    """Test cases for the OBF → NOBF reduction and its witness."""

    def test_graph_shape(self, graph):
        """Test N = M = 16 and D = 4."""
        assert (graph.left_count, graph.right_count, graph.degree) == (16, 16, 4)

    def test_obf_to_nobf_parities(self, graph):
        """Test Y_i = parity of x over Γ(i)."""
        x = BitVector.random(16, np.random.default_rng(8))
        y = obf_to_nobf(x, graph)
        assert y.length == 16
        assert [y[i] for i in range(16)] == [parity(mask & x.bits) for mask in graph.neighbor_masks()]

    def test_obf_to_nobf_length(self, graph):
        """Test that the source must cover the right vertices."""
        with pytest.raises(LengthMismatchError):
            obf_to_nobf(BitVector.zeros(15), graph)

    def test_claimed_t(self, graph):
        """Test ⌊((δ − ε)D − 1)/(αD)⌋ + 1 for δ = 3/4, ε = 1/4."""
        assert claimed_t_wise(graph, 0.75, 0.25) == 2
        assert claimed_t_wise(graph, 0.0, 0.25) == 1

    def test_witness_on_random_sources(self, graph):
        """Test that good outputs are exactly pairwise independent."""
        rng = np.random.default_rng(17)
        for _ in range(3):
            source = BitFixingSource.random(16, 12, rng)
            w = compute_nobf_witness(graph, source, 0.25)
            assert len(w.good) + len(w.bad) == 16
            assert w.q == len(w.bad)
            assert w.t_wise == 2
            assert w.unique_neighbor_ok and w.exhaustive_ok
            assert w.gamma == 0.0
            g = len(w.good)
            assert w.subsets_checked == g + math.comb(g, 2)

    def test_fully_fixed_source(self, graph):
        """Test that a constant source leaves every output constant."""
        source = BitFixingSource(n=16, free=(), fixed_values=0x1234)
        w = compute_nobf_witness(graph, source, 0.25)
        assert len(w.good) == 16
        assert not w.unique_neighbor_ok
        assert w.exhaustive_ok is False
        assert w.gamma == 0.5
        assert len(w.failures) == 16

    def test_structural_only(self, graph):
        """Test the check without enumerating assignments."""
        source = BitFixingSource.random(16, 12, np.random.default_rng(4))
        w = compute_nobf_witness(graph, source, 0.25, exhaustive=False)
        assert w.exhaustive_ok is None
        assert w.to_dict()["exhaustive_ok"] is None

    def test_exhaustive_budget(self, graph):
        """Test that enumeration is capped."""
        source = BitFixingSource.random(16, 12, np.random.default_rng(5))
        with pytest.raises(BudgetExceededError):
            compute_nobf_witness(graph, source, 0.25, max_free=10)


class TestExtraction:
    """Test cases for deterministic extraction steps."""

    def test_error_reduce(self):
        """Test the XOR of per-slice outputs."""
        ext = lambda x: x.slice(0, 2)
        slices = [BitVector(4, 0b0110), BitVector(4, 0b1011), BitVector(4, 0b0001)]
        assert bitfix_error_reduce(slices, ext) == BitVector(2, 0b10 ^ 0b11 ^ 0b01)
        with pytest.raises(LengthMismatchError):
            bitfix_error_reduce([], ext)

    def test_sampled_complement(self):
        """Test that unsampled bits are kept in order and zero-padded."""
        x = BitVector.from_string("10110")
        assert sampled_complement(x, [1, 3]).to_string() == "11000"
        assert sampled_complement(x, [1, 1, 3]).to_string() == "11000"

    def test_boost_wiring(self):
        """Test that Z1 drives the sampler and Z2 seeds the extractor."""
        samp = expander_walk_sampler(16, 2)
        seeded = short_seed_hash_descriptor(16, 2, 2)
        z = BitVector(samp.seed_length + 2, 0b10_0110101)
        x = BitVector.random(16, np.random.default_rng(2))
        z1, z2 = z.split([samp.seed_length, 2])
        expected = seeded(sampled_complement(x, samp(z1)), z2)
        assert bitfix_boost(x, lambda _: z, seeded, samp) == expected

    def test_boost_checks_split(self):
        """Test that the deterministic output must split into the two seeds."""
        samp = expander_walk_sampler(16, 2)
        seeded = short_seed_hash_descriptor(16, 2, 2)
        with pytest.raises(LengthMismatchError):
            bitfix_boost(BitVector.zeros(16), lambda _: BitVector.zeros(3), seeded, samp)


class TestPipeline:
    """Test cases for the wired n = 32 pipeline."""

    def test_toy_pipeline(self):
        """Test the graph, the seed budget and the output length."""
        pipeline = pipeline_for_length(32)
        assert pipeline.graph.left_count == 256
        assert pipeline.rf.output_length == pipeline.sampler.seed_length + pipeline.seeded.d
        assert pipeline.output_length == 9
        x = BitVector.random(32, np.random.default_rng(6))
        assert pipeline.extract(x).length == 9
        assert pipeline.describe()["graph"] == {"N": 256, "M": 32, "D": 4}

    def test_pipeline_checks_length(self):
        """Test that the pipeline reads exactly n bits."""
        with pytest.raises(LengthMismatchError):
            pipeline_for_length(32).extract(BitVector.zeros(31))

    def test_unknown_length(self):
        """Test that only scheduled lengths are served."""
        with pytest.raises(ParameterError, match="available"):
            pipeline_for_length(48)

    def test_deterministic_stage(self):
        """Test that the deterministic stage is the resilient function of the reduced string."""
        pipeline = pipeline_for_length(32)
        x = BitVector.random(32, np.random.default_rng(8))
        expected = resilient_extract(obf_to_nobf(x, pipeline.graph), pipeline.rf)
        assert pipeline.deterministic(x) == expected

    def test_output_bias_of_fixed_source(self):
        """Test that a source without free bits sits at distance 1 − 2^-m."""
        pipeline = pipeline_for_length(32)
        source = BitFixingSource(n=32, free=(), fixed_values=0xdeadbeef)
        assert output_bias(pipeline, source) == pytest.approx(1 - 2 ** -9)

    def test_output_bias_small_support(self):
        """Test that 16 source strings cover at most 16 of the 512 outputs."""
        pipeline = pipeline_for_length(32)
        source = BitFixingSource(n=32, free=(3, 10, 17, 29), fixed_values=0x0f0f0f0f)
        bias = output_bias(pipeline, source)
        assert 1 - 16 / 512 - 1e-12 <= bias <= 1 - 2 ** -9 + 1e-12

    def test_output_bias_budget(self):
        source = BitFixingSource(n=32, free=tuple(range(17)))
        with pytest.raises(BudgetExceededError):
            output_bias(pipeline_for_length(32), source)
