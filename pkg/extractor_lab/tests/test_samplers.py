import numpy as np
import pytest

from services.bitcore import BitVector
from services.descriptors import seed_prefixed
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError
from services.expander import mgg_for_bits
from services.primitives import leftover_hash_descriptor, polynomial_hash_descriptor
from services.samplers import (
    averaging_from_oblivious, certify_averaging, deviation_rate, expander_walk_sampler, fixed_sampler,
    identity_sampler, oblivious_from_extractor, sample_block_source, sample_source, sampled_entropy_profile,
    sampler_from_recipe,
)


class TestFixedSamplers:
    """Test cases for seedless samplers and source sampling."""

    def test_sample_source_order(self):
        """Test that sampled bits follow the sampler's order."""
        x = BitVector.from_string("10110")
        s = fixed_sampler([4, 0, 2], 5)
        assert sample_source(x, s, BitVector.zeros(0)).to_string() == "011"

    def test_identity(self):
        """Test that the identity sampler returns the source unchanged."""
        x = BitVector.from_string("0111001")
        assert sample_source(x, identity_sampler(7), BitVector.zeros(0)) == x

    def test_positions_in_range(self):
        """Test that positions outside the universe are rejected."""
        with pytest.raises(ParameterError):
            fixed_sampler([0, 5], 5)

    def test_universe_larger_than_source(self):
        """Test that a sampler cannot read past the source."""
        with pytest.raises(LengthMismatchError):
            sample_source(BitVector.zeros(4), identity_sampler(5), BitVector.zeros(0))

    def test_block_source(self):
        """Test one sub-source per seed."""
        x = BitVector.from_string("1100")
        blocks = sample_block_source(x, fixed_sampler([1, 2], 4), [BitVector.zeros(0)] * 3)
        assert [b.to_string() for b in blocks] == ["10", "10", "10"]


class TestExpanderWalkSampler:
    """Test cases for the expander-walk sampler."""

    def test_seed_layout(self):
        """Test that the low r seed bits choose the start and the rest drive the walk."""
        s = expander_walk_sampler(16, 5)
        graph = mgg_for_bits(4)
        assert s.seed_length == 4 + 3 * 4
        seed = BitVector(16, 0b0110_1010_0011_1001)
        samples = s(seed)
        assert len(samples) == 5
        assert samples[0] == 0b1001
        v = 0b1001
        for i, coin in enumerate([0b011, 0b100, 0b010, 0b011]):
            v = graph.neighbor(v, coin)
            assert samples[i + 1] == v

    def test_labels_reduced_to_universe(self):
        """Test that labels land in a universe that is not a power of two."""
        s = expander_walk_sampler(10, 8)
        rng = np.random.default_rng(6)
        for _ in range(50):
            assert all(0 <= v < 10 for v in s(BitVector.random(s.seed_length, rng)))

    def test_powered_walk_parameters(self):
        """Test that powering multiplies the coin budget and shrinks λ."""
        s = expander_walk_sampler(16, 3, power=2)
        assert s.seed_length == 4 + 2 * 6
        assert s.params["lambda"] < 0.79

    def test_invalid(self):
        """Test that a one-point universe is rejected."""
        with pytest.raises(ParameterError):
            expander_walk_sampler(1, 4)

    def test_wrong_seed_length(self):
        """Test that a sampler checks its seed length."""
        s = expander_walk_sampler(16, 2)
        with pytest.raises(LengthMismatchError):
            s(BitVector.zeros(s.seed_length + 1))


class TestExtractorSamplers:
    """Test cases for samplers built from extractors."""

    def test_oblivious_needs_seed_embedding(self):
        """Test that an extractor without an embedded seed is refused."""
        with pytest.raises(ParameterError, match="embed"):
            oblivious_from_extractor(leftover_hash_descriptor(8, 6, 1))

    def test_oblivious_samples_are_distinct(self):
        """Test that prefixing the seed makes the 2^d samples distinct."""
        s = oblivious_from_extractor(seed_prefixed(polynomial_hash_descriptor(4, 2, 2)))
        assert (s.seed_length, s.sample_count, s.universe) == (4, 4, 16)
        for x in range(16):
            samples = s(BitVector(4, x))
            assert [v & 0b11 for v in samples] == [0, 1, 2, 3]

    def test_averaging_relabel(self):
        """Test the accuracy requirement ε ≤ (1 − α)μ."""
        s = oblivious_from_extractor(seed_prefixed(polynomial_hash_descriptor(4, 2, 2)))
        averaging = averaging_from_oblivious(s, mu=1.0, alpha=0.0)
        assert averaging.params["mu1"] == 1.0 and averaging.params["mu2"] == 0.0
        with pytest.raises(ParameterError, match="accuracy"):
            averaging_from_oblivious(s, mu=0.5, alpha=0.5)

    def test_alpha_range(self):
        """Test that α must lie in [0, 1)."""
        s = oblivious_from_extractor(seed_prefixed(polynomial_hash_descriptor(4, 2, 2)))
        with pytest.raises(ParameterError):
            averaging_from_oblivious(s, mu=1.0, alpha=1.0)

    def test_recipe_round_trip(self):
        """Test that walk, fixed and averaging samplers rebuild from their recipes."""
        oblivious = oblivious_from_extractor(seed_prefixed(polynomial_hash_descriptor(4, 2, 2)))
        samplers = [
            expander_walk_sampler(16, 3, power=2),
            fixed_sampler([4, 0, 2], 5),
            averaging_from_oblivious(oblivious, mu=1.0, alpha=0.0),
        ]
        rng = np.random.default_rng(12)
        for s in samplers:
            rebuilt = sampler_from_recipe(s.recipe)
            assert (rebuilt.seed_length, rebuilt.sample_count, rebuilt.universe) == (
                s.seed_length, s.sample_count, s.universe)
            seed = BitVector.random(s.seed_length, rng)
            assert rebuilt(seed) == s(seed)
        assert sampler_from_recipe(samplers[2].recipe).params["mu1"] == 1.0

    def test_unknown_recipe(self):
        with pytest.raises(ParameterError, match="unknown sampler kind"):
            sampler_from_recipe({"kind": "lottery"})
        with pytest.raises(ParameterError, match="recipe"):
            sampler_from_recipe(expander_walk_sampler(16, 2, graph=mgg_for_bits(4)).recipe)


class TestCertification:
    """Test cases for Monte-Carlo sampler certificates."""

    def test_identity_never_fails(self):
        """Test that the full-universe sampler has no failures."""
        f = np.array([1, 0, 1, 1, 0, 1, 0, 1], dtype=float)
        rng = np.random.default_rng(2)
        cert = certify_averaging(identity_sampler(8), f, threshold=0.5, rng=rng, trials=50)
        assert cert.failure_rate == 0.0
        assert cert.true_mean == 0.625
        assert deviation_rate(identity_sampler(8), f, 0.01, rng, trials=50).failure_rate == 0.0

    def test_walk_sampler_rate_is_a_frequency(self):
        """Test that the walk sampler certificate is a frequency with a standard error."""
        s = expander_walk_sampler(64, 16)
        f = (np.arange(64) % 2).astype(float)
        cert = deviation_rate(s, f, 0.25, np.random.default_rng(3), trials=400)
        assert 0.0 <= cert.failure_rate <= 1.0
        assert cert.sigma > 0
        assert cert.trials == 400

    def test_function_size_checked(self):
        """Test that f must cover the sampler universe."""
        with pytest.raises(LengthMismatchError):
            certify_averaging(identity_sampler(4), np.ones(5), 0.5, np.random.default_rng(0))


class TestSampledEntropy:
    """Test cases for exact sampled min-entropy on bit-fixing sources."""

    def test_identity_keeps_all_free_bits(self):
        """Test δ = 3/8, τ = δ/4 on the identity sampler."""
        report = sampled_entropy_profile(identity_sampler(8), free=[0, 2, 5], n=8)
        assert report.delta == 0.375
        assert report.threshold == pytest.approx(0.75)
        assert report.seeds == 1
        assert report.entropy_counts[3] == 1
        assert report.good_fraction == 1.0

    def test_fixed_positions_miss_free_bits(self):
        report = sampled_entropy_profile(fixed_sampler([1, 3], 4), free=[0, 2], n=4)
        assert report.entropy_counts == [1, 0, 0]
        assert report.good_fraction == 0.0

    def test_walk_sampler_enumerates_every_seed(self):
        """Test that every seed of a short walk samples at least one free bit."""
        s = expander_walk_sampler(16, 2)
        report = sampled_entropy_profile(s, free=range(16), n=16)
        assert report.seeds == 1 << s.seed_length
        assert sum(report.entropy_counts) == report.seeds
        assert report.entropy_counts[0] == 0
        assert report.good_fraction == 1.0

    def test_checks(self):
        with pytest.raises(BudgetExceededError):
            sampled_entropy_profile(expander_walk_sampler(16, 5), free=[0], n=16, max_seed_bits=8)
        with pytest.raises(ParameterError):
            sampled_entropy_profile(identity_sampler(4), free=[4], n=4)
        with pytest.raises(LengthMismatchError):
            sampled_entropy_profile(identity_sampler(8), free=[0], n=4)
