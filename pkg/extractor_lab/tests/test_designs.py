import itertools
import math

import numpy as np
import pytest

import services.designs as designs
from models.artifacts import DesignKind
from services.artifact_cache import get_artifact_cache
from services.bitcore import BitVector
from services.descriptors import ExtractorDescriptor, seed_prefixed
from services.designs import (
    build_design, build_design_extractor, build_weak_design, get_design, load_design_artifact,
    restrict, sample_extractor_property, verify_extractor_property,
)
from services.errors import InfeasibleError, ParameterError, VerificationError
from services.primitives import polynomial_hash_descriptor


def line_base(n0: int, b: int, d0: int) -> ExtractorDescriptor:
    return seed_prefixed(polynomial_hash_descriptor(n0, b, d0))


class TestBuildDesign:
    """Test cases for the greedy lexicographic design search."""

    def test_disjoint_blocks(self):
        """Test (8, 2, 0, 4): two disjoint 4-sets."""
        design = build_design(8, 2, 0, 4)
        assert design.sets == ((0, 1, 2, 3), (4, 5, 6, 7))

    def test_single_set(self):
        """Test (4, 1, 0, 4): the whole universe."""
        assert build_design(4, 1, 0, 4).sets == ((0, 1, 2, 3),)

    def test_lexicographic_first_compatible(self):
        """Test (10, 3, 2, 4) against the hand-run greedy order."""
        design = build_design(10, 3, 2, 4)
        assert design.sets == ((0, 1, 2, 3), (0, 1, 4, 5), (0, 1, 6, 7))
        design.verify()

    def test_matches_exhaustive_first_fit(self):
        """Test that each set is the first 4-subset of [12] compatible with its predecessors."""
        design = build_design(12, 4, 1, 4)
        chosen = []
        for s in design.sets:
            first = next(c for c in itertools.combinations(range(12), 4)
                         if all(len(set(c) & set(p)) <= 1 for p in chosen))
            assert s == first
            chosen.append(s)

    def test_infeasible(self):
        """Test that a second disjoint 4-set in [4] is reported as infeasible."""
        with pytest.raises(InfeasibleError):
            build_design(4, 2, 0, 4)

    def test_invalid_parameters(self):
        """Test that a set larger than the universe is rejected."""
        with pytest.raises(ParameterError):
            build_design(3, 1, 0, 4)

    def test_verify_catches_large_intersection(self):
        """Test that the verifier rejects a tampered family."""
        design = designs.Design(universe_size=6, sets=((0, 1, 2), (0, 1, 3)), intersection_bound=1, set_size=3)
        with pytest.raises(VerificationError, match="exceeds bound"):
            design.verify()

    def test_restrict_order(self):
        """Test that the first listed position becomes the low bit."""
        seed = BitVector.from_string("0110")
        assert restrict(seed, [1, 0]) == 0b01
        assert restrict(seed, [0, 2, 1]) == 0b110


class TestWeakDesign:
    """Test cases for the polynomial weak design."""

    def test_universe_size(self):
        """Test (m=4, κ=2, l=4): d = ⌈4/ln 2⌉·4 = 24."""
        wd = build_weak_design(4, 2.0, 4)
        assert wd.universe_size == math.ceil(4 / math.log(2)) * 4 == 24
        assert wd.m == 4
        wd.verify()

    def test_single_set(self):
        """Test that m = 1 is accepted with an empty overlap sum."""
        wd = build_weak_design(1, 2.0, 3)
        assert wd.overlap_sums() == [0]

    def test_sum_bound_holds(self):
        """Test Σ_{j<i} 2^{|S_i ∩ S_j|} ≤ κ(m−1) for a larger family."""
        wd = build_weak_design(20, 2.0, 5)
        assert all(total <= 2.0 * 19 for total in wd.overlap_sums())

    def test_kappa_must_exceed_one(self):
        """Test that κ ≤ 1 is rejected."""
        with pytest.raises(ParameterError, match="kappa"):
            build_weak_design(4, 1.0, 4)

    def test_large_kappa_single_set(self):
        """Test that blocks narrower than the field fall back to l-subsets."""
        wd = build_weak_design(1, 100.0, 4)
        assert wd.universe_size == 4
        assert wd.sets == ((0, 1, 2, 3),)

    def test_large_kappa_subset_scan(self):
        """Test (m=3, κ=20, l=4): d = 8, sets taken in lexicographic order."""
        wd = build_weak_design(3, 20.0, 4)
        assert wd.universe_size == 8
        assert wd.sets == ((0, 1, 2, 3), (0, 1, 2, 4), (0, 1, 2, 5))
        assert wd.overlap_sums() == [0, 8, 16]

    def test_large_kappa_runs_out(self):
        """Test that a one-set universe cannot hold two sets."""
        with pytest.raises(InfeasibleError, match="ran out"):
            build_weak_design(2, 100.0, 4)


class TestDesignExtractor:
    """Test cases for the greedy design extractor."""

    def test_lines_over_gf4_all_survive(self):
        """Test that the 16 lines of GF(4)² meet pairwise in at most αD = 1 point."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4)
        assert g.left_count == 16
        assert g.right_count == 16
        assert g.degree == 4

    def test_alpha_one_keeps_everything(self):
        """Test that α = 1 deletes nothing."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=1.0, K=4)
        assert g.left_labels == tuple(range(16))

    def test_duplicate_neighborhoods_are_deleted(self):
        """Test that candidates sharing a neighborhood leave only the first survivor."""
        constant = ExtractorDescriptor(
            name="constant", n=2, d=1, m=1, k_claim=0, eps_claim=1.0, locality_claim=0,
            evaluate=lambda x, seed: BitVector(1, 0),
        )
        g = build_design_extractor(constant, alpha=0.5, K=1)
        assert g.left_labels == (0,)

    def test_small_instance_design_property(self):
        """Test the n0 = 6, d0 = 3 instance exhaustively."""
        g = build_design_extractor(line_base(6, 3, 3), alpha=0.125, K=8)
        assert g.left_count == 64
        masks = g.neighbor_masks()
        for u, v in itertools.combinations(range(g.left_count), 2):
            assert (masks[u] & masks[v]).bit_count() <= 1
        for nb in g.neighbors:
            assert len(set(nb)) == g.degree

    def test_target_and_infeasible(self):
        """Test that a target stops early and an unreachable target raises."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4, target=5)
        assert g.left_count == 5
        with pytest.raises(InfeasibleError):
            build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4, target=17)

    def test_extractor_property_trivial_subsets(self):
        """Test Bad_S = 0 for S = ∅ and S = [M]."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4, eps=0.25)
        assert verify_extractor_property(g, []) == 0
        assert verify_extractor_property(g, range(g.right_count)) == 0

    def test_extractor_property_matches_recount(self):
        """Test Bad_S against a direct recount on random subsets."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4, eps=0.25)
        rng = np.random.default_rng(11)
        for _ in range(20):
            S = {int(r) for r in np.flatnonzero(rng.random(g.right_count) < 0.5)}
            rho_s = len(S) / g.right_count
            expected = sum(1 for nb in g.neighbors if abs(sum(r in S for r in nb) / g.degree - rho_s) > 0.25)
            assert verify_extractor_property(g, S) == expected

    def test_sampled_property_report(self):
        """Test the sampled report covers the trivial subsets plus the samples."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4)
        report = sample_extractor_property(g, np.random.default_rng(0), samples=32)
        assert report.subsets_tested == 34
        assert report.max_bad == max(report.bad_counts)
        assert report.holds == (report.max_bad <= 4)

    def test_right_vertex_out_of_range(self):
        """Test that subsets outside [M] are rejected."""
        g = build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4)
        with pytest.raises(ParameterError):
            verify_extractor_property(g, [16])


class TestDesignArtifacts:
    """Test cases for artifact export and re-verification."""

    def setup_method(self):
        """Start every test with an empty artifact cache."""
        get_artifact_cache().clear()

    @pytest.mark.parametrize("family", [
        lambda: build_design(10, 3, 2, 4),
        lambda: build_weak_design(4, 2.0, 4),
        lambda: build_design_extractor(line_base(4, 2, 2), alpha=0.25, K=4),
    ])
    def test_artifacts_reload(self, family):
        """Test that every family kind survives export and reload."""
        artifact = family().to_artifact()
        assert artifact.content_hash == artifact.compute_hash()
        reloaded = load_design_artifact(artifact)
        assert [list(s) for s in (reloaded.sets if hasattr(reloaded, "sets") else reloaded.neighbors)] == artifact.sets

    def test_hash_mismatch(self):
        """Test that a payload edited after sealing is rejected."""
        artifact = build_design(8, 2, 0, 4).to_artifact()
        artifact.sets[1] = [3, 4, 5, 6]
        with pytest.raises(VerificationError, match="hash"):
            load_design_artifact(artifact)

    def test_resealed_violation(self):
        """Test that a resealed artifact still fails its bound check."""
        artifact = build_design(8, 2, 0, 4).to_artifact()
        artifact.sets[1] = [3, 4, 5, 6]
        with pytest.raises(VerificationError, match="exceeds bound"):
            load_design_artifact(artifact.sealed())

    def test_cache_hit_skips_build(self, mocker):
        """Test that a second request for the same design is served from the cache."""
        spy = mocker.spy(designs, "build_design")
        first = get_design(10, 3, 2, 4)
        second = get_design(10, 3, 2, 4)
        assert first is second
        assert spy.call_count == 1
        assert get_artifact_cache().hits == 1

    def test_kind_enum_values(self):
        """Test the serialized kind names."""
        assert [k.value for k in DesignKind] == ["design", "weak_design", "design_extractor"]
