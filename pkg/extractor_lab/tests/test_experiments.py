import csv

import numpy as np
import pytest

from models.experiments import ExperimentConfig
from services.bitcore import BitVector
from services.condenser import condenser_params
from services.errors import ParameterError
from services.experiments import (
    crafted_distribution, kernel_aligned_source, list_experiments, run_experiment, write_csv,
)
from services.harness import dense_sd_from_uniform, seed_error
from services.primitives import polynomial_hash_descriptor


def run(name, seed=7, **params):
    return run_experiment(ExperimentConfig(name=name, prng_seed=seed, params=params))


class TestRegistry:
    """Test cases for the experiment registry."""

    def test_every_experiment_is_listed(self):
        names = {info.name for info in list_experiments()}
        assert names == {
            "leftover_hash", "pairwise", "xor_law", "hitting", "design_artifacts", "basic_structure",
            "desk_quality", "error_reduction", "condenser", "bernoulli", "bitfix", "nisan", "sd_axioms",
        }

    def test_unknown_experiment(self):
        with pytest.raises(ParameterError, match="unknown experiment"):
            run("no_such_experiment")

    def test_unknown_parameter(self):
        """Test that overrides must name a default."""
        with pytest.raises(ParameterError, match="no parameters"):
            run("pairwise", width=3)

    def test_report_fields(self):
        """Test the hashes, seed and merged parameters of a report."""
        report = run("pairwise", seed=11, l=3)
        assert report.prng_seed == 11
        assert report.prng == "numpy-pcg64/1"
        assert report.params == {"l": 3}
        assert report.config_hash == ExperimentConfig(name="pairwise", prng_seed=11, params={"l": 3}).config_hash()
        assert report.elapsed_seconds >= 0

    def test_same_seed_same_numbers(self):
        """Test that a fixed PRNG seed reproduces the metrics."""
        first = run("leftover_hash", seed=3, n=10, k=6, sources=3)
        second = run("leftover_hash", seed=3, n=10, k=6, sources=3)
        assert first.metrics == second.metrics
        assert first.config_hash == second.config_hash
        assert run("leftover_hash", seed=4, n=10, k=6, sources=3).config_hash != first.config_hash


class TestExperiments:
    """Small-parameter runs of each experiment."""

    def test_leftover_hash(self):
        report = run("leftover_hash", n=10, k=6, delta=2, sources=3)
        assert report.passed
        assert report.metrics["m"] == 2
        assert report.metrics["max_sd"] <= report.thresholds["sd_bound"]

    def test_pairwise(self):
        report = run("pairwise", l=3)
        assert report.passed
        assert report.metrics["pairs_checked"] == 56
        assert report.metrics["max_count_deviation"] == 0

    def test_xor_law(self):
        report = run("xor_law", repeats=2)
        assert report.passed
        assert report.metrics["cases"] == 8
        assert report.metrics["max_ratio_to_bound"] <= 1.0

    def test_hitting(self):
        report = run("hitting", side=16, t=3, walks=4000)
        assert report.passed
        assert 0.3 < report.metrics["beta"] < 0.34

    def test_bernoulli(self):
        report = run("bernoulli", max_bits=8, numerators_per_width=4)
        assert report.passed
        assert report.metrics["max_error"] == 0.0

    def test_sd_axioms(self):
        report = run("sd_axioms", triples=100)
        assert report.passed
        assert report.metrics["sd_violations"] == 0

    def test_bitfix(self):
        report = run("bitfix", sources=2)
        assert report.passed
        assert report.metrics["N"] == 16
        assert report.metrics["t_wise"] == 2
        assert report.metrics["max_gamma"] == 0.0

    def test_nisan(self):
        """Test the report of a few random programs."""
        report = run("nisan", programs=3, length=8, required=0)
        assert report.passed
        assert 0.0 <= report.metrics["max_advantage"] <= 1.0
        assert report.thresholds["advantage"] == 2.0 ** -4

    def test_error_reduction(self):
        """Test the composed lengths; the bound verdict is reported, not assumed."""
        report = run("error_reduction", sources=1, inner_sources=3)
        assert report.metrics["m"] == 4
        assert report.metrics["d"] == 16
        assert isinstance(report.passed, bool)

    def test_condenser(self):
        """Test the weights and lengths on the n = 16 schedule."""
        report = run("condenser", n=16, k=12, matrices=2, pairs_per_matrix=100)
        cp = condenser_params(16, 12)
        assert report.metrics["seed_length"] == cp.seed_length
        assert report.metrics["max_row_weight"] <= cp.clip
        assert 0.0 <= report.metrics["collision_rate"] <= 1.0
        assert report.profile_hash == cp.params_hash()

    def test_desk_quality(self):
        """Test that the kernel-aligned source defeats its own seed."""
        report = run("desk_quality", sources=2, seeds_per_source=3)
        assert report.metrics["adversarial_seed_sd"] == pytest.approx(1 - 2 ** -4)
        assert report.thresholds["sources_needed"] == 2

    def test_basic_structure(self):
        report = run("basic_structure", triples=20, audit_seeds=1, pairs=20)
        assert report.passed
        assert report.metrics["max_locality"] <= report.thresholds["locality_claim"]

    @pytest.mark.slow
    def test_design_artifacts(self):
        report = run("design_artifacts")
        assert report.passed
        assert report.metrics["artifacts_verified"] == 4

    @pytest.mark.slow
    def test_condenser_acceptance_scale(self):
        report = run("condenser", matrices=5)
        assert report.passed
        assert report.metrics["seed_length"] == 18478


class TestHelpers:
    """Test cases for experiment helpers and CSV output."""

    @pytest.mark.parametrize("eps", [0.0, 0.125, 0.5])
    def test_crafted_distribution(self, eps):
        """Test that the crafted table sits at distance exactly ε from uniform."""
        p = crafted_distribution(4, eps, np.random.default_rng(0))
        assert p.sum() == pytest.approx(1.0)
        assert dense_sd_from_uniform(p) == pytest.approx(eps)

    def test_crafted_distribution_too_far(self):
        with pytest.raises(ParameterError):
            crafted_distribution(4, 0.75, np.random.default_rng(0))

    def test_kernel_aligned_source(self):
        """Test that a source inside the kernel gives a constant output at its seed."""
        ext = polynomial_hash_descriptor(8, 4, 4)
        seed = BitVector(4, 3)
        source = kernel_aligned_source(ext, seed, 4, np.random.default_rng(1))
        assert seed_error(ext, seed, source) == pytest.approx(1 - 2 ** -4)
        with pytest.raises(ParameterError):
            kernel_aligned_source(ext, seed, 5, np.random.default_rng(1))

    def test_write_csv(self, tmp_path):
        """Test one row per scalar metric with the report identifiers."""
        reports = [run("pairwise", l=3), run("bernoulli", max_bits=3, numerators_per_width=1)]
        path = tmp_path / "results.csv"
        write_csv(reports, str(path))
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert {row["experiment"] for row in rows} == {"pairwise", "bernoulli"}
        assert len(rows) == sum(len(r.csv_rows()) for r in reports)
        assert rows[0]["prng_seed"] == "7"
