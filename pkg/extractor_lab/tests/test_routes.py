import numpy as np
from fastapi.testclient import TestClient

from main import app
from middleware.rate_limit_middleware import experiment_rate_limiter, rate_limit_store
from services.applications import nz_prg
from services.bitcore import BitVector
from services.primitives import polynomial_hash_descriptor

client = TestClient(app)


def poly_node(n=8, b=4, d=4):
    return polynomial_hash_descriptor(n, b, d).to_node().model_dump()


class TestServiceRoutes:
    """Test cases for health and discovery endpoints."""

    def setup_method(self):
        rate_limit_store.clear()

    def test_health(self):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "OK"

    def test_api_info(self):
        """Test that the index lists the endpoints and the PRNG version."""
        data = client.get("/api").json()
        assert data["prng"] == "numpy-pcg64/1"
        assert data["endpoints"]["extract"] == "/api/extract"


class TestExtractorRoutes:
    """Test cases for extraction, condensing and locality audits."""

    def setup_method(self):
        """Start each test with an empty rate-limit window."""
        rate_limit_store.clear()

    def test_extract(self):
        """Test evaluation of a rebuilt construction tree."""
        response = client.post("/api/extract", json={"construction": poly_node(), "x": "8:a7", "seed": "4:3"})
        assert response.status_code == 200
        data = response.json()
        expected = polynomial_hash_descriptor(8, 4, 4)(BitVector(8, 0xa7), BitVector(4, 3))
        assert data["output"] == expected.to_hex()
        assert data["locality"] == 8
        assert data["summary"]["name"] == "polynomial_hash"

    def test_extract_seed_length(self):
        """Test that a wrong seed length is a 400 with its error code."""
        response = client.post("/api/extract", json={"construction": poly_node(), "x": "8:a7", "seed": "5:3"})
        assert response.status_code == 400
        assert response.json()["code"] == "LENGTH_MISMATCH"

    def test_extract_unknown_construction(self):
        """Test that unregistered construction names are refused."""
        node = {"name": "no_such_extractor", "params": {}, "children": []}
        response = client.post("/api/extract", json={"construction": node, "x": "8:0", "seed": "4:0"})
        assert response.status_code == 400
        assert response.json()["code"] == "PARAMETER_ERROR"

    def test_malformed_bit_vector(self):
        """Test that bit vectors must be written as len:hex."""
        response = client.post("/api/extract", json={"construction": poly_node(), "x": "a7", "seed": "4:3"})
        assert response.status_code == 422

    def test_condense_is_reproducible(self):
        """Test that one prng_seed yields one matrix seed and output."""
        body = {"n": 16, "k": 12, "x": "16:1234", "prng_seed": 5}
        first = client.post("/api/condense", json=body).json()
        second = client.post("/api/condense", json=body).json()
        assert first["seed"] == second["seed"]
        assert first["output"] == second["output"]
        assert first["output"].startswith("120:")
        assert len(first["rows"]) == 120
        assert len(first["clipped"]) == 120

    def test_condense_with_explicit_seed(self):
        """Test that a supplied seed is used as given."""
        seeded = client.post("/api/condense", json={"n": 16, "k": 12, "x": "16:ff", "prng_seed": 9}).json()
        again = client.post("/api/condense", json={"n": 16, "k": 12, "x": "16:ff", "seed": seeded["seed"]}).json()
        assert again["output"] == seeded["output"]

    def test_condense_entropy_too_small(self):
        """Test that k ≤ 2 log₂ n is refused."""
        response = client.post("/api/condense", json={"n": 64, "k": 8, "x": "64:0"})
        assert response.status_code == 400
        assert "too small" in response.json()["message"]

    def test_audit_locality(self):
        """Test the toggling audit of an affine construction."""
        response = client.post("/api/audit-locality", json={"construction": poly_node(), "seed": "4:3"})
        assert response.status_code == 200
        data = response.json()
        assert data["trials"] == 1
        assert len(data["counts"]) == 4
        assert data["max"] <= 8


class TestDesignRoutes:
    """Test cases for design generation and verification."""

    def setup_method(self):
        rate_limit_store.clear()

    def test_generate_and_verify(self):
        """Test that a generated weak design re-verifies."""
        response = client.post("/api/designs", json={"kind": "weak_design", "params": {"m": 4, "kappa": 2.0, "l": 4}})
        assert response.status_code == 200
        artifact = response.json()
        assert len(artifact["sets"]) == 4
        verdict = client.post("/api/designs/verify", json=artifact).json()
        assert verdict["valid"] is True
        assert verdict["content_hash"] == artifact["content_hash"]

    def test_tampered_artifact(self):
        """Test that edited sets fail verification."""
        artifact = client.post("/api/designs", json={
            "kind": "design_extractor", "params": {"n0": 4, "b": 2, "d0": 2, "alpha": 0.25, "K": 4},
        }).json()
        artifact["sets"][0] = artifact["sets"][1]
        verdict = client.post("/api/designs/verify", json=artifact).json()
        assert verdict["valid"] is False
        assert verdict["message"]

    def test_missing_parameters(self):
        """Test that every kind names its required parameters."""
        response = client.post("/api/designs", json={"kind": "design", "params": {"n": 10}})
        assert response.status_code == 400
        assert "needs parameters" in response.json()["message"]


class TestPRGRoutes:
    """Test cases for generator endpoints."""

    def setup_method(self):
        rate_limit_store.clear()

    def test_nisan(self):
        """Test x = 1, A = 2, B = 3 over GF(4)."""
        seed = BitVector(6, 1 | (2 << 2) | (3 << 4))
        data = client.post("/api/prg/nisan", json={"w": 2, "seed": seed.to_hex()}).json()
        assert data["blocks"] == [1, 1]
        assert data["output"] == "4:5"

    def test_nisan_even_blocks(self):
        response = client.post("/api/prg/nisan", json={"w": 2, "seed": "8:0"})
        assert response.status_code == 400
        assert response.json()["code"] == "LENGTH_MISMATCH"

    def test_rlf(self):
        """Test two blocks through the pairwise XOR local function."""
        body = {
            "hypergraph": {"n": 4, "edges": [[0, 1], [2, 3]]},
            "predicate": {"d": 2, "table": [0, 1, 1, 0]},
            "inputs": ["4:3", "4:1"],
        }
        data = client.post("/api/prg/rlf", json=body).json()
        assert data == {"output": "4:4", "length": 4}

    def test_rlf_arity_mismatch(self):
        body = {
            "hypergraph": {"n": 4, "edges": [[0, 1]]},
            "predicate": {"d": 3, "table": [0] * 8},
            "inputs": ["4:3"],
        }
        assert client.post("/api/prg/rlf", json=body).status_code == 400

    def test_nz(self):
        """Test the generator against the service function."""
        seed = BitVector.random(20, np.random.default_rng(0))
        data = client.post("/api/prg/nz", json={"construction": poly_node(), "seed": seed.to_hex(), "rounds": 3}).json()
        assert data["length"] == 12
        assert data["output"] == nz_prg(seed, polynomial_hash_descriptor(8, 4, 4), 3).to_hex()

    def test_unexpected_failure(self, mocker):
        """Test that unexpected exceptions become a 500 with the lab error body."""
        mocker.patch("routes.prg_routes.nisan_expand", side_effect=RuntimeError("boom"))
        response = client.post("/api/prg/nisan", json={"w": 2, "seed": "6:39"})
        assert response.status_code == 500
        data = response.json()
        assert data["code"] == "INTERNAL_SERVER_ERROR"
        assert data["message"] == "Failed to expand Nisan seed"


class TestBitFixRoutes:
    """Test cases for the bit-fixing endpoint."""

    def setup_method(self):
        rate_limit_store.clear()

    def test_extract(self):
        """Test the n = 32 pipeline on one source string."""
        body = {"n": 32, "free": list(range(0, 24, 2)), "fixed": "32:0", "x": "32:55555555"}
        response = client.post("/api/bitfix/extract", json=body)
        assert response.status_code == 200
        data = response.json()
        assert data["output"].startswith("9:")
        assert data["witness"]["N"] == 256
        assert data["witness"]["exhaustive_ok"] is not None
        assert data["pipeline"]["graph"]["M"] == 32

    def test_unknown_length(self):
        body = {"n": 48, "free": [0], "fixed": "48:0", "x": "48:0"}
        response = client.post("/api/bitfix/extract", json=body)
        assert response.status_code == 400
        assert response.json()["code"] == "PARAMETER_ERROR"

    def test_fixed_length_mismatch(self):
        body = {"n": 32, "free": [0], "fixed": "16:0", "x": "32:0"}
        response = client.post("/api/bitfix/extract", json=body)
        assert response.status_code == 400
        assert response.json()["code"] == "LENGTH_MISMATCH"


class TestExperimentRoutes:
    """Test cases for the experiment registry endpoints."""

    def setup_method(self):
        rate_limit_store.clear()

    def test_list(self):
        names = {e["name"] for e in client.get("/api/experiments").json()}
        assert {"leftover_hash", "pairwise", "condenser", "bitfix", "nisan"} <= names

    def test_run(self):
        """Test a small pairwise run and its report fields."""
        response = client.post("/api/experiments/pairwise/run", json={"prng_seed": 3, "params": {"l": 3}})
        assert response.status_code == 200
        report = response.json()
        assert report["passed"] is True
        assert report["prng_seed"] == 3
        assert report["params"] == {"l": 3}
        assert report["config_hash"]

    def test_unknown_experiment_and_parameter(self):
        assert client.post("/api/experiments/nope/run", json={}).status_code == 400
        response = client.post("/api/experiments/pairwise/run", json={"params": {"width": 3}})
        assert response.status_code == 400
        assert response.json()["code"] == "PARAMETER_ERROR"

    def test_rate_limit(self):
        """Test that runs beyond the per-minute allowance are refused."""
        allowed = experiment_rate_limiter.max_requests
        body = {"params": {"max_bits": 2, "numerators_per_width": 1}}
        codes = [client.post("/api/experiments/bernoulli/run", json=body).status_code for _ in range(allowed + 1)]
        assert codes[:allowed] == [200] * allowed
        assert codes[allowed] == 429
