"""Parameter-driven dispatch over the three set-family kinds, shared by the API and the CLI."""

from typing import Any, Dict, Union

from models.artifacts import DesignKind
from services.bitfix import get_design_extractor
from services.designs import Design, DesignExtractorGraph, WeakDesign, get_design, get_weak_design
from services.errors import LabError, ParameterError

Family = Union[Design, WeakDesign, DesignExtractorGraph]

REQUIRED_PARAMS = {
    DesignKind.DESIGN: ("n", "m", "k", "l"),
    DesignKind.WEAK_DESIGN: ("m", "kappa", "l"),
    DesignKind.DESIGN_EXTRACTOR: ("n0", "b", "d0", "alpha", "K"),
}


def build_family(kind: DesignKind, params: Dict[str, Any]) -> Family:
    """
    Build (or fetch from the artifact cache) the family named by `kind`.

    design: {n, m, k, l}; weak_design: {m, kappa, l};
    design_extractor: {n0, b, d0, alpha, K, eps?, target?}.
    """
    missing = [key for key in REQUIRED_PARAMS[kind] if key not in params]
    if missing:
        raise ParameterError(f"{kind.value} needs parameters {missing}")
    try:
        if kind == DesignKind.DESIGN:
            return get_design(int(params["n"]), int(params["m"]), int(params["k"]), int(params["l"]))
        if kind == DesignKind.WEAK_DESIGN:
            return get_weak_design(int(params["m"]), float(params["kappa"]), int(params["l"]))
        target = params.get("target")
        return get_design_extractor(
            int(params["n0"]), int(params["b"]), int(params["d0"]), float(params["alpha"]), int(params["K"]),
            eps=float(params.get("eps", 0.25)), target=None if target is None else int(target),
        )
    except LabError:
        raise
    except (TypeError, ValueError) as e:
        raise ParameterError(f"malformed {kind.value} parameters: {e}", original_error=e)
