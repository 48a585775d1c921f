"""Built-in problem presets.

Each preset is a complete run configuration (grid, operator, data,
solver, analyses) reproducing one of the standard verification setups.
Preset parameters can be overridden through "preset_params" and any
top-level key can be overridden in the user config.
"""

import copy

_BASE_SOLVE = {
    "method": "projected_relaxation",
    "tol_residual": 1e-8,
    "max_iters": 200,
    "relaxation_omega": 1.0,
    "eps_schedule": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
}


def oracle_1d(params=None):
    """1D constant-p obstacle problem with a closed-form solution."""
    p = dict(params or {})
    p_exp = float(p.get("p", 2.0))
    lam = float(p.get("lam", 1.0))
    g0 = float(p.get("g0", 0.02))
    g1 = float(p.get("g1", 0.02))
    n = int(p.get("n", 256))
    return {
        "preset": "oracle-1d",
        "grid": {"lo": [0.0], "hi": [1.0], "n_cells": [n]},
        "operator": {
            "kappa": 0.0,
            "eta_floor": 1e-10,
            "p": {"mode": "constant", "value": p_exp},
            "M": {"mode": "constant", "value": 1.0},
        },
        "f": {"mode": "constant", "value": lam},
        "g": {"mode": "oracle"},
        "oracle": {"kind": "exact_1d", "p": p_exp, "lam": lam, "g0": g0, "g1": g1},
        "solve": copy.deepcopy(_BASE_SOLVE),
        "analyses": [{"name": "growth"}, {"name": "complementarity"},
                     {"name": "porosity"}, {"name": "bv"}],
        "refinement_levels": 1,
        "seed": 0,
    }


def oracle_radial(params=None):
    """2D radial solution u = c |x|^q of the constant-p operator."""
    p = dict(params or {})
    p_exp = float(p.get("p", 3.0))
    c = float(p.get("c", 1.0))
    n = int(p.get("n", 128))
    return {
        "preset": "oracle-radial",
        "grid": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5], "n_cells": [n, n]},
        "operator": {
            "kappa": 0.0,
            "eta_floor": 1e-10,
            "p": {"mode": "constant", "value": p_exp},
            "M": {"mode": "constant", "value": 1.0},
        },
        "f": {"mode": "oracle"},
        "g": {"mode": "oracle"},
        "oracle": {"kind": "exact_radial", "p": p_exp, "c": c, "dim": 2},
        "solve": copy.deepcopy(_BASE_SOLVE),
        "analyses": [{"name": "growth"}, {"name": "complementarity"},
                     {"name": "o_delta"}, {"name": "porosity"}],
        "refinement_levels": 1,
        "seed": 0,
    }


def obstacle_2d(params=None):
    """2D constant-p obstacle problem with an interior coincidence blob."""
    p = dict(params or {})
    p_exp = float(p.get("p", 2.5))
    n = int(p.get("n", 128))
    return {
        "preset": "obstacle-2d",
        "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "n_cells": [n, n]},
        "operator": {
            "kappa": 0.0,
            "eta_floor": 1e-10,
            "p": {"mode": "constant", "value": p_exp},
            "M": {"mode": "constant", "value": 1.0},
        },
        "f": {"mode": "constant", "value": float(p.get("f", 2.0))},
        "g": {"mode": "constant", "value": float(p.get("g", 0.05))},
        "solve": copy.deepcopy(_BASE_SOLVE),
        "analyses": [{"name": "growth"}, {"name": "complementarity"},
                     {"name": "porosity"}, {"name": "o_delta"},
                     {"name": "hausdorff"}, {"name": "bv"}],
        "refinement_levels": 1,
        "seed": 0,
    }


def kappa_2d(params=None):
    """Nondegenerate (kappa = 0.1) 2D obstacle problem."""
    p = dict(params or {})
    n = int(p.get("n", 128))
    return {
        "preset": "kappa-2d",
        "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "n_cells": [n, n]},
        "operator": {
            "kappa": float(p.get("kappa", 0.1)),
            "eta_floor": 1e-10,
            "p": {"mode": "constant", "value": float(p.get("p", 2.0))},
            "M": {"mode": "constant", "value": 1.0},
        },
        "f": {"mode": "constant", "value": float(p.get("f", 2.0))},
        "g": {"mode": "constant", "value": float(p.get("g", 0.05))},
        "solve": copy.deepcopy(_BASE_SOLVE),
        "analyses": [{"name": "w22"}, {"name": "bv"}, {"name": "hausdorff"},
                     {"name": "complementarity"}],
        "refinement_levels": 1,
        "seed": 0,
    }


def variable_p_demo(params=None):
    """Variable exponent p(x) = 1.5 + 1.5 x_1 across the unit square."""
    p = dict(params or {})
    n = int(p.get("n", 128))
    return {
        "preset": "variable-p-demo",
        "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "n_cells": [n, n]},
        "operator": {
            "kappa": 0.0,
            "eta_floor": 1e-10,
            "p": {"mode": "affine", "value0": 1.5, "gradient": [1.5, 0.0],
                  "clip": [1.5, 3.0]},
            "M": {"mode": "constant", "value": 1.0},
        },
        "f": {"mode": "constant", "value": float(p.get("f", 2.0))},
        "g": {"mode": "constant", "value": float(p.get("g", 0.05))},
        "solve": copy.deepcopy(_BASE_SOLVE),
        "analyses": [{"name": "growth"}, {"name": "complementarity"},
                     {"name": "porosity"}, {"name": "hausdorff"}, {"name": "bv"}],
        "refinement_levels": 1,
        "seed": 0,
    }


PRESETS = {
    "oracle-1d": (oracle_1d, "1D obstacle problem with closed-form solution (constant p)"),
    "oracle-radial": (oracle_radial, "2D radial solution u = c|x|^q, contact set {0}"),
    "obstacle-2d": (obstacle_2d, "2D constant-p obstacle problem, interior contact blob"),
    "kappa-2d": (kappa_2d, "2D nondegenerate problem (kappa = 0.1)"),
    "variable-p-demo": (variable_p_demo, "2D variable exponent p(x) affine from 1.5 to 3"),
}


def build_preset(name, params=None):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[name][0](params)
