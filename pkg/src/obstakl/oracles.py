"""Closed-form reference solutions and operator rescaling transforms.

These supply ground truth for convergence and measurement tests:

* Exact1DObstacle: on [0, 1] with constant exponent p and constant
  forcing lam, the solution touching zero on [x_l, x_r] is
  u(x) = c_p * dist(x, [x_l, x_r])^q with q = p/(p-1) and
  c_p = lam^(1/(p-1)) * (p-1)/p, since (c_p q)^(p-1) = lam.
* ExactRadial: u(x) = c |x|^q solves div(|grad u|^(p-2) grad u) = f
  with the constant f = dim * (c q)^(p-1); the flux is (c q)^(p-1) * x
  exactly.
* rescale_to_unit maps a solution window onto the unit ball,
  u_bar(z) = u(y0 + R z) / (M R) with flux a_bar(z, xi) = a(y0 + Rz, M xi),
  and checks the normalized-class membership conditions numerically.
* blowup_operator applies a_k(x, xi) = s^(p_k(x)-1) a(2^-j x, xi/s); the
  model family is closed under both transforms via the gradient prescale.
"""

from dataclasses import dataclass

import numpy as np

from .fields import Grid, ScalarField
from .operator import (AffineProfile, ConstantProfile, DiscreteOperator,
                       FuncProfile, GridProfile, OperatorSpec)


@dataclass
class Exact1DObstacle:
    """Constant-p, constant-forcing obstacle problem on [0, 1]."""

    p: float
    lam: float
    g0: float
    g1: float

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.g0 < 0 or self.g1 < 0:
            raise ValueError("boundary data must be nonnegative")
        self.q = self.p / (self.p - 1.0)
        self.c_p = self.lam ** (1.0 / (self.p - 1.0)) * (self.p - 1.0) / self.p
        # flux identity (c_p q)^(p-1) = lam must hold by construction
        assert abs((self.c_p * self.q) ** (self.p - 1.0) - self.lam) < 1e-10 * self.lam
        self.x_l = (self.g0 / self.c_p) ** (1.0 / self.q)
        self.x_r = 1.0 - (self.g1 / self.c_p) ** (1.0 / self.q)
        if self.x_l >= self.x_r:
            raise ValueError("parameters leave no coincidence interval")

    def u(self, x):
        x = np.asarray(x, dtype=float)
        dist = np.maximum(np.maximum(self.x_l - x, x - self.x_r), 0.0)
        return self.c_p * dist ** self.q

    @property
    def free_boundary_points(self):
        pts = []
        if self.x_l > 0.0:
            pts.append(self.x_l)
        if self.x_r < 1.0:
            pts.append(self.x_r)
        return tuple(pts)

    def sample(self, grid):
        if grid.dim != 1:
            raise ValueError("1D oracle needs a 1D grid")
        return ScalarField(grid, self.u(grid.axis_coords(0)))

    def operator_spec(self, eta_floor=1e-10):
        return OperatorSpec(p=ConstantProfile(self.p), M=ConstantProfile(1.0),
                            kappa=0.0, eta_floor=eta_floor)


def exact_1d(params):
    """(u*, free boundary points, forcing value) of a 1D oracle."""
    return params.u, params.free_boundary_points, params.lam


@dataclass
class ExactRadial:
    """u = c |x|^q for the constant-p operator; coincidence set is the origin."""

    p: float
    c: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        self.q = self.p / (self.p - 1.0)
        assert abs(self.q * (self.p - 1.0) - self.p) < 1e-12

    @property
    def f_value(self):
        return self.dim * (self.c * self.q) ** (self.p - 1.0)

    def radius(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim <= 1 and self.dim == 1:
            return np.abs(points)
        if points.ndim == 1:
            points = points[None, :]
        return np.linalg.norm(points, axis=-1)

    def u(self, points):
        return self.c * self.radius(points) ** self.q

    def grad_norm(self, points):
        r = self.radius(points)
        return self.c * self.q * r ** (self.q - 1.0)

    def flux(self, points):
        """Exact flux (c q)^(p-1) * x."""
        points = np.asarray(points, dtype=float)
        return (self.c * self.q) ** (self.p - 1.0) * points

    def sample(self, grid):
        if grid.dim != self.dim:
            raise ValueError("grid dimension does not match the oracle")
        mesh = grid.node_mesh()
        r2 = sum(m * m for m in mesh)
        return ScalarField(grid, self.c * r2 ** (self.q / 2.0))

    def operator_spec(self, eta_floor=1e-10):
        return OperatorSpec(p=ConstantProfile(self.p), M=ConstantProfile(1.0),
                            kappa=0.0, eta_floor=eta_floor)


def exact_radial(params):
    """(u*, forcing value) of the radial oracle."""
    return params.u, params.f_value


# ---------------------------------------------------------------------------
# rescaling to the unit ball

class RescaleError(ValueError):
    """A hypothesis of the window rescaling is violated."""


def _shift_profile(profile, origin, scale):
    """profile(origin + scale * z) as a profile, folded when affine.

    origin=None means pure scaling (no shift), valid in any dimension.
    """
    if isinstance(profile, ConstantProfile):
        return ConstantProfile(profile.value)
    if isinstance(profile, AffineProfile):
        shift = 0.0 if origin is None else float(
            np.atleast_1d(np.asarray(origin, dtype=float)) @ profile.grad)
        return AffineProfile(profile.value0 + shift, profile.grad * scale,
                             profile.clip_lo, profile.clip_hi)
    base = profile
    if origin is None:
        return FuncProfile(lambda pts: base(scale * np.asarray(pts, dtype=float)))
    origin = np.atleast_1d(np.asarray(origin, dtype=float))
    return FuncProfile(lambda pts: base(origin + scale * np.asarray(pts, dtype=float)))


def rescale_to_unit(spec, sol, y0, R, M, n_cells=None, f_sup=None, tol=None):
    """Map the window B_R(y0) of a solution onto the unit box/ball.

    Returns (spec_bar, u_bar, report) where u_bar(z) = u(y0 + R z)/(M R),
    spec_bar evaluates a(y0 + R z, M xi), and the report carries the
    numerically checked membership conditions of the normalized class:
    u_bar(0) = 0, 0 <= u_bar <= 1, and |div a_bar(grad u_bar)| <= 1.
    """
    grid = sol.grid
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    tol = sol.tol_u_zero if tol is None else tol
    f_sup = sol.f_sup if f_sup is None else f_sup

    # hypotheses, checked in order
    if np.any(y0 - R < grid.lo - 1e-12) or np.any(y0 + R > grid.hi + 1e-12):
        raise RescaleError("window extends outside the computational domain")
    if float(sol.u.interpolate(y0)[0]) > tol:
        raise RescaleError("window center is not a contact point (u(y0) > tol)")
    if R * f_sup > 1.0 + 1e-12:
        raise RescaleError("window radius too large: R * sup f must not exceed 1")
    if M * R < sol.g_sup - 1e-12:
        raise RescaleError("amplitude M below sup(g)/R; rescaled values may exceed 1")

    if n_cells is None:
        n_cells = int(min(256, max(8, np.ceil(2.0 * R / grid.h.min()))))
        n_cells += n_cells % 2
    unit_grid = Grid(-np.ones(grid.dim), np.ones(grid.dim), np.full(grid.dim, n_cells))

    mesh = unit_grid.node_mesh()
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    u_bar_vals = sol.u.interpolate(y0 + R * pts).reshape(unit_grid.node_shape) / (M * R)
    u_bar = ScalarField(unit_grid, u_bar_vals)

    spec_bar = OperatorSpec(
        p=_shift_profile(spec.p, y0, R),
        M=_shift_profile(spec.M, y0, R),
        kappa=spec.kappa,
        eta_floor=spec.eta_floor,
        grad_scale=spec.grad_scale * M,
    )

    op = DiscreteOperator(spec_bar, unit_grid)
    Au_bar = op.apply(u_bar_vals)
    r2 = sum(m * m for m in mesh)
    inside = (r2 <= (1.0 - 2.0 * unit_grid.h.max()) ** 2) & unit_grid.interior_mask()
    check_tol = max(10.0 * tol, 5.0 * unit_grid.h.max())
    report = {
        "center_value": float(np.abs(u_bar_vals[unit_grid.nearest_node(np.zeros(grid.dim))])),
        "min_value": float(u_bar_vals.min()),
        "max_value": float(u_bar_vals.max()),
        "sup_Au": float(np.abs(Au_bar[inside]).max()) if inside.any() else 0.0,
        "n_cells": n_cells,
    }
    report["membership"] = bool(
        report["center_value"] <= check_tol
        and report["min_value"] >= -1e-12
        and report["max_value"] <= 1.0 + 1e-9
        and report["sup_Au"] <= 1.0 + check_tol)
    return spec_bar, u_bar, report


# ---------------------------------------------------------------------------
# blow-up of the operator

def blowup_operator(spec, j, scale_s):
    """a_k(x, xi) = s^(p_k(x)-1) * a(2^-j x, xi / s) with p_k(x) = p(2^-j x).

    For the model family this is again a model flux: the exponent and
    coefficient profiles are squeezed, the coefficient picks up the
    factor s^(p_k(x)-1), and the gradient prescale becomes s0 / s. The
    structural constants are preserved (kappa = 0), while the spatial
    Lipschitz ratio contracts like 2^-j.
    """
    if scale_s <= 0:
        raise ValueError("scale_s must be positive")
    if j < 0:
        raise ValueError("j must be nonnegative")
    shrink = 2.0 ** (-j)

    p_k = _shift_profile(spec.p, None, shrink)
    M_base = _shift_profile(spec.M, None, shrink)
    s = float(scale_s)

    if j == 0 and s == 1.0:
        return OperatorSpec(p=spec.p, M=spec.M, kappa=spec.kappa,
                            eta_floor=spec.eta_floor, grad_scale=spec.grad_scale,
                            p_minus=spec.p_minus, p_plus=spec.p_plus,
                            lipschitz_L=spec.lipschitz_L)

    def m_scaled(pts):
        pts = np.asarray(pts, dtype=float)
        return s ** (p_k(pts) - 1.0) * M_base(pts)

    return OperatorSpec(
        p=p_k,
        M=FuncProfile(m_scaled),
        kappa=spec.kappa,
        eta_floor=spec.eta_floor,
        grad_scale=spec.grad_scale / s,
    )
