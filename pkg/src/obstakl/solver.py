"""Solvers for the zero-obstacle problem and its penalized approximation.

solve_vi treats the constrained problem directly: the base iteration is
projected nonlinear Gauss-Seidel (colored sweeps of safeguarded scalar
solves), accelerated by reduced active-set Newton steps with a line
search on the discrete energy. Grid continuation (coarse solves
prolonged by multilinear interpolation) supplies warm starts, which is
what makes the degenerate/singular regimes (p far from 2, kappa = 0)
converge in a handful of Newton steps per level.

solve_penalized solves div(a_eps(x, grad u)) = f * H_eps(u) with
H_eps(v) = min(1, v+/eps) by damped Newton with a line search on the
residual norm, warm-started along a decreasing eps schedule.

Both methods minimize a convex discrete energy, so the natural residual
min(u, f - Au) (resp. the equation residual) is a faithful convergence
measure.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import ScalarField, Grid, write_field_csv
from .operator import DiscreteOperator

DEFAULT_EPS_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


class SolverError(RuntimeError):
    """Raised when an iteration fails to converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


@dataclass
class SolveConfig:
    method: str = "projected_relaxation"     # or "penalized"
    tol_residual: float = 1e-8
    max_iters: int = 200
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE
    relaxation_omega: float = 1.0
    tol_u_zero: Optional[float] = None       # default 10 * tol_residual
    # implementation knobs
    newton_accel: bool = True                # active-set Newton between sweeps
    sweeps_per_cycle: int = 1                # pGS sweeps per outer cycle (accelerated mode)
    grid_continuation: bool = True
    coarsest_cells: int = 16

    def __post_init__(self):
        if self.method not in ("projected_relaxation", "penalized"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if not 0.0 < self.relaxation_omega < 2.0:
            raise ValueError("relaxation_omega must lie in (0, 2)")
        eps = tuple(self.eps_schedule)
        if any(not 0.0 < e < 1.0 for e in eps):
            raise ValueError("eps_schedule entries must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])) and len(eps) > 1:
            if not all(b < a for a, b in zip(eps, eps[1:])):
                raise ValueError("eps_schedule must be strictly decreasing")
        self.eps_schedule = eps
        if self.tol_u_zero is None:
            self.tol_u_zero = 10.0 * self.tol_residual


@dataclass
class Solution:
    u: ScalarField
    active_mask: np.ndarray
    residual_history: list
    iterations: int
    eps_final: Optional[float]
    converged: bool
    method: str
    spec: object = None
    f_sup: float = 0.0
    g_sup: float = 0.0
    tol_u_zero: float = 1e-7

    @property
    def grid(self):
        return self.u.grid


# ---------------------------------------------------------------------------
# shared pieces

def _natural_residual(u, F, interior):
    """inf-norm of min(u, f - Au) over interior nodes."""
    return float(np.abs(np.minimum(u, F))[interior].max())


def _apply_boundary(u, g_vals, bmask):
    u[bmask] = g_vals[bmask]


def _prolong(values, fine_grid):
    """Multilinear interpolation from a grid to its factor-2 refinement."""
    if fine_grid.dim == 1:
        out = np.zeros(fine_grid.node_shape)
        out[::2] = values
        out[1::2] = 0.5 * (values[:-1] + values[1:])
        return out
    out = np.zeros(fine_grid.node_shape)
    out[::2, ::2] = values
    out[1::2, ::2] = 0.5 * (values[:-1, :] + values[1:, :])
    out[::2, 1::2] = 0.5 * (values[:, :-1] + values[:, 1:])
    out[1::2, 1::2] = 0.25 * (values[:-1, :-1] + values[1:, :-1]
                              + values[:-1, 1:] + values[1:, 1:])
    return out


def _restrict(values):
    """Injection onto the factor-2 coarsening (grids are nested)."""
    return values[::2] if values.ndim == 1 else values[::2, ::2]


def _color_masks(grid, interior):
    """2^dim node colorings; same-color nodes do not share a cell."""
    if grid.dim == 1:
        i = np.arange(grid.node_shape[0])
        return [interior & (i % 2 == a) for a in (0, 1)]
    ii, jj = np.meshgrid(np.arange(grid.node_shape[0]),
                         np.arange(grid.node_shape[1]), indexing="ij")
    return [interior & (ii % 2 == a) & (jj % 2 == b)
            for a in (0, 1) for b in (0, 1)]


def _pgs_sweep(op, u, f_vals, colors, omega, rhs_fn=None, project=True, n_inner=3):
    """One colored projected Gauss-Seidel sweep of safeguarded scalar solves.

    At each node the scalar map t -> f_i(t) - (Au)_i(t) is increasing, so
    a Newton step damped by visited-point brackets and clipped below by the
    constraint is safe. rhs_fn(u) supplies a solution-dependent right hand
    side (penalization); otherwise the rhs is f.
    """
    big = 1e6 * (1.0 + np.abs(u).max())
    for cm in colors:
        lo = np.full(np.count_nonzero(cm), -np.inf)
        hi = np.full(lo.shape, np.inf)
        for _ in range(n_inner):
            Au = op.apply(u)
            rhs = f_vals if rhs_fn is None else rhs_fn(u)
            F = (rhs - Au)[cm]
            H = op.hessian(u)
            dia = (H.diagonal().reshape(u.shape) / op.hd)[cm]
            if rhs_fn is not None:
                dia = dia + _heaviside_prime_from_rhs(rhs_fn, u, cm)
            t = u[cm]
            # bracket update: F increasing in t
            hi = np.where(F > 0, np.minimum(hi, t), hi)
            lo = np.where(F < 0, np.maximum(lo, t), lo)
            dt = -F / np.maximum(dia, 1e-300)
            dt = np.clip(dt, -big, big)
            t_new = t + omega * dt
            # clip into the bracket where one exists
            t_new = np.where(np.isfinite(hi) & (t_new > hi), 0.5 * (t + hi), t_new)
            t_new = np.where(np.isfinite(lo) & (t_new < lo), 0.5 * (t + lo), t_new)
            if project:
                t_new = np.maximum(t_new, 0.0)
            u[cm] = t_new
    return u


def _heaviside_prime_from_rhs(rhs_fn, u, cm):
    # derivative contribution of -f*H_eps(u) to the scalar slope
    return getattr(rhs_fn, "slope", lambda u: 0.0)(u)[cm]


# ---------------------------------------------------------------------------
# variational inequality solver

def _solve_vi_level(spec, grid, f_vals, g_vals, cfg, u0, history, constants=None, eps=None,
                    label=""):
    """Run the projected-relaxation / Newton cycle on one grid level."""
    op = DiscreteOperator(spec, grid, eps=eps, constants=constants)
    interior = grid.interior_mask()
    bmask = ~interior
    colors = _color_masks(grid, interior)
    u = u0.copy()
    _apply_boundary(u, g_vals, bmask)
    np.maximum(u, 0.0, out=u)

    scale = max(1.0, float(np.abs(f_vals).max()))
    gmax = float(np.abs(g_vals[bmask]).max()) if bmask.any() else 1.0
    pin_tol = 1e-9 * max(1.0, gmax)
    switch = 1e-4 * scale
    tol = cfg.tol_residual * scale

    for it in range(cfg.max_iters):
        Au = op.apply(u)
        F = f_vals - Au
        nr = _natural_residual(u, F, interior)
        history.append(nr)
        if nr <= tol:
            return u, it, True

        if not cfg.newton_accel:
            _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega)
            continue

        if cfg.sweeps_per_cycle:
            for _ in range(cfg.sweeps_per_cycle):
                _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega)
            Au = op.apply(u)
            F = f_vals - Au

        active = interior & (u <= pin_tol) & (F > 0)
        free = (interior & ~active).ravel()
        if not free.any():
            continue
        H = op.hessian(u)
        gJ = (F * op.hd).ravel()
        try:
            dz = spla.spsolve(H[free][:, free].tocsc(), -gJ[free])
        except RuntimeError:
            _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega)
            continue
        if not np.all(np.isfinite(dz)):
            _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega)
            continue

        if nr <= switch:
            # inside the Newton basin; energy differences are below rounding
            v = u.ravel()
            v[free] += dz
            u = v.reshape(u.shape)
            np.maximum(u, 0.0, out=u)
            _apply_boundary(u, g_vals, bmask)
            continue

        J0 = op.energy(u, f_vals)
        t = 1.0
        accepted = None
        for _ in range(40):
            v = u.ravel().copy()
            v[free] += t * dz
            cand = v.reshape(u.shape)
            np.maximum(cand, 0.0, out=cand)
            cand[active] = 0.0
            _apply_boundary(cand, g_vals, bmask)
            if op.energy(cand, f_vals) <= J0:
                accepted = cand
                break
            t *= 0.5
        if accepted is None:
            # energy cannot resolve the decrease; fall back to sweeps
            _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega)
        else:
            u = accepted

    Au = op.apply(u)
    nr = _natural_residual(u, f_vals - Au, interior)
    history.append(nr)
    return u, cfg.max_iters, nr <= tol


def _continuation_grids(grid, cfg):
    grids = [grid]
    g = grid
    while (cfg.grid_continuation
           and np.all(g.n_cells % 2 == 0)
           and np.all(g.n_cells // 2 >= cfg.coarsest_cells)):
        g = g.coarsened()
        grids.append(g)
    return grids[::-1]


def solve_vi(spec, f, g, cfg=None, u0=None):
    """Solve the constrained problem: u >= 0, Au <= f, Au = f where u > 0.

    f and g are nodal fields on the same grid; g supplies the Dirichlet
    data on the boundary layer. Returns a Solution whose u satisfies the
    maximum principle 0 <= u <= max g (up to tolerance) for f >= 0.
    An explicit initial guess u0 (nodal array) skips grid continuation.
    """
    cfg = cfg or SolveConfig()
    grid = f.grid
    if not grid.is_compatible(g.grid):
        raise ValueError("f and g must live on the same grid")

    history = []
    iterations = 0
    if u0 is not None:
        u, its, ok = _solve_vi_level(spec, grid, f.values, g.values, cfg,
                                     np.asarray(u0, dtype=float), history)
        iterations = its
        if not ok:
            raise SolverError(
                f"projected relaxation did not reach tol_residual={cfg.tol_residual:g} "
                f"within {cfg.max_iters} iterations (last residual {history[-1]:.3e})",
                history)
        grids = [grid]
    else:
        grids = _continuation_grids(grid, cfg)
        u = None
        for k, gk in enumerate(grids):
            factor = 2 ** (len(grids) - 1 - k)
            f_k = f.values[::factor] if grid.dim == 1 else f.values[::factor, ::factor]
            g_k = g.values[::factor] if grid.dim == 1 else g.values[::factor, ::factor]
            uk = np.zeros(gk.node_shape) if u is None else _prolong(u, gk)
            u, its, ok = _solve_vi_level(spec, gk, f_k, g_k, cfg, uk, history)
            iterations += its
            if not ok and gk is grids[-1]:
                raise SolverError(
                    f"projected relaxation did not reach tol_residual={cfg.tol_residual:g} "
                    f"within {cfg.max_iters} iterations (last residual {history[-1]:.3e})",
                    history)

    u_field = ScalarField(grid, u)
    return Solution(
        u=u_field,
        active_mask=u <= cfg.tol_u_zero,
        residual_history=history,
        iterations=iterations,
        eps_final=None,
        converged=True,
        method="projected_relaxation",
        spec=spec,
        f_sup=float(np.abs(f.values).max()),
        g_sup=float(np.abs(g.values[grid.boundary_mask()]).max()),
        tol_u_zero=cfg.tol_u_zero,
    )


# ---------------------------------------------------------------------------
# penalized solver

def heaviside_eps(v, eps):
    """H_eps(v) = min(1, v+ / eps)."""
    return np.minimum(1.0, np.maximum(v, 0.0) / eps)


def _heaviside_antideriv(v, eps):
    vp = np.maximum(v, 0.0)
    return np.where(vp <= eps, 0.5 * vp * vp / eps, vp - 0.5 * eps)


def _solve_penalized_level(spec, constants, grid, f_vals, g_vals, cfg, eps, u0, history):
    """Damped Newton for div(a_eps(grad u)) = f * H_eps(u), u = g on the boundary."""
    op = DiscreteOperator(spec, grid, eps=eps, constants=constants)
    interior = grid.interior_mask()
    bmask = ~interior
    free = interior.ravel()
    colors = _color_masks(grid, interior)
    u = u0.copy()
    _apply_boundary(u, g_vals, bmask)

    scale = max(1.0, float(np.abs(f_vals).max()))
    tol = cfg.tol_residual * scale
    hd = op.hd

    def residual(uv):
        return (op.apply(uv) - f_vals * heaviside_eps(uv, eps))

    class _Rhs:
        def __call__(self, uv):
            return f_vals * heaviside_eps(uv, eps)

        def slope(self, uv):
            return f_vals * ((uv > 0.0) & (uv < eps)) / eps

    rhs = _Rhs()

    for it in range(cfg.max_iters):
        G = residual(u)
        nr = float(np.abs(G)[interior].max())
        history.append(nr)
        if nr <= tol:
            return u, it, True

        H = op.hessian(u)
        hprime = (f_vals * ((u > 0.0) & (u < eps)) / eps).ravel()
        Hff = H[free][:, free] + hd * sp.diags(hprime[free])
        gJ = hd * (f_vals * heaviside_eps(u, eps) - op.apply(u)).ravel()
        try:
            dz = spla.spsolve(Hff.tocsc(), -gJ[free])
        except RuntimeError:
            dz = None
        if dz is None or not np.all(np.isfinite(dz)):
            for _ in range(2):
                _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega, rhs_fn=rhs,
                           project=False)
            continue

        if nr <= 1e-4 * scale:
            v = u.ravel()
            v[free] += dz
            u = v.reshape(u.shape)
            _apply_boundary(u, g_vals, bmask)
            continue

        t = 1.0
        accepted = None
        for _ in range(40):
            v = u.ravel().copy()
            v[free] += t * dz
            cand = v.reshape(u.shape)
            _apply_boundary(cand, g_vals, bmask)
            if float(np.abs(residual(cand))[interior].max()) <= (1.0 - 1e-4 * t) * nr:
                accepted = cand
                break
            t *= 0.5
        if accepted is None:
            # Newton stagnation: relaxation sweeps on the penalized system
            made_progress = False
            for _ in range(3):
                _pgs_sweep(op, u, f_vals, colors, cfg.relaxation_omega, rhs_fn=rhs,
                           project=False)
            nr2 = float(np.abs(residual(u))[interior].max())
            made_progress = nr2 < nr
            if not made_progress:
                raise SolverError(
                    f"penalized Newton stagnated at eps={eps:g} "
                    f"(residual {nr:.3e}, tol {tol:.3e})", history)
        else:
            u = accepted

    G = residual(u)
    nr = float(np.abs(G)[interior].max())
    history.append(nr)
    return u, cfg.max_iters, nr <= tol


def solve_penalized(spec, constants, f, g, cfg=None):
    """Continuation over the eps schedule for the penalized equation.

    Each stage is warm-started from the previous one; the first stage on
    a fine grid is itself warm-started through grid continuation.
    """
    cfg = cfg or SolveConfig(method="penalized")
    if not cfg.eps_schedule:
        raise ValueError("eps_schedule must be non-empty")
    grid = f.grid
    if not grid.is_compatible(g.grid):
        raise ValueError("f and g must live on the same grid")

    history = []
    iterations = 0
    eps0 = cfg.eps_schedule[0]

    grids = _continuation_grids(grid, cfg)
    u = None
    for k, gk in enumerate(grids):
        factor = 2 ** (len(grids) - 1 - k)
        f_k = f.values[::factor] if grid.dim == 1 else f.values[::factor, ::factor]
        g_k = g.values[::factor] if grid.dim == 1 else g.values[::factor, ::factor]
        u0 = np.zeros(gk.node_shape) if u is None else _prolong(u, gk)
        u, its, ok = _solve_penalized_level(spec, constants, gk, f_k, g_k, cfg, eps0, u0, history)
        iterations += its
        if not ok and gk is grids[-1]:
            raise SolverError("penalized solve failed at the first eps stage", history)

    for eps in cfg.eps_schedule[1:]:
        u, its, ok = _solve_penalized_level(spec, constants, grid, f.values, g.values,
                                            cfg, eps, u, history)
        iterations += its
        if not ok:
            raise SolverError(f"penalized solve failed at eps={eps:g}", history)

    eps_final = cfg.eps_schedule[-1]
    u = np.maximum(u, 0.0)
    u_field = ScalarField(grid, u)
    return Solution(
        u=u_field,
        active_mask=u <= cfg.tol_u_zero,
        residual_history=history,
        iterations=iterations,
        eps_final=eps_final,
        converged=True,
        method="penalized",
        spec=spec,
        f_sup=float(np.abs(f.values).max()),
        g_sup=float(np.abs(g.values[grid.boundary_mask()]).max()),
        tol_u_zero=cfg.tol_u_zero,
    )


# ---------------------------------------------------------------------------
# diagnostics

def complementarity_report(spec, sol, f):
    """Residuals of the complementarity structure of a computed solution.

    r1: sup |Au - f| over nodes with u > tol_u_zero,
    r2: L1 norm of Au - f * chi_{u>tol} over the interior,
    r3: worst violation of f*chi <= Au <= f,
    all normalized by sup |f|.
    """
    grid = sol.grid
    op = DiscreteOperator(spec, grid)
    u = sol.u.values
    Au = op.apply(u)
    interior = grid.interior_mask()
    fv = f.values
    fnorm = max(float(np.abs(fv).max()), 1e-300)

    positive = interior & (u > sol.tol_u_zero)
    r1 = float(np.abs(Au - fv)[positive].max() / fnorm) if positive.any() else 0.0

    chi = (u > sol.tol_u_zero).astype(float)
    r2 = float(np.abs(Au - fv * chi)[interior].sum() * op.hd / fnorm)

    upper = (Au - fv)[interior].max()
    lower = (fv * chi - Au)[interior].max()
    r3 = float(max(0.0, upper, lower) / fnorm)

    return {"r1": r1, "r2": r2, "r3": r3, "f_norm": float(np.abs(fv).max())}


def write_solution(sol, u_path, diag_path):
    """Persist a solution as field CSV plus JSON diagnostics."""
    write_field_csv(sol.u, u_path)
    diag = {
        "iterations": sol.iterations,
        "residual_history": [float(r) for r in sol.residual_history],
        "eps_final": sol.eps_final,
        "converged": sol.converged,
        "method": sol.method,
    }
    with open(diag_path, "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
