"""The quasilinear flux a(x, eta), its penalized variant, and the discrete operator.

The flux family implemented here is

    a(x, eta) = M(x) * (kappa + |s*eta|^2)^((p(x)-2)/2) * s * eta,

with coefficient M(x) > 0, exponent p(x) > 1, kappa in [0, 1] and a
gradient prescale s (grad_scale, 1 by default). The prescale keeps the
family closed under the rescaling and blow-up transforms in `oracles`.

For kappa = 0 the weight is singular (p < 2) or degenerate (p > 2) at
eta = 0; evaluation replaces |s*eta|^2 by max(|s*eta|^2, eta_floor^2),
and the discrete energy uses the matching C^1 quadratic extension so
that the discrete divergence stays the exact gradient of the energy.
"""

import json

import numpy as np
import scipy.sparse as sp

from .fields import ExponentField, Grid, ScalarField, read_field_csv


# ---------------------------------------------------------------------------
# coefficient profiles

class ConstantProfile:
    mode = "constant"

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        n = 1 if points.ndim <= 1 else points.shape[0]
        return np.full(n, self.value)

    def range(self, lo=None, hi=None):
        return self.value, self.value

    def to_config(self):
        return {"mode": "constant", "value": self.value}


class AffineProfile:
    """value0 + gradient . x, optionally clipped to [clip_lo, clip_hi]."""

    mode = "affine"

    def __init__(self, value0, grad, clip_lo=None, clip_hi=None):
        self.value0 = float(value0)
        self.grad = np.atleast_1d(np.asarray(grad, dtype=float))
        self.clip_lo = None if clip_lo is None else float(clip_lo)
        self.clip_hi = None if clip_hi is None else float(clip_hi)

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim <= 1:
            points = points.reshape(1, -1)
        v = self.value0 + points @ self.grad
        if self.clip_lo is not None or self.clip_hi is not None:
            v = np.clip(v, self.clip_lo, self.clip_hi)
        return v

    def range(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        corners = self.value0 + np.array(
            [np.where(self.grad >= 0, a, b) @ self.grad for a, b in [(lo, hi), (hi, lo)]])
        vmin, vmax = corners.min(), corners.max()
        if self.clip_lo is not None:
            vmin, vmax = max(vmin, self.clip_lo), max(vmax, self.clip_lo)
        if self.clip_hi is not None:
            vmin, vmax = min(vmin, self.clip_hi), min(vmax, self.clip_hi)
        return float(vmin), float(vmax)

    def to_config(self):
        cfg = {"mode": "affine", "value0": self.value0, "gradient": self.grad.tolist()}
        if self.clip_lo is not None or self.clip_hi is not None:
            cfg["clip"] = [self.clip_lo, self.clip_hi]
        return cfg


class GridProfile:
    """Nodal samples with multilinear interpolation off the nodes."""

    mode = "csv"

    def __init__(self, field, path=None):
        self.field = field
        self.path = path

    def __call__(self, points):
        return self.field.interpolate(points)

    def range(self, lo=None, hi=None):
        return float(self.field.values.min()), float(self.field.values.max())

    def to_config(self):
        if self.path is None:
            raise ValueError("grid profile without a backing file is not serializable")
        return {"mode": "csv", "path": self.path}


class FuncProfile:
    """Arbitrary callable profile (in-memory only, not serializable)."""

    mode = "func"

    def __init__(self, fn, sample_box=None):
        self.fn = fn
        self.sample_box = sample_box

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim <= 1:
            points = points.reshape(1, -1)
        return np.asarray(self.fn(points), dtype=float)

    def range(self, lo, hi, samples=512):
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        rng = np.random.default_rng(0)
        pts = lo + (hi - lo) * rng.random((samples, lo.size))
        v = self(pts)
        return float(v.min()), float(v.max())

    def to_config(self):
        raise ValueError("callable profile is not serializable")


def profile_from_config(cfg):
    mode = cfg.get("mode")
    if mode == "constant":
        return ConstantProfile(cfg["value"])
    if mode == "affine":
        clip = cfg.get("clip", (None, None))
        return AffineProfile(cfg["value0"], cfg["gradient"], clip[0], clip[1])
    if mode == "csv":
        return GridProfile(read_field_csv(cfg["path"]), path=cfg["path"])
    raise ValueError(f"unknown profile mode {mode!r}")


# ---------------------------------------------------------------------------
# operator specification

class OperatorSpec:
    """Flux map a(x, eta) of the model family plus its admissibility data.

    p and M are profiles (constant / affine / gridded / callable); nodal
    fields for a given grid are materialized on demand and validated
    against the declared exponent bounds and Lipschitz constant.
    """

    def __init__(self, p, M, kappa, eta_floor=1e-10, grad_scale=1.0,
                 p_minus=None, p_plus=None, lipschitz_L=None):
        if not 0.0 <= kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        if eta_floor <= 0.0:
            raise ValueError("eta_floor must be positive")
        if grad_scale <= 0.0:
            raise ValueError("grad_scale must be positive")
        self.p = p
        self.M = M
        self.kappa = float(kappa)
        self.eta_floor = float(eta_floor)
        self.grad_scale = float(grad_scale)
        self.p_minus = p_minus
        self.p_plus = p_plus
        self.lipschitz_L = lipschitz_L

    def exponent_bounds(self, grid):
        if self.p_minus is not None and self.p_plus is not None:
            return self.p_minus, self.p_plus
        return self.p.range(grid.lo, grid.hi)

    def exponent_lipschitz(self, grid):
        if self.lipschitz_L is not None:
            return self.lipschitz_L
        if isinstance(self.p, ConstantProfile):
            return 0.0
        if isinstance(self.p, AffineProfile):
            return float(np.linalg.norm(self.p.grad))
        # sampled estimate for gridded/callable profiles
        pv = self._nodal(self.p, grid)
        L = 0.0
        for k in range(grid.dim):
            d = np.abs(np.diff(pv, axis=k))
            if d.size:
                L = max(L, d.max() / grid.h[k])
        return L

    @staticmethod
    def _nodal(profile, grid):
        mesh = grid.node_mesh()
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return profile(pts).reshape(grid.node_shape)

    def exponent_field(self, grid):
        p_minus, p_plus = self.exponent_bounds(grid)
        L = self.exponent_lipschitz(grid)
        return ExponentField(grid, self._nodal(self.p, grid), p_minus, p_plus, L)

    def coefficient_field(self, grid):
        vals = self._nodal(self.M, grid)
        if vals.min() <= 0.0:
            raise ValueError("coefficient M must be strictly positive")
        return ScalarField(grid, vals)

    def coefficient_bounds(self, grid_or_box):
        if isinstance(grid_or_box, Grid):
            lo, hi = grid_or_box.lo, grid_or_box.hi
        else:
            lo, hi = grid_or_box
        m_lo, m_hi = self.M.range(lo, hi)
        if m_lo <= 0.0:
            raise ValueError("coefficient M must be strictly positive")
        return m_lo, m_hi

    def to_config(self):
        return {
            "kappa": self.kappa,
            "eta_floor": self.eta_floor,
            "grad_scale": self.grad_scale,
            "p": self.p.to_config(),
            "M": self.M.to_config(),
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(
            p=profile_from_config(cfg["p"]),
            M=profile_from_config(cfg["M"]),
            kappa=cfg.get("kappa", 0.0),
            eta_floor=cfg.get("eta_floor", 1e-10),
            grad_scale=cfg.get("grad_scale", 1.0),
        )

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_config(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_config(json.load(fh))


class StructuralConstants:
    """Ellipticity / growth constants entering the structural inequalities."""

    def __init__(self, c0, c1, c2=1.0, c3=1.0, c4=1.0):
        for name, val in (("c0", c0), ("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)):
            if val <= 0:
                raise ValueError(f"{name} must be positive")
        self.c0, self.c1, self.c2, self.c3, self.c4 = (
            float(c0), float(c1), float(c2), float(c3), float(c4))

    @classmethod
    def for_model(cls, spec, grid, margin=1.0):
        """Rigorous c0, c1 of the model flux on the grid's box.

        c0 = m_lo * min(1, p_minus - 1), c1 = m_hi * max(1, p_plus - 1) * dim;
        `margin` > 1 loosens both to absorb finite-difference sampling error.
        """
        p_minus, p_plus = spec.exponent_bounds(grid)
        m_lo, m_hi = spec.coefficient_bounds(grid)
        c0 = m_lo * min(1.0, p_minus - 1.0) / margin
        c1 = m_hi * max(1.0, p_plus - 1.0) * grid.dim * margin
        return cls(c0=c0, c1=c1)


# ---------------------------------------------------------------------------
# pointwise flux evaluation

def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(1, dim)
    return x


def flux(spec, x, eta):
    """a(x, eta) for one point or a batch of (k, dim) points/vectors."""
    eta = np.asarray(eta, dtype=float)
    single = eta.ndim == 1
    dim = eta.shape[-1] if eta.ndim > 1 else eta.size
    x = _as_points(x, dim)
    eta = eta.reshape(-1, dim)
    p = spec.p(x)
    M = spec.M(x)
    s = spec.grad_scale
    mag2 = (s * s) * np.sum(eta * eta, axis=-1)
    if spec.kappa == 0.0:
        base = np.maximum(mag2, spec.eta_floor ** 2)
    else:
        base = spec.kappa + mag2
    out = (M * base ** ((p - 2.0) / 2.0) * s)[:, None] * eta
    return out[0] if single else out


def flux_penalized(spec, constants, eps, x, eta):
    """a_eps = a + (eps*c0/dim) * (eps + |eta|^2)^((p-2)/2) * eta."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    eta = np.asarray(eta, dtype=float)
    single = eta.ndim == 1
    dim = eta.shape[-1] if eta.ndim > 1 else eta.size
    x = _as_points(x, dim)
    eta2 = eta.reshape(-1, dim)
    p = spec.p(x)
    mag2 = np.sum(eta2 * eta2, axis=-1)
    extra = (eps * constants.c0 / dim) * (eps + mag2) ** ((p - 2.0) / 2.0)
    base = flux(spec, x, eta2)
    out = base + extra[:, None] * eta2
    return out[0] if single else out


# ---------------------------------------------------------------------------
# discrete operator: conservative divergence = exact energy gradient

class DiscreteOperator:
    """Cell-energy finite differences for div a(x, grad u) on a grid.

    The discrete energy is E(u) = sum_cells (M_c / (p_c s)) * base_c^(p_c/2) * h^d
    with base_c = kappa + s^2 * G_c and G_c the per-cell mean of squared
    edge differences. apply() returns exactly -grad E / h^d at interior
    nodes (zero on the boundary layer), so the scheme is conservative and
    is the gradient of a discrete energy by construction. In 1D cells and
    faces coincide and this reduces to the plain face-flux divergence
    with face-averaged p and M.

    With `eps` set, the penalized flux weight (extra term of a_eps) is
    added; `constants` must then supply c0.
    """

    def __init__(self, spec, grid, eps=None, constants=None):
        if eps is not None and constants is None:
            raise ValueError("penalized operator needs structural constants (c0)")
        self.spec = spec
        self.grid = grid
        self.eps = eps
        self.c0 = None if constants is None else constants.c0
        pf = spec.exponent_field(grid)
        Mf = spec.coefficient_field(grid)
        self.p_c = self._to_cells(pf.values)
        self.M_c = self._to_cells(Mf.values)
        self.p_nodal = pf.values
        self.M_nodal = Mf.values
        self.hd = float(np.prod(grid.h))
        self.interior = grid.interior_mask()

    def _to_cells(self, nodal):
        if self.grid.dim == 1:
            return 0.5 * (nodal[:-1] + nodal[1:])
        return 0.25 * (nodal[:-1, :-1] + nodal[1:, :-1] + nodal[:-1, 1:] + nodal[1:, 1:])

    # -- cell kernels -------------------------------------------------------

    def cell_grad_sq(self, u):
        g = self.grid
        if g.dim == 1:
            gx = np.diff(u) / g.h[0]
            return gx * gx, (gx,)
        hx, hy = g.h
        gxb = (u[1:, :-1] - u[:-1, :-1]) / hx
        gxt = (u[1:, 1:] - u[:-1, 1:]) / hx
        gyl = (u[:-1, 1:] - u[:-1, :-1]) / hy
        gyr = (u[1:, 1:] - u[1:, :-1]) / hy
        G = 0.5 * (gxb * gxb + gxt * gxt) + 0.5 * (gyl * gyl + gyr * gyr)
        return G, (gxb, gxt, gyl, gyr)

    def _weight_terms(self, G):
        """(w, dw/dG) of the total edge weight at cell gradient-square G."""
        spec = self.spec
        s = spec.grad_scale
        s2 = s * s
        mag2 = s2 * G
        if spec.kappa == 0.0:
            fl2 = spec.eta_floor ** 2
            base = np.maximum(mag2, fl2)
            floored = mag2 < fl2
        else:
            base = spec.kappa + mag2
            floored = None
        w = self.M_c * s * base ** ((self.p_c - 2.0) / 2.0)
        dw = self.M_c * s * s2 * ((self.p_c - 2.0) / 2.0) * base ** ((self.p_c - 4.0) / 2.0)
        if floored is not None:
            dw = np.where(floored, 0.0, dw)
        if self.eps is not None:
            # penalization term: (eps*c0/dim)*(eps + s^2 G)^((p-2)/2) acting on s*eta
            coef = self.eps * self.c0 / self.grid.dim
            base_e = self.eps + mag2
            w = w + coef * s * base_e ** ((self.p_c - 2.0) / 2.0)
            dw = dw + coef * s * s2 * ((self.p_c - 2.0) / 2.0) * base_e ** ((self.p_c - 4.0) / 2.0)
        return w, dw

    def _cell_energy_density(self, G):
        spec = self.spec
        s = spec.grad_scale
        mag2 = (s * s) * G
        if spec.kappa == 0.0:
            fl2 = spec.eta_floor ** 2
            base = np.maximum(mag2, fl2)
            e = (self.M_c / (self.p_c * s)) * base ** (self.p_c / 2.0)
            # C^1 quadratic extension below the floor keeps grad E consistent
            low = mag2 < fl2
            if np.any(low):
                e_lin = ((self.M_c / (self.p_c * s)) * fl2 ** (self.p_c / 2.0)
                         + 0.5 * self.M_c * s * fl2 ** ((self.p_c - 2.0) / 2.0) * (G - fl2 / (s * s)))
                e = np.where(low, e_lin, e)
        else:
            e = (self.M_c / (self.p_c * s)) * (spec.kappa + mag2) ** (self.p_c / 2.0)
        if self.eps is not None:
            coef = self.eps * self.c0 / self.grid.dim
            e = e + (coef / (self.p_c * s)) * (self.eps + mag2) ** (self.p_c / 2.0)
        return e

    # -- public operations --------------------------------------------------

    def edge_weights(self, u):
        """Per-face flux weights (cell weights averaged to faces)."""
        G, _ = self.cell_grad_sq(u)
        w, _ = self._weight_terms(G)
        g = self.grid
        if g.dim == 1:
            return (w,)
        nx, ny = g.n_cells
        wx = np.empty((nx, ny + 1))
        wx[:, 1:-1] = 0.5 * (w[:, :-1] + w[:, 1:])
        wx[:, 0] = w[:, 0]
        wx[:, -1] = w[:, -1]
        wy = np.empty((nx + 1, ny))
        wy[1:-1, :] = 0.5 * (w[:-1, :] + w[1:, :])
        wy[0, :] = w[0, :]
        wy[-1, :] = w[-1, :]
        return wx, wy

    def apply(self, u):
        """(Au)_i at interior nodes; zero at boundary nodes."""
        g = self.grid
        Au = np.zeros_like(u)
        if g.dim == 1:
            w, = self.edge_weights(u)
            F = w * (np.diff(u) / g.h[0])
            Au[1:-1] = np.diff(F) / g.h[0]
            return Au
        hx, hy = g.h
        wx, wy = self.edge_weights(u)
        Fx = wx * (np.diff(u, axis=0) / hx)
        Fy = wy * (np.diff(u, axis=1) / hy)
        Au[1:-1, 1:-1] = ((Fx[1:, 1:-1] - Fx[:-1, 1:-1]) / hx
                          + (Fy[1:-1, 1:] - Fy[1:-1, :-1]) / hy)
        return Au

    def energy(self, u, f=None):
        """Discrete energy E(u) (+ sum f*u*h^d over interior if f given)."""
        G, _ = self.cell_grad_sq(u)
        e = self._cell_energy_density(G)
        total = e.sum() * self.hd
        if f is not None:
            total += (f * u)[self.interior].sum() * self.hd
        return float(total)

    def hessian(self, u):
        """Sparse Hessian of E(u) over all nodes (CSR)."""
        g = self.grid
        G, grads = self.cell_grad_sq(u)
        w, dw = self._weight_terms(G)
        e1 = 0.5 * w
        e2 = 0.5 * dw
        n_nodes = int(np.prod(g.node_shape))
        if g.dim == 1:
            hx = g.h[0]
            gx, = grads
            idx = np.arange(n_nodes)
            corners = np.stack([idx[:-1], idx[1:]], axis=1)
            dG = np.stack([-2.0 * gx / hx, 2.0 * gx / hx], axis=1)
            D2 = np.array([[2.0, -2.0], [-2.0, 2.0]]) / hx ** 2
        else:
            hx, hy = g.h
            gxb, gxt, gyl, gyr = (z.ravel() for z in grads)
            idx = np.arange(n_nodes).reshape(g.node_shape)
            a = idx[:-1, :-1].ravel()
            b = idx[1:, :-1].ravel()
            c = idx[:-1, 1:].ravel()
            d = idx[1:, 1:].ravel()
            corners = np.stack([a, b, c, d], axis=1)
            dG = np.stack([
                -gxb / hx - gyl / hy,
                gxb / hx - gyr / hy,
                -gxt / hx + gyl / hy,
                gxt / hx + gyr / hy,
            ], axis=1)
            D2x = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]], float) / hx ** 2
            D2y = np.array([[1, 0, -1, 0], [0, 1, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 1]], float) / hy ** 2
            D2 = D2x + D2y
        e1 = e1.ravel()
        e2 = e2.ravel()
        blocks = (e2[:, None, None] * dG[:, :, None] * dG[:, None, :]
                  + e1[:, None, None] * D2[None, :, :]) * self.hd
        k = corners.shape[1]
        rows = np.repeat(corners, k, axis=1).ravel()
        cols = np.tile(corners, (1, k)).ravel()
        H = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n_nodes, n_nodes))
        return H.tocsr()


def divergence_of_flux(spec, u, eps=None, constants=None):
    """Conservative divergence of the (optionally penalized) flux of u.

    Defined at interior nodes only; the boundary layer of the returned
    field is zero and flagged by the grid's interior mask.
    """
    op = DiscreteOperator(spec, u.grid, eps=eps, constants=constants)
    return ScalarField(u.grid, op.apply(u.values))


# ---------------------------------------------------------------------------
# sampled verification of the structural inequalities

def _jacobian_fd(spec, x, eta):
    """Central-difference Jacobian d a_i / d eta_j at a batch of samples."""
    k, dim = eta.shape
    J = np.empty((k, dim, dim))
    step = 1e-6 * np.maximum(1.0, np.linalg.norm(eta, axis=1))
    for j in range(dim):
        de = np.zeros_like(eta)
        de[:, j] = step
        J[:, :, j] = (flux(spec, x, eta + de) - flux(spec, x, eta - de)) / (2 * step)[:, None]
    return J


def verify_structural(spec, constants, sample_count, seed, box=None,
                      eta_range=(1e-3, 10.0), dim=None, check_second_order=False,
                      log_factor=None):
    """Sample the structural inequalities of the flux map and report ratios.

    Draws random (x, eta, xi) triples, approximates the eta-Jacobian by
    central differences, and checks
      * ellipticity:      xi' J xi        >= c0 * env * |xi|^2
      * boundedness:      sum_ij |J_ij|   <= c1 * env
      * spatial Lipschitz |a(x1,.) - a(x2,.)| <= c2 |x1-x2| * env_x * log_term
    where env = (kappa + |eta|^2)^((p(x)-2)/2). The Lipschitz check reports
    the empirical worst-case ratio (the sharp constant is not asserted).
    With check_second_order, second x/eta derivatives are sampled against
    the |eta|^(p-1) / |eta|^(p-2) envelopes that hold for constant p.

    Returns a dict with per-inequality worst-case ratios and pass flags.
    """
    rng = np.random.default_rng(seed)
    if box is None:
        box = (np.zeros(2 if dim is None else dim), np.ones(2 if dim is None else dim))
    lo = np.atleast_1d(np.asarray(box[0], float))
    hi = np.atleast_1d(np.asarray(box[1], float))
    d = lo.size
    n = int(sample_count)

    x = lo + (hi - lo) * rng.random((n, d))
    # eta magnitudes log-uniform, bounded away from 0 where kappa = 0
    mag = np.exp(rng.uniform(np.log(eta_range[0]), np.log(eta_range[1]), n))
    direction = rng.normal(size=(n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    eta = mag[:, None] * direction
    xi = rng.normal(size=(n, d))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)

    p = spec.p(x)
    env = (spec.kappa + mag ** 2) ** ((p - 2.0) / 2.0)

    J = _jacobian_fd(spec, x, eta)
    quad = np.einsum("ki,kij,kj->k", xi, J, xi)
    ellip_ratio = quad / env
    bound_ratio = np.abs(J).sum(axis=(1, 2)) / env

    # spatial Lipschitz: pair each x with an independent second point
    x2 = lo + (hi - lo) * rng.random((n, d))
    p2 = spec.p(x2)
    diff = np.linalg.norm(flux(spec, x, eta) - flux(spec, x2, eta), axis=1)
    env_x = ((spec.kappa + mag ** 2) ** ((p - 1.0) / 2.0)
             + (spec.kappa + mag ** 2) ** ((p2 - 1.0) / 2.0))
    if log_factor is None:
        p_lo, p_hi = spec.exponent_bounds(Grid(lo, hi, np.full(d, 4)))
        log_factor = not np.isclose(p_lo, p_hi)
    log_term = 1.0 + np.abs(np.log(np.sqrt(spec.kappa + mag ** 2))) if log_factor else 1.0
    dist = np.linalg.norm(x - x2, axis=1)
    ok = dist > 1e-9
    lip_ratio = np.zeros(n)
    lip_ratio[ok] = diff[ok] / (dist[ok] * env_x[ok] * (log_term[ok] if log_factor else 1.0))

    report = {
        "samples": n,
        "ellipticity_min_ratio": float(ellip_ratio.min()),
        "ellipticity_pass": bool(ellip_ratio.min() >= constants.c0),
        "boundedness_max_ratio": float(bound_ratio.max()),
        "boundedness_pass": bool(bound_ratio.max() <= constants.c1),
        "lipschitz_max_ratio": float(lip_ratio.max()),
        "lipschitz_log_factor": bool(log_factor),
    }

    if check_second_order:
        # second derivatives in x (toward x2 direction) and mixed eta-x,
        # against the constant-p envelopes
        hstep = 1e-5
        ex = rng.normal(size=(n, d))
        ex /= np.linalg.norm(ex, axis=1, keepdims=True)
        d2x = (flux(spec, x + hstep * ex, eta) - 2 * flux(spec, x, eta)
               + flux(spec, x - hstep * ex, eta)) / hstep ** 2
        env1 = mag ** (p - 1.0)
        report["second_x_max_ratio"] = float(
            (np.abs(d2x).sum(axis=1) / env1).max())
        estep = (1e-4 * np.maximum(1.0, mag))[:, None]
        ee = rng.normal(size=(n, d))
        ee /= np.linalg.norm(ee, axis=1, keepdims=True)
        mixed = (flux(spec, x + hstep * ex, eta + estep * ee)
                 - flux(spec, x + hstep * ex, eta - estep * ee)
                 - flux(spec, x - hstep * ex, eta + estep * ee)
                 + flux(spec, x - hstep * ex, eta - estep * ee)) / (4 * hstep * estep)
        env2 = mag ** (p - 2.0)
        report["second_mixed_max_ratio"] = float(
            (np.abs(mixed).sum(axis=1) / env2).max())

    return report
