"""Free boundary extraction and quantitative measurements.

All measurements are pure functions of a computed Solution (or synthetic
fields) and report empirical constants: growth exponents at contact
points, nondegeneracy ratios, porosity of the interface, the measure of
low-gradient layers, weighted second-order energies, box-counting
interface estimates, and discrete total variation / perimeter.

Ball operations use the discrete Euclidean ball with the center snapped
to the nearest node, so every measurement is deterministic. The total
variation is the anisotropic (axis-face) one: exact on axis-aligned
sets; curved-interface estimates carry the taxicab-vs-Euclidean factor
(pi/4 for circles), which callers apply explicitly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fields import ScalarField
from .operator import ConstantProfile, DiscreteOperator


@dataclass
class FreeBoundarySet:
    """Cells across which the discrete coincidence mask changes."""

    grid: object
    boundary_cells: np.ndarray        # (k, dim) integer cell indices
    coincidence_mask: np.ndarray      # nodal bool, u <= tol_u_zero
    tol_u_zero: float

    @property
    def is_empty(self):
        return self.boundary_cells.shape[0] == 0

    def cell_centers(self):
        g = self.grid
        return g.lo + (self.boundary_cells + 0.5) * g.h


def extract_free_boundary(sol):
    """Cells whose corner nodes mix coincidence and positivity."""
    grid = sol.grid
    mask = sol.u.values <= sol.tol_u_zero
    if grid.dim == 1:
        change = mask[:-1] != mask[1:]
        cells = np.nonzero(change)[0][:, None]
    else:
        a = mask[:-1, :-1]
        b = mask[1:, :-1]
        c = mask[:-1, 1:]
        d = mask[1:, 1:]
        change = ~((a == b) & (a == c) & (a == d))
        cells = np.stack(np.nonzero(change), axis=1)
    return FreeBoundarySet(grid=grid, boundary_cells=cells,
                           coincidence_mask=mask, tol_u_zero=sol.tol_u_zero)


# ---------------------------------------------------------------------------
# growth and nondegeneracy

def growth_exponent_fit(sol, x0, radii):
    """Least-squares exponent of S(r) = sup_{B_r(x0)} u against r.

    Returns (exponent, constant) from the fit log S = exponent*log r + log c.
    """
    grid = sol.grid
    radii = np.asarray(sorted(radii), dtype=float)
    if radii.size < 4:
        raise ValueError("need at least 4 radii for a growth fit")
    u = sol.u.values
    mesh = grid.node_mesh()
    center = grid.node_position(grid.nearest_node(x0))
    dist2 = sum((mesh[k] - center[k]) ** 2 for k in range(grid.dim))

    s_vals = []
    r_used = []
    for r in radii:
        if grid.distance_to_boundary(center) < r:
            continue
        ball = dist2 <= r * r + 1e-14
        s = float(u[ball].max()) if ball.any() else 0.0
        if s > 0.0:
            s_vals.append(s)
            r_used.append(r)
    if not s_vals:
        raise ValueError("supremum vanished on every radius; no growth to fit")
    if len(s_vals) < 4:
        raise ValueError("fewer than 4 usable radii for the growth fit")
    slope, intercept = np.polyfit(np.log(r_used), np.log(s_vals), 1)
    return float(slope), float(np.exp(intercept))


def nondegeneracy_check(sol, spec, f, points, radii):
    """Lower growth ratios (sup_{annulus r} u - u(y)) / r^q(y) per point.

    q(y) = p(y)/(p(y)-1). The report carries the global infimum; it
    should stay bounded away from zero, stably across the radius range.
    """
    grid = sol.grid
    if float(f.values.min()) <= 0.0:
        raise ValueError("nondegeneracy requires forcing bounded below by lambda > 0")
    u = sol.u.values
    mesh = grid.node_mesh()
    width = float(grid.h.max())

    entries = []
    for y in np.atleast_2d(np.asarray(points, dtype=float)):
        center = grid.node_position(grid.nearest_node(y))
        p_y = float(spec.p(center)[0])
        q_y = p_y / (p_y - 1.0)
        u_y = float(u[grid.nearest_node(y)])
        dist = np.sqrt(sum((mesh[k] - center[k]) ** 2 for k in range(grid.dim)))
        ratios = []
        for r in radii:
            if grid.distance_to_boundary(center) < r:
                raise ValueError("radius exceeds distance to domain boundary")
            shell = (dist <= r + 1e-14) & (dist > r - width - 1e-14)
            if not shell.any():
                continue
            m_r = float(u[shell].max())
            ratios.append({"r": float(r), "ratio": (m_r - u_y) / r ** q_y})
        if ratios:
            vals = [e["ratio"] for e in ratios]
            entries.append({"point": center.tolist(), "q": q_y, "u_y": u_y,
                            "ratios": ratios, "min_ratio": min(vals),
                            "max_ratio": max(vals)})
    if not entries:
        raise ValueError("no usable (point, radius) pairs")
    global_min = min(e["min_ratio"] for e in entries)
    return {"points": entries, "min_ratio": global_min,
            "pass": bool(global_min > 0.0)}


# ---------------------------------------------------------------------------
# porosity

@dataclass
class PorosityResult:
    delta_hat: float
    resolution_limited: bool
    per_radius: list = field(default_factory=list)


def porosity_estimate(fb, r_list):
    """Largest relative hole radius delta_hat of the boundary cell set.

    For every boundary point x and radius r, the largest rho with some
    ball B_rho(y) inside B_r(x) avoiding all boundary cells is found by
    exhaustive search over cell centers y (an exact Euclidean distance
    transform supplies the distance-to-boundary part). delta_hat is the
    minimum of rho/r over all (x, r).
    """
    if fb.is_empty:
        raise ValueError("free boundary set is empty")
    grid = fb.grid
    h_max = float(grid.h.max())
    r_list = [float(r) for r in r_list]
    if any(r < 3.0 * h_max for r in r_list):
        raise ValueError("radius under-resolved (need r >= 3h)")

    cell_shape = tuple(grid.n_cells)
    bmask = np.zeros(cell_shape, dtype=bool)
    bmask[tuple(fb.boundary_cells.T)] = True
    # exact distance from each cell center to the nearest boundary cell center
    edt = ndimage.distance_transform_edt(~bmask, sampling=grid.h)

    centers = fb.cell_centers()
    xcells = fb.boundary_cells
    per_radius = []
    delta_hat = np.inf
    limited = False
    for r in r_list:
        # enumerate offsets within the ball once per radius
        reach = np.ceil(r / grid.h).astype(int)
        if grid.dim == 1:
            offs = np.arange(-reach[0], reach[0] + 1)[:, None]
        else:
            ox, oy = np.meshgrid(np.arange(-reach[0], reach[0] + 1),
                                 np.arange(-reach[1], reach[1] + 1), indexing="ij")
            offs = np.stack([ox.ravel(), oy.ravel()], axis=1)
        offs_phys = offs * grid.h
        dist = np.linalg.norm(offs_phys, axis=1)
        offs = offs[dist <= r]
        dist = dist[dist <= r]

        best = np.zeros(xcells.shape[0])
        for o, d in zip(offs, dist):
            yc = xcells + o
            valid = np.all((yc >= 0) & (yc < grid.n_cells), axis=1)
            if not valid.any():
                continue
            rho = np.minimum(r - d, edt[tuple(yc[valid].T)])
            best[valid] = np.maximum(best[valid], rho)
        rho_min = float(best.min())
        if rho_min < h_max:
            limited = True
            rho_min = h_max
        per_radius.append({"r": r, "delta": rho_min / r})
        delta_hat = min(delta_hat, rho_min / r)
    return PorosityResult(delta_hat=float(delta_hat), resolution_limited=limited,
                          per_radius=per_radius)


# ---------------------------------------------------------------------------
# low-gradient layer measure

def o_delta_measure(sol, spec, x0, r, delta_list):
    """Volume of {|grad u| < delta^(1/(p-1))} near a contact point.

    Requires a constant exponent. Returns the per-delta measures inside
    B_r(x0) intersected with {u > tol}, and the linear fit
    measure ~ slope * delta + intercept.
    """
    if not isinstance(spec.p, ConstantProfile):
        lo, hi = spec.exponent_bounds(sol.grid)
        if abs(hi - lo) > 1e-12:
            raise ValueError("low-gradient measure requires a constant exponent")
        p = 0.5 * (lo + hi)
    else:
        p = spec.p.value
    grid = sol.grid
    op = DiscreteOperator(spec, grid)
    G, _ = op.cell_grad_sq(sol.u.values)
    grad_mag = np.sqrt(G)
    u_cells = op._to_cells(sol.u.values)

    centers = grid.cell_center_mesh()
    x0 = grid.node_position(grid.nearest_node(x0))
    dist2 = sum((centers[k] - x0[k]) ** 2 for k in range(grid.dim))
    in_ball = dist2 <= r * r + 1e-14
    positive = u_cells > sol.tol_u_zero

    deltas = np.asarray(sorted(delta_list), dtype=float)
    if np.any((deltas <= 0) | (deltas >= 1)):
        raise ValueError("delta values must lie in (0, 1)")
    measures = []
    for d in deltas:
        thresh = d ** (1.0 / (p - 1.0))
        sel = in_ball & positive & (grad_mag < thresh)
        measures.append(float(np.count_nonzero(sel) * op.hd))
    slope, intercept = np.polyfit(deltas, measures, 1)
    return {"deltas": deltas.tolist(), "measures": measures,
            "slope": float(slope), "intercept": float(intercept), "p": float(p)}


# ---------------------------------------------------------------------------
# weighted second-order energy

def _second_difference_norm(u, h):
    """Frobenius norm of the second-difference matrix at interior nodes."""
    if u.ndim == 1:
        uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / h[0] ** 2
        return np.abs(uxx)
    hx, hy = h
    core = u[1:-1, 1:-1]
    uxx = (u[2:, 1:-1] - 2 * core + u[:-2, 1:-1]) / hx ** 2
    uyy = (u[1:-1, 2:] - 2 * core + u[1:-1, :-2]) / hy ** 2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * hx * hy)
    return np.sqrt(uxx ** 2 + 2 * uxy ** 2 + uyy ** 2)


def _grad_norm_centered(u, h):
    if u.ndim == 1:
        return np.abs((u[2:] - u[:-2]) / (2 * h[0]))
    hx, hy = h
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hy)
    return np.sqrt(ux ** 2 + uy ** 2)


def energy_E_eps(sol_eps, r, eps):
    """Volume average of [(eps + |grad u|^2)^((p-2)/2) |D2 u|]^2 over B_r.

    The ball is centered at the box center; p comes from the solution's
    operator spec. Stays bounded along the eps continuation when the
    regularity estimates apply.
    """
    grid = sol_eps.grid
    if r < 3.0 * float(grid.h.max()):
        raise ValueError("radius under-resolved (need r >= 3h)")
    u = sol_eps.u.values
    p_nodal = sol_eps.spec.exponent_field(grid).values

    d2 = _second_difference_norm(u, grid.h)
    gn = _grad_norm_centered(u, grid.h)
    p_in = p_nodal[tuple(slice(1, -1) for _ in range(grid.dim))]
    weight = (eps + gn ** 2) ** ((p_in - 2.0) / 2.0)

    mesh = grid.node_mesh()
    center = grid.node_position(grid.nearest_node(0.5 * (grid.lo + grid.hi)))
    dist2 = sum((mesh[k] - center[k]) ** 2 for k in range(grid.dim))
    in_ball = (dist2 <= r * r + 1e-14)[tuple(slice(1, -1) for _ in range(grid.dim))]
    if not in_ball.any():
        raise ValueError("ball contains no interior nodes")
    integrand = (weight * d2) ** 2
    return float(integrand[in_ball].mean())


# ---------------------------------------------------------------------------
# box counting

def hausdorff_box_count(fb, x0, r):
    """(count, count * h^(n-1)) of boundary cells inside B_r(x0)."""
    grid = fb.grid
    if fb.is_empty:
        return 0, 0.0
    centers = fb.cell_centers()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dist = np.linalg.norm(centers - x0, axis=1)
    count = int(np.count_nonzero(dist <= r + 1e-14))
    h_eff = float(np.prod(grid.h) ** (1.0 / grid.dim))
    return count, count * h_eff ** (grid.dim - 1)


# ---------------------------------------------------------------------------
# difference-quotient second-order energy

def w22_quotient_energy(sol, h_steps, center=None, R=None):
    """Cutoff-weighted energies of grad of difference quotients.

    For each step tau (a multiple of the grid spacing) and each axis,
    computes sum zeta^2 |grad((u(x+tau e) - u(x))/tau)|^2 h^d with the
    piecewise-linear radial cutoff zeta (1 on B_R, 0 outside B_2R).
    Requires kappa > 0 in the solution's operator spec.
    """
    grid = sol.grid
    if sol.spec is None or sol.spec.kappa <= 0.0:
        raise ValueError("quotient energy requires kappa > 0")
    if center is None:
        center = 0.5 * (grid.lo + grid.hi)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if R is None:
        R = 0.35 * float(np.min(np.minimum(center - grid.lo, grid.hi - center)))

    def zeta(points):
        d = np.linalg.norm(points - center, axis=-1)
        return np.clip((2.0 * R - d) / R, 0.0, 1.0)

    u = sol.u.values
    hd = float(np.prod(grid.h))
    out = []
    for tau in h_steps:
        for axis in range(grid.dim):
            h_ax = grid.h[axis]
            m = tau / h_ax
            if abs(m - round(m)) > 1e-9:
                raise ValueError(f"step {tau} is not a multiple of the grid spacing")
            m = int(round(m))
            if m < 1 or m >= grid.n_cells[axis] - 2:
                raise ValueError(f"step {tau} too large for the grid")
            sl_hi = [slice(None)] * grid.dim
            sl_lo = [slice(None)] * grid.dim
            sl_hi[axis] = slice(m, None)
            sl_lo[axis] = slice(0, -m if m else None)
            quotient = (u[tuple(sl_hi)] - u[tuple(sl_lo)]) / (m * h_ax)

            energy = 0.0
            for k in range(grid.dim):
                gk = np.diff(quotient, axis=k) / grid.h[k]
                # face-center positions of the quotient subgrid
                axes = []
                for a in range(grid.dim):
                    n_a = quotient.shape[a]
                    coords = grid.lo[a] + grid.h[a] * np.arange(n_a)
                    if a == k:
                        coords = 0.5 * (coords[:-1] + coords[1:])
                    axes.append(coords)
                mesh = np.meshgrid(*axes, indexing="ij") if grid.dim > 1 else (axes[0],)
                pts = np.stack([mm.ravel() for mm in mesh], axis=-1)
                z = zeta(pts).reshape(gk.shape)
                energy += float(np.sum(z * z * gk * gk) * hd)
            out.append({"tau": float(tau), "axis": axis, "energy": energy})
    return out


# ---------------------------------------------------------------------------
# total variation and perimeter

def bv_norm(f, region=None):
    """Anisotropic discrete total variation: sum over faces of |jump| * h^(n-1).

    The transverse face measure uses the dual cell (half width on the
    outermost rows), making the value exact for axis-aligned indicator
    sets. `region` restricts to faces whose two nodes both lie in the
    given boolean node mask.
    """
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        raise TypeError("bv_norm expects a ScalarField")
    total = 0.0
    if grid.dim == 1:
        jumps = np.abs(np.diff(vals))
        if region is not None:
            keep = region[:-1] & region[1:]
            jumps = jumps[keep]
        return float(jumps.sum())
    hx, hy = grid.h
    nx, ny = grid.n_cells
    wy = np.full(ny + 1, hy)
    wy[0] = wy[-1] = 0.5 * hy
    wx = np.full(nx + 1, hx)
    wx[0] = wx[-1] = 0.5 * hx

    jump_x = np.abs(np.diff(vals, axis=0)) * wy[None, :]
    jump_y = np.abs(np.diff(vals, axis=1)) * wx[:, None]
    if region is not None:
        keep_x = region[:-1, :] & region[1:, :]
        keep_y = region[:, :-1] & region[:, 1:]
        jump_x = jump_x * keep_x
        jump_y = jump_y * keep_y
    return float(jump_x.sum() + jump_y.sum())


def perimeter_of_positivity(sol):
    """Anisotropic perimeter of {u > tol_u_zero} (taxicab for curved sets)."""
    chi = ScalarField(sol.grid, (sol.u.values > sol.tol_u_zero).astype(float))
    return bv_norm(chi)


# ---------------------------------------------------------------------------
# aggregated report

@dataclass
class FreeBoundaryReport:
    growth_fits: list = field(default_factory=list)
    porosity: dict = field(default_factory=dict)
    o_delta_slopes: list = field(default_factory=list)
    perimeter: dict = field(default_factory=dict)
    w22_energy: list = field(default_factory=list)
    complementarity: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "growth_fits": self.growth_fits,
            "porosity": self.porosity,
            "o_delta_slopes": self.o_delta_slopes,
            "perimeter": self.perimeter,
            "w22_energy": self.w22_energy,
            "complementarity": self.complementarity,
        }
