"""Structured grids, nodal fields, and field CSV I/O.

Everything lives on a uniform tensor grid of the computational box in
dimension 1 or 2. Scalar data is nodal; vector data (gradients, fluxes)
is face-centered (staggered). Fields are immutable after construction,
so all operations here are pure functions.
"""

import numpy as np


class FieldFormatError(ValueError):
    """Raised for malformed field CSV files."""


class Grid:
    """Uniform node-centered grid on a box.

    Nodes along axis k sit at lo[k] + i*h[k] for i = 0..n_cells[k], with
    h[k] = (hi[k] - lo[k]) / n_cells[k]. Values indexed [i] in 1D and
    [i, j] in 2D (C order, i slow).
    """

    def __init__(self, lo, hi, n_cells):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n_cells = np.atleast_1d(np.asarray(n_cells, dtype=int))
        if not (lo.shape == hi.shape == n_cells.shape):
            raise ValueError("lo, hi, n_cells must have matching lengths")
        if lo.ndim != 1 or lo.size not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if np.any(n_cells < 4):
            raise ValueError("need at least 4 cells per axis")
        if np.any(hi <= lo):
            raise ValueError("box extents must satisfy hi > lo")
        self.lo = lo
        self.hi = hi
        self.n_cells = n_cells
        self.h = (hi - lo) / n_cells

    @property
    def dim(self):
        return self.lo.size

    @property
    def node_shape(self):
        return tuple(self.n_cells + 1)

    @property
    def node_count(self):
        return int(np.prod(self.n_cells + 1))

    def axis_coords(self, axis):
        return self.lo[axis] + self.h[axis] * np.arange(self.n_cells[axis] + 1)

    def node_mesh(self):
        """Tuple of coordinate arrays, each of node_shape."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return np.meshgrid(*axes, indexing="ij")

    def cell_center_mesh(self):
        axes = [self.lo[k] + self.h[k] * (0.5 + np.arange(self.n_cells[k]))
                for k in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return np.meshgrid(*axes, indexing="ij")

    def interior_mask(self):
        m = np.zeros(self.node_shape, dtype=bool)
        if self.dim == 1:
            m[1:-1] = True
        else:
            m[1:-1, 1:-1] = True
        return m

    def boundary_mask(self):
        return ~self.interior_mask()

    def nearest_node(self, point):
        """Index tuple of the node closest to `point`."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((point - self.lo) / self.h).astype(int)
        idx = np.clip(idx, 0, self.n_cells)
        return tuple(idx)

    def node_position(self, index):
        return self.lo + self.h * np.asarray(index, dtype=float)

    def ball_mask(self, center, r):
        """Boolean node mask of the discrete ball B_r(center).

        The center is snapped to the nearest node so repeated measurements
        are deterministic.
        """
        snapped = self.node_position(self.nearest_node(center))
        mesh = self.node_mesh()
        d2 = sum((mesh[k] - snapped[k]) ** 2 for k in range(self.dim))
        return d2 <= r * r + 1e-14

    def distance_to_boundary(self, point):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return float(min(np.min(point - self.lo), np.min(self.hi - point)))

    def refined(self, factor=2):
        return Grid(self.lo, self.hi, self.n_cells * factor)

    def coarsened(self, factor=2):
        if np.any(self.n_cells % factor):
            raise ValueError("cell counts not divisible by coarsening factor")
        return Grid(self.lo, self.hi, self.n_cells // factor)

    def is_compatible(self, other):
        return (self.dim == other.dim
                and np.allclose(self.lo, other.lo)
                and np.allclose(self.hi, other.hi)
                and np.array_equal(self.n_cells, other.n_cells))

    def __repr__(self):
        return f"Grid(lo={self.lo.tolist()}, hi={self.hi.tolist()}, n_cells={self.n_cells.tolist()})"


class ScalarField:
    """Nodal scalar values on a grid. Values must be finite."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.node_shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid nodes {grid.node_shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.node_shape, float(value)))

    @classmethod
    def from_function(cls, grid, fn):
        mesh = grid.node_mesh()
        return cls(grid, np.asarray(fn(*mesh), dtype=float))

    def max_norm(self):
        return float(np.max(np.abs(self.values)))

    def interpolate(self, points):
        """Multilinear interpolation at (k, dim) points (clamped to the box)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[None, :]
        t = (points - self.grid.lo) / self.grid.h
        t = np.clip(t, 0.0, self.grid.n_cells.astype(float))
        i0 = np.minimum(t.astype(int), self.grid.n_cells - 1)
        s = t - i0
        v = self.values
        if self.grid.dim == 1:
            a = v[i0[:, 0]]
            b = v[i0[:, 0] + 1]
            return a * (1 - s[:, 0]) + b * s[:, 0]
        i, j = i0[:, 0], i0[:, 1]
        sx, sy = s[:, 0], s[:, 1]
        return (v[i, j] * (1 - sx) * (1 - sy) + v[i + 1, j] * sx * (1 - sy)
                + v[i, j + 1] * (1 - sx) * sy + v[i + 1, j + 1] * sx * sy)

    def __repr__(self):
        return f"ScalarField({self.grid!r}, min={self.values.min():.3g}, max={self.values.max():.3g})"


class VectorField:
    """Face-centered (staggered) vector data.

    component[k] holds the k-th component at the faces normal to axis k:
    shape (nx, ny+1) for axis 0 and (nx+1, ny) for axis 1 in 2D, (nx,) in 1D.
    """

    def __init__(self, grid, components):
        if len(components) != grid.dim:
            raise ValueError("need one component array per axis")
        comps = []
        for k, comp in enumerate(components):
            comp = np.asarray(comp, dtype=float)
            expect = list(grid.node_shape)
            expect[k] -= 1
            if comp.shape != tuple(expect):
                raise ValueError(
                    f"component {k} has shape {comp.shape}, expected {tuple(expect)}")
            comps.append(comp)
        self.grid = grid
        self.components = comps


def gradient(u):
    """Face-centered first differences of a nodal field.

    component[k] at the face between nodes i and i+1 (along axis k) is
    (u[i+1] - u[i]) / h[k]; exact for linear fields.
    """
    g = u.grid
    v = u.values
    comps = []
    for k in range(g.dim):
        comps.append(np.diff(v, axis=k) / g.h[k])
    return VectorField(g, comps)


def _format(x):
    return repr(float(x))


def write_field_csv(field, path):
    """Write a nodal field as CSV, one row per node in row-major order.

    Decimal values use shortest round-trip formatting, so a write/read
    cycle reproduces the values bit for bit.
    """
    g = field.grid
    with open(path, "w") as fh:
        if g.dim == 1:
            fh.write("i,x,value\n")
            x = g.axis_coords(0)
            for i, val in enumerate(field.values):
                fh.write(f"{i},{_format(x[i])},{_format(val)}\n")
        else:
            fh.write("i,j,x,y,value\n")
            x = g.axis_coords(0)
            y = g.axis_coords(1)
            nx, ny = g.node_shape
            vals = field.values
            for i in range(nx):
                xi = _format(x[i])
                for j in range(ny):
                    fh.write(f"{i},{j},{xi},{_format(y[j])},{_format(vals[i, j])}\n")


def read_field_csv(path):
    """Read a field CSV written by write_field_csv, reconstructing the grid."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise FieldFormatError("missing header")
        if header == "i,x,value":
            dim = 1
        elif header == "i,j,x,y,value":
            dim = 2
        else:
            raise FieldFormatError(f"unrecognized header {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header.split(",")):
                raise FieldFormatError(f"malformed row {lineno}: {line!r}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise FieldFormatError(f"unparsable value at row {lineno}") from None
    if not rows:
        raise FieldFormatError("no data rows")
    data = np.asarray(rows)
    for k in range(data.shape[0]):
        if not np.all(np.isfinite(data[k])):
            raise FieldFormatError(f"non-finite value at row {k + 1}")

    if dim == 1:
        idx = data[:, 0].astype(int)
        n = idx.max()
        if data.shape[0] != n + 1 or not np.array_equal(idx, np.arange(n + 1)):
            raise FieldFormatError("row count or node ordering mismatch")
        x = data[:, 1]
        grid = Grid([x[0]], [x[-1]], [n])
        return ScalarField(grid, data[:, 2])

    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    nx, ny = ii.max(), jj.max()
    if data.shape[0] != (nx + 1) * (ny + 1):
        raise FieldFormatError("row count mismatch")
    expect_i = np.repeat(np.arange(nx + 1), ny + 1)
    expect_j = np.tile(np.arange(ny + 1), nx + 1)
    if not (np.array_equal(ii, expect_i) and np.array_equal(jj, expect_j)):
        raise FieldFormatError("rows must be row-major over nodes")
    x = data[:, 2].reshape(nx + 1, ny + 1)
    y = data[:, 3].reshape(nx + 1, ny + 1)
    grid = Grid([x[0, 0], y[0, 0]], [x[-1, 0], y[0, -1]], [nx, ny])
    return ScalarField(grid, data[:, 4].reshape(nx + 1, ny + 1))


class ExponentField:
    """Nodal variable exponent p(x) with its admissibility bounds.

    Construction enforces 1 < p_minus <= p(x) <= p_plus < inf at every
    node and the sampled Lipschitz bound |p(x) - p(y)| <= L |x - y| over
    all pairs of adjacent nodes.
    """

    def __init__(self, grid, p_values, p_minus, p_plus, lipschitz_L):
        p_values = np.asarray(p_values, dtype=float)
        if p_values.shape != grid.node_shape:
            raise ValueError("p_values shape does not match grid")
        if not np.all(np.isfinite(p_values)):
            raise ValueError("exponent values must be finite")
        if not (1.0 < p_minus <= p_plus < np.inf):
            raise ValueError("need 1 < p_minus <= p_plus < inf")
        if lipschitz_L < 0:
            raise ValueError("lipschitz_L must be >= 0")
        tol = 1e-12
        if p_values.min() < p_minus - tol or p_values.max() > p_plus + tol:
            raise ValueError("exponent values violate [p_minus, p_plus] bounds")
        for k in range(grid.dim):
            jumps = np.abs(np.diff(p_values, axis=k))
            if jumps.size and jumps.max() > lipschitz_L * grid.h[k] + tol:
                raise ValueError("sampled Lipschitz bound violated for exponent field")
        self.grid = grid
        self.values = p_values
        self.p_minus = float(p_minus)
        self.p_plus = float(p_plus)
        self.lipschitz_L = float(lipschitz_L)
