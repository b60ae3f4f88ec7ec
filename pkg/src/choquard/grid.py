"""Uniform n-D grids with Dirichlet exterior, fields, norms and integrals.

The domain is either a box (coordinates [0, extent_a] per axis) or a ball
(radius min(extent)/2, centered at the origin, embedded in the box
[-extent_a/2, extent_a/2]).  Fields are node arrays that vanish outside the
interior mask, which is the discrete H^1_0 condition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

SHAPE_TAGS = ("ball", "box")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class DomainGrid:
    n: int
    extent: tuple
    m: tuple
    h: tuple
    mask: np.ndarray
    delta: np.ndarray
    shape_tag: str

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axis_coords(self):
        """Per-axis physical node coordinates (1-D arrays)."""
        out = []
        for a in range(self.n):
            if self.shape_tag == "ball":
                # centered form keeps coordinates exactly flip-symmetric
                out.append(self.h[a] * (np.arange(self.m[a]) - (self.m[a] - 1) / 2.0))
            else:
                out.append(self.h[a] * np.arange(self.m[a]))
        return out

    def coord_mesh(self):
        return np.meshgrid(*self.axis_coords(), indexing="ij")

    @property
    def center(self):
        if self.shape_tag == "ball":
            return np.zeros(self.n)
        return np.asarray(self.extent) / 2.0

    @property
    def radius(self) -> float:
        if self.shape_tag != "ball":
            raise GridError("radius only defined for shape_tag='ball'")
        return min(self.extent) / 2.0


def build_grid(shape_tag: str, extent, m) -> DomainGrid:
    """Build a DomainGrid with analytic boundary-distance field."""
    if shape_tag not in SHAPE_TAGS:
        raise GridError(f"unknown shape_tag {shape_tag!r}; expected one of {SHAPE_TAGS}")
    m = tuple(int(v) for v in np.atleast_1d(m))
    n = len(m)
    extent = np.atleast_1d(np.asarray(extent, dtype=float))
    if extent.size == 1:
        extent = np.full(n, float(extent[0]))
    extent = tuple(float(v) for v in extent)
    if len(extent) != n:
        raise GridError("extent and m must have the same length")
    if n <= 2:
        raise GridError(f"dimension n={n} rejected: the problem requires n > 2")
    if any(v < 5 for v in m):
        raise GridError(f"all point counts must be >= 5, got {m}")
    if any(v <= 0 for v in extent):
        raise GridError(f"extents must be positive, got {extent}")

    h = tuple(extent[a] / (m[a] - 1) for a in range(n))

    if shape_tag == "box":
        mesh = np.meshgrid(*[h[a] * np.arange(m[a]) for a in range(n)], indexing="ij")
        dist = np.minimum.reduce(
            [np.minimum(mesh[a], extent[a] - mesh[a]) for a in range(n)]
        )
        interior = np.ones(m, dtype=bool)
        for a in range(n):
            sl = [slice(None)] * n
            sl[a] = 0
            interior[tuple(sl)] = False
            sl[a] = m[a] - 1
            interior[tuple(sl)] = False
        mask = interior
    else:
        radius = min(extent) / 2.0
        mesh = np.meshgrid(
            *[h[a] * (np.arange(m[a]) - (m[a] - 1) / 2.0) for a in range(n)],
            indexing="ij",
        )
        r = np.sqrt(sum(c * c for c in mesh))
        mask = r < radius
        # outermost node layer is never interior even for degenerate extents
        for a in range(n):
            sl = [slice(None)] * n
            sl[a] = 0
            mask[tuple(sl)] = False
            sl[a] = m[a] - 1
            mask[tuple(sl)] = False
        dist = radius - r

    delta = np.where(mask, np.maximum(dist, 0.0), 0.0)
    return DomainGrid(n=n, extent=extent, m=m, h=h, mask=mask, delta=delta,
                      shape_tag=shape_tag)


@dataclass
class Field:
    grid: DomainGrid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.m:
            raise GridError(f"field shape {v.shape} does not match grid {self.grid.m}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        self.values = np.where(self.grid.mask, v, 0.0)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __mul__(self, s: float) -> "Field":
        return Field(self.grid, self.values * float(s))

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)


def zeros_field(grid: DomainGrid) -> Field:
    return Field(grid, np.zeros(grid.m))


def _check_same_grid(u: Field, w: Field):
    if u.grid is not w.grid and (u.grid.m != w.grid.m or u.grid.extent != w.grid.extent
                                 or u.grid.shape_tag != w.grid.shape_tag):
        raise GridError("fields live on different grids")


def h1_seminorm_sq(u: Field) -> float:
    """Discrete integral of |grad u|^2 over forward-difference edges.

    Edges crossing into the exterior see the value 0 there; those are the
    edges between the outermost interior layer and the array border, which
    np.diff captures because border nodes are unmasked (hence zero).
    """
    g = u.grid
    total = 0.0
    for a in range(g.n):
        d = np.diff(u.values, axis=a) / g.h[a]
        total += float(np.sum(d * d))
    return total * g.cell_volume


def grad_inner(u: Field, w: Field) -> float:
    """Symmetric bilinear form matching h1_seminorm_sq on the diagonal."""
    _check_same_grid(u, w)
    g = u.grid
    total = 0.0
    for a in range(g.n):
        du = np.diff(u.values, axis=a)
        dw = np.diff(w.values, axis=a)
        total += float(np.sum(du * dw)) / (g.h[a] * g.h[a])
    return total * g.cell_volume


def lp_integral(u: Field, p: float) -> float:
    """Midpoint sum of |u|^p over masked nodes."""
    if p <= 0:
        raise GridError(f"exponent p must be positive, got {p}")
    v = np.abs(u.values[u.grid.mask])
    return float(np.sum(v ** p)) * u.grid.cell_volume


def neg_laplacian(u: Field) -> np.ndarray:
    """Apply the 2n+1-point -Laplacian matched to the forward-difference
    seminorm; zero exterior, so grad_inner(u, w) == sum((-lap u) w) * h^n
    exactly for fields vanishing outside the mask."""
    g = u.grid
    v = np.pad(u.values, 1)
    core = (slice(1, -1),) * g.n
    out = np.zeros(g.m)
    for a in range(g.n):
        lo = list(core)
        hi = list(core)
        lo[a] = slice(0, -2)
        hi[a] = slice(2, None)
        out += (2.0 * u.values - v[tuple(lo)] - v[tuple(hi)]) / (g.h[a] * g.h[a])
    return np.where(g.mask, out, 0.0)


def stiffness_matrix(grid: DomainGrid):
    """Sparse -Laplacian over masked nodes (no cell-volume factor)."""
    import scipy.sparse as sp

    idx = -np.ones(grid.m, dtype=np.int64)
    flat_mask = grid.mask
    nmask = int(flat_mask.sum())
    idx[flat_mask] = np.arange(nmask)
    diag = np.full(nmask, sum(2.0 / (ha * ha) for ha in grid.h))
    rows, cols, vals = [], [], []
    for a in range(grid.n):
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        both = flat_mask[tuple(lo)] & flat_mask[tuple(hi)]
        i = idx[tuple(lo)][both]
        j = idx[tuple(hi)][both]
        w = -1.0 / (grid.h[a] * grid.h[a])
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([np.full(i.size, w), np.full(i.size, w)])
    rows.append(np.arange(nmask))
    cols.append(np.arange(nmask))
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nmask, nmask),
    )
    return A, idx


def random_field(grid: DomainGrid, rng: np.random.Generator, positive: bool = True,
                 smooth: int = 2) -> Field:
    """Random bump-like field: noise shaped by the distance field, with a few
    Jacobi smoothing sweeps so it is grid-resolved."""
    vals = rng.random(grid.m)
    if not positive:
        vals = 2.0 * vals - 1.0
    vals = vals * grid.delta
    for _ in range(smooth):
        padded = np.pad(vals, 1)
        acc = np.zeros(grid.m)
        for a in range(grid.n):
            core = [slice(1, -1)] * grid.n
            core[a] = slice(0, -2)
            acc += padded[tuple(core)]
            core[a] = slice(2, None)
            acc += padded[tuple(core)]
        vals = (vals + acc / (2 * grid.n)) / 2.0
    return Field(grid, np.where(grid.mask, vals, 0.0))


def field_csv_rows(u: Field):
    """Lexicographic node rows: index tuple, coordinates, value."""
    g = u.grid
    axes = g.axis_coords()
    for multi in np.ndindex(*g.m):
        coords = [axes[a][multi[a]] for a in range(g.n)]
        yield list(multi) + [f"{c:.17g}" for c in coords] + [f"{u.values[multi]:.17g}"]


def write_field_csv(u: Field, path):
    g = u.grid
    index_names = ["i", "j", "k"][: g.n] if g.n <= 3 else [f"i{a}" for a in range(g.n)]
    coord_names = ["x", "y", "z"][: g.n] if g.n <= 3 else [f"x{a}" for a in range(g.n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(index_names + coord_names + ["value"])
        for row in field_csv_rows(u):
            writer.writerow(row)


def read_field_csv(grid: DomainGrid, path) -> Field:
    vals = np.zeros(grid.m)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            multi = tuple(int(v) for v in row[: grid.n])
            vals[multi] = float(row[-1])
    return Field(grid, vals)
