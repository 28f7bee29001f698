"""Structured quadrilateral meshes of the unit square and edge topology.

Two families: trapezoidal meshes controlled by a slope parameter theta
(rectangles at theta = 0, degenerating to triangles as theta -> 1), and
randomly perturbed grids.  Cells follow the vertex convention of
:mod:`quadnc.geometry` (counterclockwise from the top-right corner), so
local edge j of a cell carries local midpoint j of the reference square.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParam, ConvexityFailure, NonManifold
from .geometry import decompose_cells

# Local vertex pairs of cell edges e1..e4 (e_j joins v_{j-1}, v_j).
CELL_EDGE_VERTS = np.array([[3, 0], [0, 1], [1, 2], [2, 3]])


@dataclass
class Mesh:
    nodes: np.ndarray          # (nn, 2)
    cells: np.ndarray          # (nc, 4) node indices, convention order
    edges: np.ndarray          # (ne, 2) node indices, a < b
    edge_midpoints: np.ndarray  # (ne, 2)
    edge_boundary: np.ndarray  # (ne,) bool
    cell_edges: np.ndarray     # (nc, 4) edge indices, local order e1..e4
    cell_edge_sign: np.ndarray = field(default=None)  # +1 if local direction matches stored pair

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_interior_edges(self):
        return int(np.count_nonzero(~self.edge_boundary))

    def cell_vertices(self):
        """(nc, 4, 2) vertex coordinates per cell."""
        return self.nodes[self.cells]

    @property
    def h(self):
        """Mesh size: maximum cell diameter."""
        v = self.cell_vertices()
        diff = v[:, :, None, :] - v[:, None, :, :]
        return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def build_topology(nodes, cells):
    """Assemble a Mesh from nodes and cell connectivity.

    Edges are deduplicated via sorted node pairs; an edge is boundary
    iff it has exactly one incident cell.

    Raises
    ------
    NonManifold
        If some edge has more than two incident cells.
    """
    nodes = np.ascontiguousarray(np.asarray(nodes, dtype=float))
    cells = np.ascontiguousarray(np.asarray(cells, dtype=np.int64))
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise ValueError(f"cells must be (nc, 4), got {cells.shape}")
    if cells.size and (cells.min() < 0 or cells.max() >= len(nodes)):
        raise ValueError("cell connectivity indexes nonexistent nodes")

    raw = cells[:, CELL_EDGE_VERTS]              # (nc, 4, 2)
    flat = raw.reshape(-1, 2)
    swap = flat[:, 0] > flat[:, 1]
    key = flat.copy()
    key[swap] = key[swap][:, ::-1]
    edges, inverse, counts = np.unique(
        key, axis=0, return_inverse=True, return_counts=True
    )
    if np.any(counts > 2):
        raise NonManifold(
            f"{int((counts > 2).sum())} edge(s) shared by more than two cells"
        )
    cell_edges = inverse.reshape(-1, 4)
    sign = np.where(swap, -1, 1).astype(np.int8).reshape(-1, 4)
    midpoints = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    boundary = counts == 1
    return Mesh(
        nodes=nodes,
        cells=cells,
        edges=edges,
        edge_midpoints=midpoints,
        edge_boundary=boundary,
        cell_edges=cell_edges,
        cell_edge_sign=sign,
    )


def _grid_cells(n):
    """Cell connectivity of an (n+1)x(n+1) node grid, convention order."""
    idx = lambda i, j: j * (n + 1) + i
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i = i.ravel(order="F")
    j = j.ravel(order="F")
    return np.column_stack(
        (idx(i + 1, j + 1), idx(i, j + 1), idx(i, j), idx(i + 1, j))
    )


def theta_mesh(n, theta):
    """Uniform trapezoidal mesh of (0,1)^2.

    Grid nodes (i/n, j/n) with the interior rows 0 < j < n shifted
    vertically by (-1)^(i+j) * theta / (2n).  Every interior cell is a
    trapezoid with vertical parallel sides of lengths (1 -+ theta)/n; at
    theta = 0 all cells are squares, and as theta -> 1 the short side
    shrinks to a point.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise BadParam(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 <= theta < 1.0:
        raise BadParam(f"theta must lie in [0, 1), got {theta!r}")
    n = int(n)
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    x = i / n
    y = j / n
    interior_row = (j > 0) & (j < n)
    offset = np.where(interior_row, (-1.0) ** (i + j) * theta / (2 * n), 0.0)
    nodes = np.column_stack(
        ((x.ravel(order="F")), (y + offset).ravel(order="F"))
    )
    return build_topology(nodes, _grid_cells(n))


def random_mesh(n, alpha=0.25, seed=1):
    """Randomly perturbed n x n grid of (0,1)^2.

    Each interior node is displaced by an independent uniform sample in
    [-alpha/n, alpha/n]^2; boundary nodes stay fixed.  Deterministic for
    a fixed seed.  Nodes of any non-convex cell are re-drawn, up to 100
    rounds.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise BadParam(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 <= alpha < 0.5:
        raise BadParam(f"alpha must lie in [0, 0.5), got {alpha!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    base = np.column_stack((i.ravel(order="F") / n, j.ravel(order="F") / n))
    interior = (
        (i.ravel(order="F") > 0)
        & (i.ravel(order="F") < n)
        & (j.ravel(order="F") > 0)
        & (j.ravel(order="F") < n)
    )
    nodes = base.copy()
    nodes[interior] += rng.uniform(-alpha / n, alpha / n, size=(interior.sum(), 2))
    cells = _grid_cells(n)

    for _ in range(100):
        bad_nodes = _nonconvex_nodes(nodes, cells, interior)
        if bad_nodes.size == 0:
            mesh = build_topology(nodes, cells)
            return mesh
        nodes[bad_nodes] = base[bad_nodes] + rng.uniform(
            -alpha / n, alpha / n, size=(bad_nodes.size, 2)
        )
    raise ConvexityFailure(
        f"could not produce an all-convex mesh (n={n}, alpha={alpha}, seed={seed})"
    )


def _nonconvex_nodes(nodes, cells, interior):
    """Interior node indices belonging to non-convex or inverted cells."""
    v = nodes[cells]
    # Cross products of consecutive edge vectors; all must be positive
    # for a strictly convex counterclockwise cell.
    rolled = np.roll(v, -1, axis=1)
    e = rolled - v
    e_next = np.roll(e, -1, axis=1)
    cross = e[:, :, 0] * e_next[:, :, 1] - e[:, :, 1] * e_next[:, :, 0]
    bad_cells = np.any(cross <= 0.0, axis=1)
    if not np.any(bad_cells):
        return np.empty(0, dtype=np.int64)
    cand = np.unique(cells[bad_cells])
    return cand[interior[cand]]


def mesh_stats(mesh):
    """Per-cell decomposition arrays (A, b, d, s, detA) for diagnostics."""
    return decompose_cells(mesh.cell_vertices())


def save_mesh(mesh, path):
    """Write the plain-text format: header, node lines, cell lines."""
    with open(path, "w") as fh:
        fh.write(f"quadmesh v1 {mesh.n_nodes} {mesh.n_cells}\n")
        for x, y in mesh.nodes:
            fh.write(f"n {x:.17g} {y:.17g}\n")
        for c in mesh.cells:
            fh.write(f"c {c[0]} {c[1]} {c[2]} {c[3]}\n")


def load_mesh(path):
    """Read the plain-text format written by :func:`save_mesh`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "quadmesh" or header[1] != "v1":
            raise ValueError(f"not a quadmesh v1 file: {path}")
        nn, nc = int(header[2]), int(header[3])
        nodes = np.empty((nn, 2))
        cells = np.empty((nc, 4), dtype=np.int64)
        for k in range(nn):
            parts = fh.readline().split()
            if parts[0] != "n":
                raise ValueError(f"expected node line {k}, got {parts!r}")
            nodes[k] = float(parts[1]), float(parts[2])
        for k in range(nc):
            parts = fh.readline().split()
            if parts[0] != "c":
                raise ValueError(f"expected cell line {k}, got {parts!r}")
            cells[k] = [int(p) for p in parts[1:5]]
    return build_topology(nodes, cells)
