"""Triangulations of polygonal 2D domains and 1D intervals.

Meshes are lightweight immutable containers: node coordinates, element
connectivity and marked boundary edges.  Only structured meshes of the
unit square / unit interval are generated here; arbitrary node/element
data can still be passed to the ``Mesh`` constructor directly.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Mesh:
    """Triangulation with marked boundary.

    Attributes
    ----------
    nodes : (n, 2) float array
        Node coordinates.  For 1D meshes the second coordinate is 0.
    elements : (m, 3) or (m, 2) int array
        Node indices per element, counter-clockwise (left-to-right in 1D).
    boundary_edges : (nb, 2) int array
        Node index pairs of boundary edges, oriented counter-clockwise
        around the domain.  1D boundary "edges" are degenerate pairs
        (i, i) marking the two endpoints.
    boundary_markers : (nb,) str array
        One of ``DIRICHLET`` / ``NEUMANN`` per boundary edge.
    dim : int
        Spatial dimension, 1 or 2.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    dim: int
    check_orientation: InitVar[bool] = True

    def __post_init__(self, check_orientation):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        elements = np.ascontiguousarray(np.asarray(self.elements, dtype=np.int64))
        bedges = np.ascontiguousarray(np.asarray(self.boundary_edges, dtype=np.int64))
        markers = np.asarray(self.boundary_markers)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_edges", bedges)
        object.__setattr__(self, "boundary_markers", markers)
        self._validate(check_orientation)
        for arr in (nodes, elements, bedges, markers):
            arr.flags.writeable = False

    def _validate(self, check_orientation=True):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = len(self.nodes)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (n, 2)")
        want_cols = 3 if self.dim == 2 else 2
        if self.elements.ndim != 2 or self.elements.shape[1] != want_cols:
            raise ValueError(f"elements must have shape (m, {want_cols})")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            raise ValueError("element node index out of range")
        if self.boundary_edges.size and (
            self.boundary_edges.min() < 0 or self.boundary_edges.max() >= n
        ):
            raise ValueError("boundary edge node index out of range")
        if len(self.boundary_edges) != len(self.boundary_markers):
            raise ValueError("one marker per boundary edge required")
        bad = set(self.boundary_markers) - {DIRICHLET, NEUMANN}
        if bad:
            raise ValueError(f"unknown boundary markers: {sorted(bad)}")
        if check_orientation:
            areas = signed_areas(self)
            if np.any(areas <= 0.0):
                raise ValueError("every element must have positive signed area")
        self._check_boundary_incidence()

    def _check_boundary_incidence(self):
        # each boundary edge must be an (undirected) edge of exactly one element
        counts: dict[tuple[int, int], int] = {}
        if self.dim == 2:
            for tri in self.elements:
                for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                    key = (min(a, b), max(a, b))
                    counts[key] = counts.get(key, 0) + 1
            for a, b in self.boundary_edges:
                c = counts.get((min(a, b), max(a, b)), 0)
                if c != 1:
                    raise ValueError(
                        f"boundary edge ({a}, {b}) belongs to {c} elements, expected 1"
                    )
        else:
            for a, b in self.boundary_edges:
                if a != b:
                    raise ValueError("1D boundary entities are single nodes (i, i)")
                c = int(np.sum(self.elements == a))
                if c != 1:
                    raise ValueError(f"1D boundary node {a} belongs to {c} elements")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def dirichlet_nodes(self) -> np.ndarray:
        """Indices of nodes lying on at least one Dirichlet edge, sorted."""
        mask = self.boundary_markers == DIRICHLET
        return np.unique(self.boundary_edges[mask])

    def neumann_nodes(self) -> np.ndarray:
        """Indices of nodes lying on at least one Neumann edge, sorted."""
        mask = self.boundary_markers == NEUMANN
        return np.unique(self.boundary_edges[mask])


@dataclass(frozen=True)
class QualityReport:
    """Element-quality summary of a mesh.

    ``min_element_area <= 0`` flags inverted elements (reported, never
    raised, so that deformed meshes can still be inspected).
    """

    min_angle: float
    max_aspect_ratio: float
    min_element_area: float
    quasi_uniformity: float


def signed_areas(mesh: Mesh) -> np.ndarray:
    """Signed element areas (lengths in 1D), positive for valid meshes."""
    pts = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        return pts[:, 1, 0] - pts[:, 0, 0]
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def unit_square(k: int, free_boundary=()) -> Mesh:
    """Regular triangulation of [0, 1]^2 with (k+1)^2 nodes and 2 k^2 triangles.

    Each grid cell is split along the diagonal from its lower-left to its
    upper-right corner.  Edges on the sides named in ``free_boundary``
    (subset of {"left", "right", "top", "bottom"}) are marked Neumann, all
    other boundary edges Dirichlet.  Nodes where the two regions meet end
    up Dirichlet because they lie on a Dirichlet edge, which pins the
    endpoints of the free boundary.

    Parameters
    ----------
    k : int
        Number of cells per side, >= 1.
    free_boundary : iterable of str
        Side names to mark Neumann.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    free = set(free_boundary)
    unknown = free - set(_SIDES)
    if unknown:
        raise ValueError(f"unknown side names: {sorted(unknown)}")

    xs = np.linspace(0.0, 1.0, k + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def idx(ix, iy):
        return iy * (k + 1) + ix

    elements = np.empty((2 * k * k, 3), dtype=np.int64)
    e = 0
    for iy in range(k):
        for ix in range(k):
            ll = idx(ix, iy)
            lr = idx(ix + 1, iy)
            ul = idx(ix, iy + 1)
            ur = idx(ix + 1, iy + 1)
            elements[e] = (ll, lr, ur)
            elements[e + 1] = (ll, ur, ul)
            e += 2

    edges = []
    markers = []

    def add_side(name, pairs):
        marker = NEUMANN if name in free else DIRICHLET
        for a, b in pairs:
            edges.append((a, b))
            markers.append(marker)

    # counter-clockwise orientation around the square
    add_side("bottom", [(idx(i, 0), idx(i + 1, 0)) for i in range(k)])
    add_side("right", [(idx(k, i), idx(k, i + 1)) for i in range(k)])
    add_side("top", [(idx(k - i, k), idx(k - i - 1, k)) for i in range(k)])
    add_side("left", [(idx(0, k - i), idx(0, k - i - 1)) for i in range(k)])

    return Mesh(
        nodes=nodes,
        elements=elements,
        boundary_edges=np.array(edges, dtype=np.int64),
        boundary_markers=np.array(markers),
        dim=2,
    )


def unit_interval(k: int) -> Mesh:
    """1D mesh of [0, 1] with k+1 nodes, k segments, Dirichlet endpoints."""
    if k < 1:
        raise ValueError("k must be >= 1")
    xs = np.linspace(0.0, 1.0, k + 1)
    nodes = np.column_stack([xs, np.zeros(k + 1)])
    elements = np.column_stack([np.arange(k), np.arange(1, k + 1)])
    edges = np.array([[0, 0], [k, k]], dtype=np.int64)
    markers = np.array([DIRICHLET, DIRICHLET])
    return Mesh(nodes, elements, edges, markers, dim=1)


def with_nodes(mesh: Mesh, new_nodes: np.ndarray) -> Mesh:
    """Same connectivity and markers with moved nodes.

    Skips the orientation check so that deformed meshes with inverted
    elements can still be inspected and exported.
    """
    return Mesh(
        nodes=new_nodes,
        elements=mesh.elements,
        boundary_edges=mesh.boundary_edges,
        boundary_markers=mesh.boundary_markers,
        dim=mesh.dim,
        check_orientation=False,
    )


def _edge_vectors(mesh: Mesh):
    pts = mesh.nodes[mesh.elements]
    # edge vectors opposite to local vertices 0, 1, 2
    return pts[:, 2] - pts[:, 1], pts[:, 0] - pts[:, 2], pts[:, 1] - pts[:, 0]


def element_min_angles(mesh: Mesh) -> np.ndarray:
    """Smallest interior angle (degrees) of each triangle."""
    if mesh.dim != 2:
        return np.full(mesh.n_elements, 180.0)
    e0, e1, e2 = _edge_vectors(mesh)

    def angle(u, v):
        c = -np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))

    return np.min(np.column_stack([angle(e1, e2), angle(e2, e0), angle(e0, e1)]), axis=1)


def quality(mesh: Mesh) -> QualityReport:
    """Compute a QualityReport over all elements.

    1D meshes get the degenerate report (min_angle 180, aspect 1).
    Angles of inverted triangles are still well defined; inversion is
    flagged through ``min_element_area <= 0``.
    """
    areas = np.asarray(signed_areas(mesh))
    if mesh.dim == 1:
        lengths = np.abs(areas)
        qu = float(lengths.max() / lengths.min())
        return QualityReport(180.0, 1.0, float(areas.min()), qu)

    e0, e1, e2 = _edge_vectors(mesh)
    lengths = np.column_stack(
        [np.linalg.norm(e, axis=1) for e in (e0, e1, e2)]
    )
    min_angle = float(element_min_angles(mesh).min())
    aspect = float(np.max(lengths.max(axis=1) / lengths.min(axis=1)))
    diam = lengths.max(axis=1)
    qu = float(diam.max() / diam.min())
    return QualityReport(min_angle, aspect, float(areas.min()), qu)


def export_vtk(mesh: Mesh, fields, path) -> None:
    """Write mesh and fields as a legacy ASCII VTK unstructured grid.

    ``fields`` maps names to arrays; an array of length n_nodes becomes
    POINT_DATA, one of length n_elements CELL_DATA.  2D vectors are padded
    with a zero third component (VTK stores 3-vectors).  Output bytes are
    deterministic for fixed input.
    """
    n = mesh.n_nodes
    m = mesh.n_elements
    point_fields = {}
    cell_fields = {}
    for name, values in (fields or {}).items():
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if len(arr) == n:
            point_fields[name] = arr
        elif len(arr) == m:
            cell_fields[name] = arr
        else:
            raise ValueError(
                f"field {name!r} has length {len(arr)}, expected {n} (nodal) or {m} (element)"
            )

    lines = []
    lines.append("# vtk DataFile Version 3.0")
    lines.append("plaplace export")
    lines.append("ASCII")
    lines.append("DATASET UNSTRUCTURED_GRID")
    lines.append(f"POINTS {n} double")
    for x, y in mesh.nodes:
        lines.append(f"{x:.16g} {y:.16g} 0")
    nper = mesh.elements.shape[1]
    lines.append(f"CELLS {m} {m * (nper + 1)}")
    for elem in mesh.elements:
        lines.append(f"{nper} " + " ".join(str(int(i)) for i in elem))
    lines.append(f"CELL_TYPES {m}")
    cell_type = 5 if mesh.dim == 2 else 3
    lines.extend([str(cell_type)] * m)

    def emit(section, count, data):
        lines.append(f"{section} {count}")
        for name, arr in sorted(data.items()):
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in arr:
                    lines.append(f"{v:.16g}")
            else:
                if arr.shape[1] == 2:
                    arr = np.column_stack([arr, np.zeros(len(arr))])
                if arr.shape[1] != 3:
                    raise ValueError(f"vector field {name!r} must have 2 or 3 components")
                lines.append(f"VECTORS {name} double")
                for row in arr:
                    lines.append(" ".join(f"{v:.16g}" for v in row))

    if point_fields:
        emit("POINT_DATA", n, point_fields)
    if cell_fields:
        emit("CELL_DATA", m, cell_fields)

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
