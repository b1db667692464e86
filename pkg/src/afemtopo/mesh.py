"""Conforming triangulations with newest-vertex bisection.

Every element is stored as ``[v0, v1, v2]`` in counter-clockwise order,
where ``v0`` is the newest vertex and ``(v1, v2)`` is the refinement edge.
Local edge ``i`` is the edge opposite local vertex ``i``; so local edge 0 is
always the refinement edge.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TAGS = ("inlet", "wall", "outlet")
INTERIOR = -1
INLET, WALL, OUTLET = range(3)

_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


class MeshError(ValueError):
    pass


class GeometryError(MeshError):
    pass


class TaggingError(MeshError):
    pass


class ConsistencyError(MeshError):
    pass


class LineageError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class Lineage:
    """How a mesh was obtained from its parent by one refinement call.

    ``vertex_parents[k]`` holds the endpoints of the parent edge whose
    midpoint became vertex ``parent.n_vertices + k``, in creation order.
    ``element_parent[t]`` is the parent element containing child ``t``.
    """
    parent: "Mesh"
    vertex_parents: np.ndarray
    element_parent: np.ndarray


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    generation: np.ndarray
    lineage: Lineage = None

    def __post_init__(self):
        for name in ("vertices", "elements", "boundary_edges", "boundary_tags", "generation"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if np.any(self.areas <= 0):
            raise GeometryError("element with non-positive area")
        # touch the edge structure so that tagging/conformity errors surface early
        self.edge_tags

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_edges(self):
        return len(self.edges)

    # --- topology ---------------------------------------------------------

    @cached_property
    def _edge_data(self):
        nV = self.n_vertices
        loc = self.elements[:, _LOCAL_EDGES]  # (nT, 3, 2)
        lo = loc.min(axis=2).ravel()
        hi = loc.max(axis=2).ravel()
        keys = lo.astype(np.int64) * nV + hi
        ukeys, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        edges = np.column_stack([ukeys // nV, ukeys % nV])
        elem_edges = inv.reshape(-1, 3)
        counts = np.bincount(inv, minlength=len(ukeys))
        if counts.max() > 2:
            raise ConsistencyError("edge shared by more than two elements")
        edge_elems = -np.ones((len(ukeys), 2), dtype=np.int64)
        # first occurrence becomes T+, the second one T-
        edge_elems[:, 0] = first // 3
        order = np.argsort(inv, kind="stable")
        dup = np.flatnonzero(np.diff(inv[order]) == 0)
        edge_elems[inv[order[dup + 1]], 1] = order[dup + 1] // 3
        return _freeze(edges), _freeze(elem_edges), _freeze(edge_elems), _freeze(keys.reshape(-1, 3))

    @property
    def edges(self):
        """Unique edges as sorted vertex pairs, shape (n_edges, 2)."""
        return self._edge_data[0]

    @property
    def elem_edges(self):
        """Edge id of local edge i (opposite local vertex i), shape (n_elements, 3)."""
        return self._edge_data[1]

    @property
    def edge_elems(self):
        """Incident elements (T+, T-) per edge; T- is -1 on the boundary."""
        return self._edge_data[2]

    @cached_property
    def is_boundary_edge(self):
        return self.edge_elems[:, 1] < 0

    @cached_property
    def edge_tags(self):
        """Boundary tag code per edge, ``INTERIOR`` for interior edges."""
        nV = self.n_vertices
        tags = np.full(self.n_edges, INTERIOR, dtype=np.int64)
        bnd = np.flatnonzero(self.is_boundary_edge)
        be = np.sort(self.boundary_edges, axis=1).astype(np.int64)
        bkeys = be[:, 0] * nV + be[:, 1]
        order = np.argsort(bkeys)
        ekeys = self.edges[bnd, 0].astype(np.int64) * nV + self.edges[bnd, 1]
        pos = np.searchsorted(bkeys[order], ekeys)
        pos = np.minimum(pos, len(bkeys) - 1)
        found = bkeys[order][pos] == ekeys
        if not np.all(found):
            raise TaggingError(f"{np.count_nonzero(~found)} boundary edge(s) without a tag")
        tags[bnd] = self.boundary_tags[order][pos]
        return _freeze(tags)

    # --- geometry ---------------------------------------------------------

    @cached_property
    def areas(self):
        p = self.vertices[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def h_elem(self):
        """Local mesh size |T|^(1/2)."""
        return np.sqrt(self.areas)

    @cached_property
    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def h_edge(self):
        return self.edge_lengths

    @cached_property
    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def grad_lambda(self):
        """Gradients of the barycentric coordinates, shape (n_elements, 3, 2)."""
        p = self.vertices[self.elements]
        g = np.empty((self.n_elements, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = p[:, j, 1] - p[:, k, 1]
            g[:, i, 1] = p[:, k, 0] - p[:, j, 0]
        return g / (2.0 * self.areas)[:, None, None]

    @cached_property
    def edge_normals(self):
        """Unit normals: outward from T+ (hence outward on the boundary)."""
        a = self.vertices[self.edges[:, 0]]
        d = self.vertices[self.edges[:, 1]] - a
        n = np.column_stack([d[:, 1], -d[:, 0]]) / self.edge_lengths[:, None]
        away = a - self.centroids[self.edge_elems[:, 0]]
        flip = np.einsum("ij,ij->i", n, away) < 0
        n[flip] *= -1
        return n

    @property
    def area(self):
        return float(self.areas.sum())

    def min_angle(self):
        """Smallest interior angle over all elements, in radians."""
        p = self.vertices[self.elements]
        out = np.inf
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out = min(out, np.arccos(np.clip(c, -1, 1)).min())
        return float(out)

    def vertex_elements(self):
        """Number of elements sharing each vertex."""
        return np.bincount(self.elements.ravel(), minlength=self.n_vertices)

    def check_conforming(self):
        """Raise ``ConsistencyError`` unless the mesh is a conforming triangulation.

        A hanging node leaves an edge with a single incident element that is
        not on the boundary of the domain, which breaks the Euler relation.
        """
        nB = np.count_nonzero(self.is_boundary_edge)
        if nB != len(self.boundary_edges):
            raise ConsistencyError("boundary edge count does not match tagged boundary")
        # closed boundary curve: each boundary vertex has exactly two boundary edges
        deg = np.bincount(self.edges[self.is_boundary_edge].ravel(), minlength=self.n_vertices)
        if np.any((deg != 0) & (deg != 2)):
            raise ConsistencyError("boundary is not a closed curve")
        if self.n_vertices - self.n_edges + self.n_elements != 1:
            raise ConsistencyError("Euler characteristic differs from a simply connected domain")


def mesh_metrics(mesh):
    """Local sizes, normals and adjacency of ``mesh`` as a dict."""
    return {
        "h_elem": mesh.h_elem,
        "h_edge": mesh.h_edge,
        "normals": mesh.edge_normals,
        "edge_elems": mesh.edge_elems,
        "elem_edges": mesh.elem_edges,
    }


def _label_longest_edge(vertices, elements):
    """Rotate every element so that its longest edge is the refinement edge."""
    p = vertices[elements]
    # squared length of the edge opposite each local vertex
    L = np.stack([np.sum((p[:, (i + 2) % 3] - p[:, (i + 1) % 3]) ** 2, axis=1) for i in range(3)], axis=1)
    # ties broken by the lowest edge id; edge ids follow the sorted vertex pair keys
    nV = len(vertices)
    loc = elements[:, _LOCAL_EDGES]
    keys = loc.min(axis=2).astype(np.int64) * nV + loc.max(axis=2)
    rank = np.unique(keys.ravel(), return_inverse=True)[1].reshape(-1, 3)
    Lr = np.round(L / L.max(axis=1, keepdims=True), 12)
    out = np.empty_like(elements)
    for t in range(len(elements)):
        cand = np.flatnonzero(Lr[t] == Lr[t].max())
        i = cand[np.argmin(rank[t, cand])]
        out[t] = np.roll(elements[t], -i)
    return out


def from_arrays(vertices, elements, boundary_spec, label=True):
    """Build a mesh, orienting elements CCW and tagging the boundary by predicates.

    ``boundary_spec`` is an ordered sequence of ``(tag, predicate)`` pairs; a
    predicate receives the edge midpoint coordinates ``x, y`` as arrays and the
    first matching tag wins.
    """
    vertices = np.asarray(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    p = vertices[elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    elements[neg] = elements[neg][:, [0, 2, 1]]
    if label:
        elements = _label_longest_edge(vertices, elements)
    # boundary edges appear exactly once among element edges
    loc = np.sort(elements[:, _LOCAL_EDGES].reshape(-1, 2), axis=1)
    uniq, counts = np.unique(loc, axis=0, return_counts=True)
    bedges = uniq[counts == 1]
    mid = 0.5 * (vertices[bedges[:, 0]] + vertices[bedges[:, 1]])
    tags = np.full(len(bedges), INTERIOR, dtype=np.int64)
    for tag, pred in boundary_spec:
        code = TAGS.index(tag)
        hit = (tags == INTERIOR) & np.asarray(pred(mid[:, 0], mid[:, 1]), dtype=bool)
        tags[hit] = code
    if np.any(tags == INTERIOR):
        bad = mid[tags == INTERIOR][0]
        raise TaggingError(f"boundary edge at ({bad[0]:.6g}, {bad[1]:.6g}) matches no tag")
    return Mesh(vertices, elements, bedges, tags, np.zeros(len(elements), dtype=np.int64))


def _axis(a0, a1, n, breaks):
    """Grid coordinates on [a0, a1] with n cells, hitting every breakpoint exactly."""
    if breaks is None:
        return np.linspace(a0, a1, n + 1)
    pts = np.unique(np.concatenate([[a0, a1], np.asarray(breaks, float)]))
    pts = pts[(pts >= a0) & (pts <= a1)]
    seg = np.diff(pts)
    if n < len(seg):
        raise GeometryError("fewer cells than breakpoint segments")
    # largest-remainder apportionment of n cells over the segments
    share = seg / seg.sum() * n
    cells = np.maximum(np.floor(share).astype(int), 1)
    while cells.sum() < n:
        cells[np.argmax(share - cells)] += 1
    while cells.sum() > n:
        cells[np.argmax(np.where(cells > 1, cells - share, -np.inf))] -= 1
    xs = [np.linspace(pts[i], pts[i + 1], cells[i] + 1)[:-1] for i in range(len(seg))]
    return np.concatenate(xs + [[a1]])


def build_rect_mesh(extents, nx, ny, boundary_spec, xbreaks=None, ybreaks=None):
    """Structured triangulation of ``[x0, x1] x [y0, y1]``.

    Each grid cell is split into two triangles; the diagonal direction
    alternates in a checkerboard pattern. Optional ``xbreaks``/``ybreaks``
    place grid lines exactly on given coordinates (e.g. the ends of an inlet)
    while keeping ``nx``/``ny`` cells in total.
    """
    (x0, x1), (y0, y1) = extents
    if not (x1 > x0 and y1 > y0):
        raise GeometryError(f"degenerate extents {extents}")
    if nx < 1 or ny < 1:
        raise GeometryError("nx and ny must be at least 1")
    xs = _axis(x0, x1, nx, xbreaks)
    ys = _axis(y0, y1, ny, ybreaks)
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    a, b = idx[j, i], idx[j, i + 1]
    c, d = idx[j + 1, i + 1], idx[j + 1, i]
    flip = (i + j) % 2 == 1
    t1 = np.where(flip[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c]))
    t2 = np.where(flip[:, None], np.column_stack([b, c, d]), np.column_stack([a, c, d]))
    elements = np.empty((2 * len(a), 3), dtype=np.int64)
    elements[0::2] = t1
    elements[1::2] = t2
    return from_arrays(vertices, elements, boundary_spec)


def _closure(mesh, cut, max_sweeps=10_000):
    E = mesh.elem_edges
    for _ in range(max_sweeps):
        need = (cut[E[:, 1]] | cut[E[:, 2]]) & ~cut[E[:, 0]]
        if not need.any():
            return cut
        cut[E[need, 0]] = True
    raise ConsistencyError("refinement closure did not terminate; refinement-edge labels are corrupted")


def _split(mesh, cut):
    """Bisect every element whose refinement edge is cut; the closure must hold."""
    nV, E, el = mesh.n_vertices, mesh.elem_edges, mesh.elements
    ecut = np.flatnonzero(cut)
    mid = -np.ones(mesh.n_edges, dtype=np.int64)
    mid[ecut] = nV + np.arange(len(ecut))
    new_vertices = np.vstack([mesh.vertices, mesh.edge_midpoints[ecut]])

    tid = np.arange(mesh.n_elements)
    gen = mesh.generation
    a, b, c = el[:, 0], el[:, 1], el[:, 2]
    bis = cut[E[:, 0]]
    m = mid[E[:, 0]]

    blocks, parents, gens = [], [], []

    def emit(sel, rows, g):
        blocks.append(np.column_stack(rows)[sel])
        parents.append(tid[sel])
        gens.append(g[sel])

    emit(~bis, [a, b, c], gen)
    # first child [m, a, b] (refinement edge = old local edge 2), second [m, c, a] (old local edge 1)
    s1 = bis & cut[E[:, 2]]
    s2 = bis & cut[E[:, 1]]
    m1, m2 = mid[E[:, 2]], mid[E[:, 1]]
    emit(bis & ~s1, [m, a, b], gen + 1)
    emit(s1, [m1, m, a], gen + 2)
    emit(s1, [m1, b, m], gen + 2)
    emit(bis & ~s2, [m, c, a], gen + 1)
    emit(s2, [m2, m, c], gen + 2)
    emit(s2, [m2, a, m], gen + 2)

    parent = np.concatenate(parents)
    order = np.argsort(parent, kind="stable")
    elements = np.vstack(blocks)[order]
    generation = np.concatenate(gens)[order]

    # boundary edges: split ones are replaced by their halves, which inherit the tag
    be, bt = mesh.boundary_edges, mesh.boundary_tags
    nVold = nV
    key = np.sort(be, axis=1).astype(np.int64)
    ekeys = mesh.edges[:, 0].astype(np.int64) * nVold + mesh.edges[:, 1]
    pos = np.searchsorted(ekeys, key[:, 0] * nVold + key[:, 1])
    bm = mid[pos]
    keep = bm < 0
    halves_a = np.column_stack([key[~keep, 0], bm[~keep]])
    halves_b = np.column_stack([bm[~keep], key[~keep, 1]])
    boundary_edges = np.vstack([key[keep], halves_a, halves_b])
    boundary_tags = np.concatenate([bt[keep], bt[~keep], bt[~keep]])

    lineage = Lineage(mesh, mesh.edges[ecut].copy(), parent[order])
    return Mesh(new_vertices, elements, boundary_edges, boundary_tags, generation, lineage)


def bisect(mesh, marked):
    """Newest-vertex bisection of the marked elements plus conforming closure.

    Every marked element is bisected at least once. Elements that receive a
    midpoint on a non-refinement edge are bisected twice.
    """
    marked = np.asarray(marked, dtype=np.int64).ravel()
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_elements):
        raise ValueError("marked element id out of range")
    cut = np.zeros(mesh.n_edges, dtype=bool)
    cut[mesh.elem_edges[marked, 0]] = True
    return _split(mesh, _closure(mesh, cut))


def uniform_refine(mesh):
    """Split every element into four by bisecting it twice (all edges halved)."""
    return _split(mesh, np.ones(mesh.n_edges, dtype=bool))


def refine_times(mesh, n):
    for _ in range(n):
        mesh = uniform_refine(mesh)
    return mesh
