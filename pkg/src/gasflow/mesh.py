"""Structured 1D/2D meshes, Q1 graph assembly, and boundary geometry.

The hyperbolic scheme consumes the mesh only through graph quantities on the
node-adjacency sparsity: lumped masses ``m_i``, consistent masses ``m_ij``,
gradient couplings ``c_ij = int phi_i grad(phi_j)``, their unit directions,
and the approximate-mass-inverse coefficients ``b_ij = delta_ij - m_ij/m_j``.
Cells are linear segments (1D) and isoparametric bilinear quadrilaterals (2D),
integrated with a 3^d-point Gauss rule so all products are exact even on
non-affine cells; the conservation identities asserted in the test suite rely
on that exactness.

Periodicity is realised by node identification at build time.  Cell and face
geometry keeps per-corner coordinate offsets so that identified nodes still
describe the geometrically correct (unwrapped) element.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MeshError

__all__ = [
    "Mesh",
    "FemGraph",
    "BoundaryMap",
    "BoundaryCondition",
    "build_structured_mesh",
    "assemble_graph",
    "compute_b_matrix",
    "assemble_boundary_map",
    "write_vtk",
]

_SIDES_1D = ("left", "right")
_SIDES_2D = ("left", "right", "bottom", "top")

# Reference element: [-1,1]^d, corners in VTK order.
_CORners = None


def _gauss(n):
    return np.polynomial.legendre.leggauss(n)


def _shape_1d(xi):
    xi = np.asarray(xi)
    vals = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0], axis=-1)
    grads = np.stack(
        [np.full_like(xi, -0.5), np.full_like(xi, 0.5)], axis=-1
    )[..., None]
    return vals, grads  # (nq, 2), (nq, 2, 1)


def _shape_2d(xi, eta):
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    one = np.ones_like(xi)
    n = np.stack(
        [
            (1 - xi) * (1 - eta) / 4,
            (1 + xi) * (1 - eta) / 4,
            (1 + xi) * (1 + eta) / 4,
            (1 - xi) * (1 + eta) / 4,
        ],
        axis=-1,
    )
    dxi = np.stack([-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4], axis=-1)
    deta = np.stack([-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4], axis=-1)
    grads = np.stack([dxi, deta], axis=-1)
    _ = one
    return n, grads  # (nq, 4), (nq, 4, 2)


def reference_quadrature(dim, npts=3):
    """Tensor Gauss rule on [-1,1]^dim with shape values/gradients per point."""
    x, w = _gauss(npts)
    if dim == 1:
        vals, grads = _shape_1d(x)
        return x[:, None], w, vals, grads
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    ww = np.outer(w, w).ravel()
    vals, grads = _shape_2d(pts[:, 0], pts[:, 1])
    return pts, ww, vals, grads


@dataclass
class Mesh:
    """Structured tensor-product mesh with optional periodic identification."""

    dim: int
    coords: np.ndarray  # (n, d) unique node coordinates
    cells: np.ndarray  # (nc, 2^d) unique node ids, VTK corner order
    cell_offsets: np.ndarray  # (nc, 2^d, d) geometric offset per corner
    face_nodes: np.ndarray  # (nf, 2^(d-1)) unique node ids
    face_offsets: np.ndarray  # (nf, 2^(d-1), d)
    face_tags: np.ndarray  # (nf,) int
    tag_names: dict  # id -> str
    periodic: tuple
    cells_per_dim: tuple
    extents: tuple

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def cell_coords(self):
        return self.coords[self.cells] + self.cell_offsets

    def face_coords(self):
        return self.coords[self.face_nodes] + self.face_offsets

    def tag_id(self, name):
        for tid, tname in self.tag_names.items():
            if tname == name:
                return tid
        raise ConfigError(f"unknown boundary tag {name!r}; available: {sorted(self.tag_names.values())}")

    def face_normals_and_measures(self):
        """Outward unit normal and measure per boundary face.

        2D faces are straight edges ordered so that rotating the tangent by
        -90 degrees gives the outward normal; 1D faces carry measure one.
        """
        fc = self.face_coords()
        if self.dim == 1:
            # Sign stored via tag construction: left faces point -x.
            normals = np.where(
                np.isclose(fc[:, 0, 0], self.extents[0][0]), -1.0, 1.0
            )[:, None]
            return normals, np.ones(len(fc))
        t = fc[:, 1, :] - fc[:, 0, :]
        length = np.linalg.norm(t, axis=1)
        normals = np.stack([t[:, 1], -t[:, 0]], axis=-1) / length[:, None]
        return normals, length


def build_structured_mesh(dim, extents, cells_per_dim, periodic=None, tag_rules=None):
    """Tensor-product mesh of segments (1D) or quadrilaterals (2D).

    ``tag_rules`` maps side names (left/right/bottom/top) to boundary tag
    names; sides omitted keep their own name, and several sides may share a
    tag.  Periodic directions must not appear in the rules.
    """
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    cells_per_dim = tuple(int(c) for c in np.atleast_1d(cells_per_dim))
    if len(cells_per_dim) != dim or any(c < 1 for c in cells_per_dim):
        raise ConfigError(f"need {dim} positive cell counts, got {cells_per_dim}")
    extents = tuple((float(a), float(b)) for a, b in np.reshape(extents, (dim, 2)))
    if any(b <= a for a, b in extents):
        raise ConfigError(f"degenerate extents {extents}")
    periodic = tuple(bool(p) for p in (periodic or (False,) * dim))
    sides = _SIDES_1D if dim == 1 else _SIDES_2D
    side_axis = {"left": 0, "right": 0, "bottom": 1, "top": 1}
    tag_rules = dict(tag_rules or {})
    for side in tag_rules:
        if side not in sides:
            raise ConfigError(f"unknown side {side!r} in tag rules")
        if periodic[side_axis[side]]:
            raise ConfigError(f"side {side!r} is periodic and cannot carry a boundary tag")
    side_tag = {s: tag_rules.get(s, s) for s in sides if not periodic[side_axis[s]]}
    names = []
    for s in sides:
        t = side_tag.get(s)
        if t is not None and t not in names:
            names.append(t)
    tag_names = dict(enumerate(names))
    tag_of = {v: k for k, v in tag_names.items()}

    if dim == 1:
        (nx,) = cells_per_dim
        (x0, x1) = extents[0]
        ux = nx if periodic[0] else nx + 1
        xs = np.linspace(x0, x1, nx + 1)
        coords = xs[:ux, None].copy()
        period = x1 - x0

        def uid(ix):
            return ix % ux

        cells = np.empty((nx, 2), dtype=np.int64)
        offs = np.zeros((nx, 2, 1))
        for c in range(nx):
            for a, ix in enumerate((c, c + 1)):
                cells[c, a] = uid(ix)
                offs[c, a, 0] = (ix // ux) * period if periodic[0] else 0.0
        faces, foffs, ftags = [], [], []
        if not periodic[0]:
            faces = [[uid(0)], [uid(nx)]]
            foffs = [[[0.0]], [[0.0]]]
            ftags = [tag_of[side_tag["left"]], tag_of[side_tag["right"]]]
        return Mesh(
            dim=1,
            coords=coords,
            cells=cells,
            cell_offsets=offs,
            face_nodes=np.asarray(faces, dtype=np.int64).reshape(-1, 1),
            face_offsets=np.asarray(foffs, dtype=float).reshape(-1, 1, 1),
            face_tags=np.asarray(ftags, dtype=np.int64),
            tag_names=tag_names,
            periodic=periodic,
            cells_per_dim=cells_per_dim,
            extents=extents,
        )

    nx, ny = cells_per_dim
    (x0, x1), (y0, y1) = extents
    ux = nx if periodic[0] else nx + 1
    uy = ny if periodic[1] else ny + 1
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs[:ux], ys[:uy], indexing="xy")
    coords = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    px, py = x1 - x0, y1 - y0

    def uid(ix, iy):
        return (iy % uy) * ux + (ix % ux)

    def off(ix, iy):
        ox = (ix // ux) * px if periodic[0] else 0.0
        oy = (iy // uy) * py if periodic[1] else 0.0
        return (ox, oy)

    nc = nx * ny
    cells = np.empty((nc, 4), dtype=np.int64)
    offs = np.zeros((nc, 4, 2))
    c = 0
    for cy in range(ny):
        for cx in range(nx):
            corners = ((cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1))
            for a, (ix, iy) in enumerate(corners):
                cells[c, a] = uid(ix, iy)
                offs[c, a] = off(ix, iy)
            c += 1

    faces, foffs, ftags = [], [], []

    def add_face(n0, n1, tag):
        faces.append([uid(*n0), uid(*n1)])
        foffs.append([off(*n0), off(*n1)])
        ftags.append(tag_of[tag])

    if not periodic[1]:
        for cx in range(nx):  # bottom: +x tangent, outward (0,-1)
            add_face((cx, 0), (cx + 1, 0), side_tag["bottom"])
        for cx in range(nx):  # top: -x tangent, outward (0,+1)
            add_face((cx + 1, ny), (cx, ny), side_tag["top"])
    if not periodic[0]:
        for cy in range(ny):  # right: +y tangent, outward (+1,0)
            add_face((nx, cy), (nx, cy + 1), side_tag["right"])
        for cy in range(ny):  # left: -y tangent, outward (-1,0)
            add_face((0, cy + 1), (0, cy), side_tag["left"])

    return Mesh(
        dim=2,
        coords=coords,
        cells=cells,
        cell_offsets=offs,
        face_nodes=np.asarray(faces, dtype=np.int64).reshape(-1, 2),
        face_offsets=np.asarray(foffs, dtype=float).reshape(-1, 2, 2),
        face_tags=np.asarray(ftags, dtype=np.int64),
        tag_names=tag_names,
        periodic=periodic,
        cells_per_dim=cells_per_dim,
        extents=extents,
    )


@dataclass
class FemGraph:
    """Assembled graph quantities on the node-adjacency CSR sparsity."""

    dim: int
    indptr: np.ndarray  # (n+1,) int32
    indices: np.ndarray  # (nnz,) int32, sorted per row, diagonal included
    m: np.ndarray  # (n,) lumped mass
    mij: np.ndarray  # (nnz,) consistent mass entries
    cij: np.ndarray  # (nnz, d)
    cnorm: np.ndarray  # (nnz,)
    nij: np.ndarray  # (nnz, d) unit directions, zero rows where cnorm == 0
    bij: np.ndarray = None  # (nnz,) filled by compute_b_matrix
    diag_pos: np.ndarray = None  # (n,) slot of (i,i)
    tpos: np.ndarray = None  # (nnz,) slot of the transposed entry
    is_boundary: np.ndarray = None  # (n,) bool
    lam: np.ndarray = None  # (n,) 1/(card(I(i)) - 1)
    cell_slots: np.ndarray = None  # (nc, nloc, nloc) int32, assembly scatter map
    _scipy_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return len(self.m)

    @property
    def nnz(self):
        return len(self.indices)

    def row(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def to_scipy(self, values):
        """CSR matrix over the graph sparsity for the given per-slot values."""
        from scipy.sparse import csr_matrix

        n = self.n_nodes
        return csr_matrix((np.asarray(values, dtype=float), self.indices, self.indptr), shape=(n, n))

    def c_component_matrix(self, k):
        key = ("c", k)
        if key not in self._scipy_cache:
            self._scipy_cache[key] = self.to_scipy(self.cij[:, k])
        return self._scipy_cache[key]


def _csr_from_cells(n_nodes, cells):
    """Sorted CSR adjacency (with diagonal) from cell connectivity."""
    nloc = cells.shape[1]
    ii = np.repeat(cells, nloc, axis=1).ravel()
    jj = np.tile(cells, (1, nloc)).ravel()
    key = ii.astype(np.int64) * n_nodes + jj
    key = np.unique(key)
    rows = (key // n_nodes).astype(np.int64)
    cols = (key % n_nodes).astype(np.int32)
    counts = np.bincount(rows, minlength=n_nodes)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols


def element_tables(mesh, quad_points=3):
    """Per-cell quadrature tables: shape values, physical gradients, weights.

    Returns (nvals (nq, nloc), dphi (nc, nq, nloc, d), wdet (nc, nq)).
    Raises MeshError on non-positive Jacobians.
    """
    dim = mesh.dim
    _, w, nvals, ngrads = reference_quadrature(dim, quad_points)
    xc = mesh.cell_coords()  # (nc, nloc, d)
    jac = np.einsum("cak,qam->cqkm", xc, ngrads)
    if dim == 1:
        det = jac[:, :, 0, 0]
        inv = (1.0 / det)[:, :, None, None]
    else:
        det = jac[:, :, 0, 0] * jac[:, :, 1, 1] - jac[:, :, 0, 1] * jac[:, :, 1, 0]
        inv = np.empty_like(jac)
        inv[:, :, 0, 0] = jac[:, :, 1, 1]
        inv[:, :, 0, 1] = -jac[:, :, 0, 1]
        inv[:, :, 1, 0] = -jac[:, :, 1, 0]
        inv[:, :, 1, 1] = jac[:, :, 0, 0]
        inv = inv / det[:, :, None, None]
    if np.any(det <= 0):
        raise MeshError("degenerate or inverted cell (non-positive Jacobian)")
    dphi = np.einsum("qam,cqmk->cqak", ngrads, inv)
    wdet = w[None, :] * det
    return nvals, np.ascontiguousarray(dphi), np.ascontiguousarray(wdet)


def assemble_graph(mesh, quad_points=3):
    """Assemble all graph quantities with a 3^d Gauss rule per cell."""
    dim = mesh.dim
    nvals, dphi, wdet = element_tables(mesh, quad_points)

    m_loc = np.einsum("cq,qa,qb->cab", wdet, nvals, nvals)
    c_loc = np.einsum("cq,qa,cqbk->cabk", wdet, nvals, dphi)
    mi_loc = np.einsum("cq,qa->ca", wdet, nvals)

    n = mesh.n_nodes
    indptr, indices = _csr_from_cells(n, mesh.cells)
    nnz = len(indices)

    # Scatter map: slot of (cells[c,a], cells[c,b]).  The global keys
    # row*n + col are sorted by CSR construction, so one binary search
    # resolves every local pair.
    nloc = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, nloc, axis=1).ravel().astype(np.int64)
    cols = np.tile(mesh.cells, (1, nloc)).ravel().astype(np.int64)
    row_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    key_all = row_of * n + indices
    slots = np.searchsorted(key_all, rows * n + cols)
    cell_slots = slots.reshape(mesh.n_cells, nloc, nloc).astype(np.int32)

    m = np.zeros(n)
    np.add.at(m, mesh.cells.ravel(), mi_loc.ravel())
    mij = np.zeros(nnz)
    np.add.at(mij, cell_slots.ravel(), m_loc.ravel())
    cij = np.zeros((nnz, dim))
    for k in range(dim):
        np.add.at(cij[:, k], cell_slots.ravel(), c_loc[..., k].ravel())

    cnorm = np.linalg.norm(cij, axis=1)
    nij = np.zeros_like(cij)
    nz = cnorm > 0
    nij[nz] = cij[nz] / cnorm[nz, None]

    diag_pos = np.flatnonzero(indices == row_of).astype(np.int64)

    # Transpose slot map via the same sorted global keys.
    key_rev = indices.astype(np.int64) * n + row_of
    tpos = np.searchsorted(key_all, key_rev).astype(np.int64)

    is_boundary = np.zeros(n, dtype=bool)
    if len(mesh.face_nodes):
        is_boundary[np.unique(mesh.face_nodes.ravel())] = True

    deg = np.diff(indptr)
    lam = 1.0 / np.maximum(deg - 1, 1)

    return FemGraph(
        dim=dim,
        indptr=indptr.astype(np.int64),
        indices=indices.astype(np.int32),
        m=m,
        mij=mij,
        cij=cij,
        cnorm=cnorm,
        nij=nij,
        diag_pos=diag_pos,
        tpos=tpos,
        is_boundary=is_boundary,
        lam=lam,
        cell_slots=cell_slots,
    )


def compute_b_matrix(graph):
    """Fill b_ij = delta_ij - m_ij / m_j on the graph sparsity (in place)."""
    b = -graph.mij / graph.m[graph.indices]
    b[graph.diag_pos] += 1.0
    graph.bij = b
    return graph


_KINDS = ("slip", "nonreflecting", "dirichlet", "none")


@dataclass
class BoundaryCondition:
    """Per-tag hyperbolic boundary condition."""

    kind: str  # slip | nonreflecting | dirichlet | none
    state: object = None  # static (d+2,) array, or callable (coords, t) -> (k, d+2)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown boundary kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind in ("nonreflecting", "dirichlet") and self.state is None:
            raise ConfigError(f"{self.kind} condition requires a prescribed state")


@dataclass
class BoundaryMap:
    """Per-boundary-node normals, masses, condition flags and Dirichlet data."""

    nodes: np.ndarray  # (k,) boundary node ids
    m_bnd: np.ndarray  # (k,) whole-boundary mass
    n_bnd: np.ndarray  # (k, d) whole-boundary unit normal
    has_slip: np.ndarray
    m_slip: np.ndarray
    n_slip: np.ndarray
    has_nr: np.ndarray
    m_nr: np.ndarray
    n_nr: np.ndarray
    has_dirichlet: np.ndarray
    _dirichlet_static: np.ndarray = None  # (k, d+2) rows valid where has_dirichlet
    _dirichlet_fn: object = None
    _dirichlet_coords: np.ndarray = None
    nr_states: np.ndarray = None  # (k, d+2) far-field states where has_nr

    @property
    def n_bnodes(self):
        return len(self.nodes)

    def dirichlet_states(self, t):
        """Prescribed states at the stage collocation time t (rows valid where
        has_dirichlet)."""
        if self._dirichlet_fn is not None:
            out = np.array(self._dirichlet_static)
            vals = self._dirichlet_fn(self._dirichlet_coords, t)
            out[self.has_dirichlet] = vals
            return out
        return self._dirichlet_static


def _face_group_integrals(mesh, selector):
    """Accumulate int_F phi_i n ds over the selected faces, per node.

    Returns dense (n, d) integrals; nodes untouched by the group stay zero.
    """
    n = mesh.n_nodes
    dim = mesh.dim
    acc = np.zeros((n, dim))
    if not len(mesh.face_nodes):
        return acc
    sel = np.flatnonzero(selector)
    if not len(sel):
        return acc
    fc = mesh.face_coords()[sel]
    fn = mesh.face_nodes[sel]
    if dim == 1:
        normals, _ = mesh.face_normals_and_measures()
        np.add.at(acc, fn[:, 0], normals[sel])
        return acc
    x, w = _gauss(3)
    phi = np.stack([(1 - x) / 2, (1 + x) / 2], axis=-1)  # (nq, 2)
    t = fc[:, 1, :] - fc[:, 0, :]
    length = np.linalg.norm(t, axis=1)
    nrm = np.stack([t[:, 1], -t[:, 0]], axis=-1) / length[:, None]
    # weight per face/qp: w_q * |t|/2 ; integrand phi_a * n
    contrib = np.einsum("q,qa,f,fk->fak", w, phi, length / 2.0, nrm)
    for a in range(2):
        np.add.at(acc, fn[:, a], contrib[:, a, :])
    return acc


def assemble_boundary_map(mesh, graph, conditions, nr_method="characteristic"):
    """Build the boundary map from a {tag name: BoundaryCondition} table.

    Every tag of the mesh must be covered.  Nodes on the interface of a slip
    and a non-reflecting group receive both group normals.  The decomposition
    identity m_bnd n_bnd = sum_kinds m_kind n_kind holds by construction up
    to quadrature round-off.
    """
    for tid, name in mesh.tag_names.items():
        if name not in conditions:
            raise ConfigError(f"no boundary condition for tag {name!r}")
    for name in conditions:
        if name not in mesh.tag_names.values():
            raise ConfigError(f"condition given for unknown tag {name!r}")
    _ = nr_method

    if not len(mesh.face_nodes):
        z = np.zeros((0,))
        zd = np.zeros((0, mesh.dim))
        zb = np.zeros(0, dtype=bool)
        return BoundaryMap(
            nodes=np.zeros(0, dtype=np.int64), m_bnd=z, n_bnd=zd,
            has_slip=zb, m_slip=z, n_slip=zd,
            has_nr=zb, m_nr=z, n_nr=zd,
            has_dirichlet=zb, _dirichlet_static=np.zeros((0, mesh.dim + 2)),
            nr_states=np.zeros((0, mesh.dim + 2)),
        )

    tag_kind = {name: conditions[name].kind for name in conditions}
    face_kind = np.array([tag_kind[mesh.tag_names[t]] for t in mesh.face_tags])

    total = _face_group_integrals(mesh, np.ones(len(mesh.face_nodes), dtype=bool))
    slip_int = _face_group_integrals(mesh, face_kind == "slip")
    nr_int = _face_group_integrals(mesh, face_kind == "nonreflecting")

    bnodes = np.unique(mesh.face_nodes.ravel())
    k = len(bnodes)

    def normalize(integrals):
        v = integrals[bnodes]
        mass = np.linalg.norm(v, axis=1)
        unit = np.zeros_like(v)
        nz = mass > 1e-300
        unit[nz] = v[nz] / mass[nz, None]
        return mass, unit, nz

    m_bnd, n_bnd, _ = normalize(total)
    m_slip, n_slip, has_slip = normalize(slip_int)
    m_nr, n_nr, has_nr = normalize(nr_int)

    # Dirichlet / non-reflecting prescribed data per node.
    w = mesh.dim + 2
    has_dir = np.zeros(k, dtype=bool)
    dir_static = np.zeros((k, w))
    nr_states = np.zeros((k, w))
    dir_fn = None
    node_pos = {int(nid): idx for idx, nid in enumerate(bnodes)}
    for name, cond in conditions.items():
        tid = mesh.tag_id(name)
        tag_nodes = np.unique(mesh.face_nodes[mesh.face_tags == tid].ravel())
        idx = np.array([node_pos[int(i)] for i in tag_nodes], dtype=np.int64)
        if cond.kind == "dirichlet":
            has_dir[idx] = True
            if callable(cond.state):
                dir_fn = cond.state  # single provider for all dirichlet nodes
            else:
                dir_static[idx] = np.asarray(cond.state, dtype=float)
        elif cond.kind == "nonreflecting":
            if callable(cond.state):
                raise ConfigError("non-reflecting far-field state must be static")
            nr_states[idx] = np.asarray(cond.state, dtype=float)

    bmap = BoundaryMap(
        nodes=bnodes.astype(np.int64),
        m_bnd=m_bnd, n_bnd=n_bnd,
        has_slip=has_slip, m_slip=m_slip, n_slip=n_slip,
        has_nr=has_nr, m_nr=m_nr, n_nr=n_nr,
        has_dirichlet=has_dir,
        _dirichlet_static=dir_static,
        nr_states=nr_states,
    )
    if dir_fn is not None:
        bmap._dirichlet_fn = dir_fn
        bmap._dirichlet_coords = mesh.coords[bnodes[has_dir]]
    _ = graph
    return bmap


def write_vtk(path, mesh, point_data=None):
    """Legacy-VTK ASCII unstructured-grid dump with optional nodal fields."""
    point_data = point_data or {}
    n = mesh.n_nodes
    nc = mesh.n_cells
    nloc = mesh.cells.shape[1]
    cell_type = 3 if mesh.dim == 1 else 9  # VTK_LINE / VTK_QUAD
    lines = [
        "# vtk DataFile Version 3.0",
        "gasflow field snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    coords3 = np.zeros((n, 3))
    coords3[:, : mesh.dim] = mesh.coords
    lines.extend(" ".join(repr(float(v)) for v in row) for row in coords3)
    lines.append(f"CELLS {nc} {nc * (nloc + 1)}")
    lines.extend(f"{nloc} " + " ".join(str(int(v)) for v in row) for row in mesh.cells)
    lines.append(f"CELL_TYPES {nc}")
    lines.extend([str(cell_type)] * nc)
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(v)) for v in arr)
            else:
                vec3 = np.zeros((n, 3))
                vec3[:, : arr.shape[1]] = arr
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(repr(float(v)) for v in row) for row in vec3)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
