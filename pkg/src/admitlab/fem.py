"""P1 tetrahedral finite elements on structured box (and bumped-box) meshes.

The complex divergence-form equation is assembled as the real 2x2-block
strongly elliptic system with blocks [A_R, -k A_I; k A_I, A_R] sampled at tet
barycenters (one-point quadrature).  Solves go through the equivalent complex
matrix K_R + i K_I; the assembled block matrix is exposed for the structure
and ellipticity checks.
"""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admittivity import AdmittivityFamily, ParameterField
from .errors import ConfigError, GeometryError, SolverError
from .geometry import BoundaryPatch, BoxDomain, EnlargedDomain

# Six-tet Kuhn split of the unit hex: each permutation of the axes walks
# from corner 0 to corner 7 along the main diagonal.
_KUHN_PERMS = list(itertools.permutations(range(3)))


def _corner_id(offset) -> int:
    return offset[0] + 2 * offset[1] + 4 * offset[2]


def _kuhn_patterns():
    patterns = []
    for perm in _KUHN_PERMS:
        o = np.zeros(3, dtype=int)
        ids = [_corner_id(o)]
        for axis in perm[:2]:
            o = o.copy()
            o[axis] = 1
            ids.append(_corner_id(o))
        ids.append(_corner_id((1, 1, 1)))
        patterns.append(ids)
    return np.asarray(patterns, dtype=int)


_TET_PATTERNS = _kuhn_patterns()
_CORNER_OFFSETS = np.array([[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)])
# _CORNER_OFFSETS row order must match _corner_id:
_CORNER_OFFSETS = _CORNER_OFFSETS[np.argsort([_corner_id(o) for o in _CORNER_OFFSETS])]

_FACE_LOCAL = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


def _int_cells(extent: float, h: float, what: str, minimum: int = 4) -> int:
    n = int(round(extent / h))
    if n < minimum or abs(n * h - extent) > 1e-9 * max(1.0, extent):
        raise ConfigError(
            f"mesh pitch h={h} must divide the {what} extent {extent} into "
            f">= {minimum} cells"
        )
    return n


class Mesh:
    """Conforming tetrahedral mesh on a lattice of pitch h.

    Vertices carry integer lattice coordinates so that meshes of the domain
    and of its enlargement (built with the same pitch and anchor) can share
    nodal data.
    """

    def __init__(self, verts, tets, ijk, h, anchor, boundary_tris,
                 boundary_axis, boundary_plane, sigma_mask):
        self.verts = verts
        self.tets = tets
        self.ijk = ijk
        self.h = h
        self.anchor = anchor
        self.boundary_tris = boundary_tris
        self.boundary_axis = boundary_axis
        self.boundary_plane = boundary_plane
        self.sigma_mask = sigma_mask

        e1 = verts[tets[:, 1]] - verts[tets[:, 0]]
        e2 = verts[tets[:, 2]] - verts[tets[:, 0]]
        e3 = verts[tets[:, 3]] - verts[tets[:, 0]]
        G = np.stack([e1, e2, e3], axis=-1)
        det = np.linalg.det(G)
        flip = det < 0.0
        if np.any(flip):
            self.tets = tets.copy()
            self.tets[flip, 2], self.tets[flip, 3] = tets[flip, 3], tets[flip, 2]
            e2 = verts[self.tets[:, 2]] - verts[self.tets[:, 0]]
            e3 = verts[self.tets[:, 3]] - verts[self.tets[:, 0]]
            G = np.stack([e1, e2, e3], axis=-1)
            det = np.linalg.det(G)
        if np.any(det <= 0.0):
            raise GeometryError("degenerate or inverted tetrahedra in the mesh")
        self.volumes = det / 6.0
        # Barycentric coordinates are lam = G^{-1}(x - x0), so the gradients
        # of lam_1..lam_3 are the rows of G^{-1}.
        G_inv = np.linalg.inv(G)
        grads = np.empty((self.tets.shape[0], 4, 3))
        grads[:, 1:, :] = G_inv
        grads[:, 0, :] = -np.sum(grads[:, 1:, :], axis=1)
        self.grads = grads
        self.barycenters = self.verts[self.tets].mean(axis=1)

        self.boundary_vertex_mask = np.zeros(len(verts), dtype=bool)
        self.boundary_vertex_mask[np.unique(boundary_tris)] = True
        self._vertex_lookup = {tuple(key): i for i, key in enumerate(map(tuple, ijk))}

    @property
    def n_vertices(self) -> int:
        return len(self.verts)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def vertex_at(self, ijk_key) -> int:
        return self._vertex_lookup[tuple(int(v) for v in ijk_key)]

    def shared_vertex_map(self, other: "Mesh") -> np.ndarray:
        """Indices in `other` of this mesh's vertices (same lattice anchor)."""
        if abs(self.h - other.h) > 1e-12 or np.max(np.abs(self.anchor - other.anchor)) > 1e-12:
            raise GeometryError("meshes do not share a lattice")
        return np.array([other.vertex_at(key) for key in self.ijk], dtype=int)


def _build_from_cells(cells, h, anchor, sigma_tagger=None) -> Mesh:
    cells = np.asarray(cells, dtype=np.int64)
    corners = cells[:, None, :] + _CORNER_OFFSETS[None, :, :]
    flat = corners.reshape(-1, 3)
    verts_ijk, inverse = np.unique(flat, axis=0, return_inverse=True)
    corner_idx = inverse.reshape(len(cells), 8)
    verts = anchor[None, :] + verts_ijk * h

    tets = corner_idx[:, _TET_PATTERNS].reshape(-1, 4)

    faces = tets[:, _FACE_LOCAL].reshape(-1, 3)
    faces_sorted = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces_sorted, axis=0, return_counts=True)
    boundary = uniq[counts == 1]

    ijk_b = verts_ijk[boundary]
    axis = np.full(len(boundary), -1, dtype=np.int8)
    plane = np.zeros(len(boundary))
    for a in range(3):
        const = (ijk_b[:, :, a] == ijk_b[:, :1, a]).all(axis=1)
        axis[const] = a
        plane[const] = anchor[a] + ijk_b[const, 0, a] * h
    if np.any(axis < 0):
        raise GeometryError("boundary face not aligned with a lattice plane")

    sigma = np.zeros(len(boundary), dtype=bool)
    if sigma_tagger is not None:
        sigma = sigma_tagger(verts, boundary, axis, plane)

    return Mesh(
        verts=verts, tets=tets, ijk=verts_ijk, h=h, anchor=anchor,
        boundary_tris=boundary, boundary_axis=axis, boundary_plane=plane,
        sigma_mask=sigma,
    )


def _sigma_tagger(patch: BoundaryPatch):
    def tag(verts, boundary, axis, plane):
        mask = (axis == patch.axis) & (np.abs(plane - patch.plane_coord) < 1e-9)
        if not np.any(mask):
            return np.zeros(len(boundary), dtype=bool)
        lo2 = np.asarray(patch.rect_lo) - 1e-9
        hi2 = np.asarray(patch.rect_hi) + 1e-9
        lat = patch.lateral(verts[boundary])
        inside = np.all((lat >= lo2) & (lat <= hi2), axis=(1, 2))
        return mask & inside

    return tag


def build_mesh(domain, h: float, patch: Optional[BoundaryPatch] = None) -> Mesh:
    """Structured mesh of a box or of an enlarged (bumped) box.

    Each lattice hex is split into six tets.  For the enlarged domain the
    bump must be aligned with the lattice (see build_enlarged_domain).
    """
    if isinstance(domain, BoxDomain):
        box = domain
        bump = None
    elif isinstance(domain, EnlargedDomain):
        box = domain.box
        bump = domain
        patch = patch or domain.patch
    else:
        raise ConfigError(f"cannot mesh a {type(domain).__name__}")

    lo, hi = box.lo_arr, box.hi_arr
    ncells = [_int_cells(hi[a] - lo[a], h, f"axis-{a}") for a in range(3)]
    grid = np.stack(
        np.meshgrid(*[np.arange(n) for n in ncells], indexing="ij"), axis=-1
    ).reshape(-1, 3)
    cells = [grid]

    if bump is not None:
        p = bump.patch
        t1, t2 = p.tangent_axes
        nb = int(round(bump.thickness / h))
        if nb < 1 or abs(nb * h - bump.thickness) > 1e-9:
            raise GeometryError("bump thickness is not aligned with the mesh pitch")
        spans = {}
        for t_axis, b_lo, b_hi in ((t1, bump.base_lo[0], bump.base_hi[0]),
                                   (t2, bump.base_lo[1], bump.base_hi[1])):
            i0 = int(round((b_lo - lo[t_axis]) / h))
            i1 = int(round((b_hi - lo[t_axis]) / h))
            if (abs(lo[t_axis] + i0 * h - b_lo) > 1e-9
                    or abs(lo[t_axis] + i1 * h - b_hi) > 1e-9 or i1 <= i0):
                raise GeometryError("bump base is not aligned with the mesh pitch")
            spans[t_axis] = (i0, i1)
        if p.side > 0:
            axis_range = range(ncells[p.axis], ncells[p.axis] + nb)
        else:
            axis_range = range(-nb, 0)
        ranges = [None, None, None]
        ranges[p.axis] = list(axis_range)
        ranges[t1] = list(range(*spans[t1]))
        ranges[t2] = list(range(*spans[t2]))
        bump_cells = np.stack(
            np.meshgrid(*ranges, indexing="ij"), axis=-1
        ).reshape(-1, 3)
        cells.append(bump_cells)

    all_cells = np.concatenate(cells, axis=0)
    tagger = _sigma_tagger(patch) if patch is not None else None
    return _build_from_cells(all_cells, h, lo.copy(), sigma_tagger=tagger)


def assemble_stiffness(mesh: Mesh, coeff) -> sp.csr_matrix:
    """Stiffness matrix for a per-tet (or constant) 3x3 coefficient matrix."""
    coeff = np.asarray(coeff)
    if coeff.ndim == 2:
        coeff = np.broadcast_to(coeff, (mesh.n_tets, 3, 3))
    local = np.einsum(
        "taj,tjk,tbk->tab", mesh.grads, coeff, mesh.grads
    ) * mesh.volumes[:, None, None]
    rows = np.repeat(mesh.tets, 4, axis=1).reshape(-1)
    cols = np.tile(mesh.tets, (1, 4)).reshape(-1)
    mat = sp.coo_matrix(
        (local.reshape(-1), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    ).tocsr()
    mat.eliminate_zeros()
    return mat


class ComplexField:
    """Complex nodal field u = u1 + i u2 on a mesh."""

    def __init__(self, mesh: Mesh, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (mesh.n_vertices,):
            raise ConfigError("field length does not match the mesh")
        if not np.all(np.isfinite(values)):
            raise SolverError("field contains non-finite values")
        self.mesh = mesh
        self.values = values

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag

    def gradients(self) -> np.ndarray:
        """Per-tet constant gradients, shape (T, 3) complex."""
        return np.einsum("ta,taj->tj", self.values[self.mesh.tets], self.mesh.grads)


class BlockSystem:
    """Assembled 2x2-block system with cached factorisation.

    Solves use the equivalent complex matrix K_R + i K_I; `block_matrix`
    materialises the real block form [[K_R, -K_I], [K_I, K_R]].
    """

    DIRECT_LIMIT = 50_000

    def __init__(self, mesh: Mesh, K_R: sp.csr_matrix, K_I: sp.csr_matrix, k: float):
        self.mesh = mesh
        self.K_R = K_R
        self.K_I = K_I
        self.k = k
        self.dirichlet_mask = mesh.boundary_vertex_mask.copy()
        self._interior = np.where(~self.dirichlet_mask)[0]
        self._boundary = np.where(self.dirichlet_mask)[0]
        self.K_complex = (K_R + 1j * K_I).tocsr()
        self._K_ii = self.K_complex[np.ix_(self._interior, self._interior)].tocsc()
        self._K_ib = self.K_complex[np.ix_(self._interior, self._boundary)].tocsr()
        self._lu = None

    @property
    def block_matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.K_R, -self.K_I], [self.K_I, self.K_R]], format="csr")

    @property
    def interior(self) -> np.ndarray:
        return self._interior

    @property
    def boundary(self) -> np.ndarray:
        return self._boundary

    def _solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        n = self._K_ii.shape[0]
        if n <= self.DIRECT_LIMIT:
            if self._lu is None:
                try:
                    self._lu = spla.splu(self._K_ii)
                except RuntimeError as exc:
                    raise SolverError(f"sparse factorisation failed: {exc}") from exc
            return self._lu.solve(rhs)
        # Normal-form CG with diagonal preconditioning for large systems.
        K = self._K_ii
        diag = np.asarray(np.abs(K).power(2).sum(axis=0)).ravel()
        diag[diag == 0.0] = 1.0
        normal = spla.LinearOperator(
            (n, n), matvec=lambda x: K.conj().T @ (K @ x), dtype=complex
        )
        precond = spla.LinearOperator((n, n), matvec=lambda x: x / diag, dtype=complex)
        sol, info = spla.cg(normal, K.conj().T @ rhs, rtol=1e-12, maxiter=20 * n,
                            M=precond)
        if info != 0:
            raise SolverError(
                "normal-form CG did not converge",
                diagnostics={"info": info, "size": n},
            )
        return sol

    def solve_dirichlet(self, g) -> ComplexField:
        """Solve with Dirichlet data g (full-length nodal vector)."""
        g = np.asarray(g, dtype=complex)
        if g.shape != (self.mesh.n_vertices,):
            raise ConfigError("boundary data must be a full-length nodal vector")
        if not np.all(np.isfinite(g[self._boundary])):
            raise SolverError("boundary data contains non-finite values")
        rhs = -(self._K_ib @ g[self._boundary])
        u_int = self._solve_interior(rhs)
        resid = np.linalg.norm(self._K_ii @ u_int - rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        if resid > 1e-10 * scale:
            raise SolverError(
                "interior residual too large",
                diagnostics={"residual": float(resid), "scale": float(scale)},
            )
        values = np.zeros(self.mesh.n_vertices, dtype=complex)
        values[self._boundary] = g[self._boundary]
        values[self._interior] = u_int
        return ComplexField(self.mesh, values)


def assemble(mesh: Mesh, family: AdmittivityFamily, a: ParameterField, k: float) -> BlockSystem:
    """Block system for div(A(x, a(x)) grad u) = 0 on the mesh."""
    bary = mesh.barycenters
    t_vals = np.asarray(a.values(bary), dtype=float)
    if t_vals.ndim == 0:
        t_vals = np.full(mesh.n_tets, float(t_vals))
    A_R = family.real_part(bary, t_vals)
    A_I = family.imag_part(bary, t_vals)
    K_R = assemble_stiffness(mesh, A_R)
    K_I = assemble_stiffness(mesh, k * A_I)
    return BlockSystem(mesh, K_R, K_I, k)


def energy_pairing(system: BlockSystem, u: ComplexField, v: ComplexField) -> complex:
    """Bilinear energy integral: sum over tets of A grad(u) . grad(v) vol."""
    if u.mesh is not system.mesh or v.mesh is not system.mesh:
        raise ConfigError("fields must live on the system's mesh")
    return complex(u.values @ (system.K_complex @ v.values))


def energy_density(mesh: Mesh, coeff, u: ComplexField, v: ComplexField) -> np.ndarray:
    """Per-tet contributions vol * (coeff grad u) . grad v (unconjugated)."""
    if u.mesh is not mesh or v.mesh is not mesh:
        raise ConfigError("fields must live on the given mesh")
    coeff = np.asarray(coeff)
    if coeff.ndim == 2:
        coeff = np.broadcast_to(coeff, (mesh.n_tets, 3, 3))
    gu = u.gradients()
    gv = v.gradients()
    return np.einsum("tj,tjk,tk->t", gu, coeff, gv) * mesh.volumes


def interpolate(mesh: Mesh, fn) -> ComplexField:
    """Nodal interpolation of a callable fn(points) -> complex values."""
    return ComplexField(mesh, np.asarray(fn(mesh.verts), dtype=complex))
