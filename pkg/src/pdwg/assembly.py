"""Saddle-point assembly for one reweighted iterate.

The linear system solved at every step is

    [ S1   B  ] [lam, q]   [F]
    [ B^T -S2 ] [u,   s] = [0]

plus one multiplier row/column for the mean-zero constraint on lam0.
S1 and S2 are the face-jump stabilizers with weights frozen at the
previous iterate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .mesh import Mesh
from .quadrature import tet_rule, tri_rule
from .spaces import DofMap
from .weakcalc import cell_integrals, face_integrals

__all__ = [
    "PdwgParams",
    "IterateState",
    "SaddleSystem",
    "stabilizer_weight",
    "face_jumps",
    "assemble_B",
    "assemble_s1",
    "assemble_s2",
    "assemble_F",
    "build_system",
    "s1_value",
    "s2_value",
    "nonlinear_residual",
]


@dataclass(frozen=True)
class PdwgParams:
    p: float = 2.0
    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    eps0: float | None = None
    tol: float = 1e-5
    max_iters: int = 100

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if min(self.rho1, self.rho2, self.rho3) <= 0:
            raise ValueError("stabilization parameters must be positive")
        if self.eps0 is None:
            object.__setattr__(self, "eps0", 10.0 ** (-6.0 / (self.p - 1.0)))
        if not self.eps0 > 0 or not self.tol > 0 or self.max_iters < 1:
            raise ValueError("eps0, tol and max_iters must be positive")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)


@dataclass(frozen=True)
class IterateState:
    """Previous-step face jumps feed the weights; only lam, q and s matter."""

    lam0: np.ndarray  # (NE,)
    lamb: np.ndarray  # (NF,)
    q0: np.ndarray  # (NE, 3)
    qb: np.ndarray  # (NF, 2) frame coefficients
    s0: np.ndarray  # (NE,)
    sb: np.ndarray  # (NF,) resolved face values

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "IterateState":
        ne, nf = dofmap.n_elements, dofmap.n_faces
        return cls(np.zeros(ne), np.zeros(nf), np.zeros((ne, 3)), np.zeros((nf, 2)), np.zeros(ne), np.zeros(nf))

    @classmethod
    def from_vector(cls, dofmap: DofMap, x: np.ndarray) -> "IterateState":
        b = dofmap.split(x)
        return cls(b["lam0"], b["lamb"], b["q0"], b["qb"], b["s0"], b["sb"])

    def check(self, dofmap: DofMap):
        ne, nf = dofmap.n_elements, dofmap.n_faces
        shapes = [(self.lam0, (ne,)), (self.lamb, (nf,)), (self.q0, (ne, 3)), (self.qb, (nf, 2)),
                  (self.s0, (ne,)), (self.sb, (nf,))]
        for arr, shp in shapes:
            if np.shape(arr) != shp:
                raise ValueError(f"iterate block has shape {np.shape(arr)}, expected {shp}")


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    info: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape


def stabilizer_weight(m, p: float, eps0: float):
    """(m + eps0)^(p - 2), the frozen reweighting factor."""
    return (np.asarray(m, dtype=float) + eps0) ** (p - 2.0)


def _eps_diag(mesh: Mesh, eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if eps.ndim == 1:
        eps = np.broadcast_to(eps, (mesh.n_elements, 3))
    if eps.shape != (mesh.n_elements, 3):
        raise ValueError("eps must be a diagonal 3-vector or one per element")
    if np.any(eps <= 0) or not np.all(np.isfinite(eps)):
        raise ValueError("eps must be symmetric positive definite")
    return eps


def face_jumps(mesh: Mesh, state: IterateState):
    """Element-face jumps (lam, q, s); q jumps are (NE, 4, 2) tangential frame coefficients."""
    ef = mesh.elem_faces
    t = mesh.face_tangents[ef]  # (NE, 4, 2, 3)
    jl = state.lam0[:, None] - state.lamb[ef]
    jq = np.einsum("efjx,ex->efj", t, state.q0) - state.qb[ef]
    js = state.s0[:, None] - state.sb[ef]
    return jl, jq, js


class _Triplets:
    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add(self, r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        keep = (r >= 0) & (c >= 0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(v[keep])

    def add_sym(self, r, c, v):
        self.add(r, c, v)
        self.add(c, r, v)

    def matrix(self) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix((self.n, self.n))
        A = sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n, self.n),
        )
        return A.tocsr()


def assemble_B(mesh: Mesh, dofmap: DofMap, eps) -> sparse.csr_matrix:
    """B block (rows: lam/q tests, cols: u/s unknowns) embedded in the global size."""
    eps = _eps_diag(mesh, eps)
    ef = mesh.elem_faces
    area = mesh.face_area[ef]  # (NE, 4)
    nout = mesh.outward_normals()  # (NE, 4, 3)
    t = mesh.face_tangents[ef]  # (NE, 4, 2, 3)
    ui = dofmap.u()  # (NE, 3)
    lamb = dofmap.lamb()[ef]  # (NE, 4)
    qb = dofmap.qb_faces()[ef]  # (NE, 4, 2)
    q0 = dofmap.q0()
    sb = dofmap.face_s_index[ef]

    T = _Triplets(dofmap.size)
    # (u, eps grad_w phi): sum_F |F| phi_b (u . eps n)
    v = area[:, :, None] * eps[:, None, :] * nout
    T.add(lamb[:, :, None], ui[:, None, :], v)
    # (u, curl_w psi) = -sum_F |F| u . (psi_b x n)
    txn = np.cross(t, nout[:, :, None, :])  # (NE, 4, 2, 3)
    T.add(qb[:, :, :, None], ui[:, None, None, :], -area[:, :, None, None] * txn)
    # (psi_0, eps grad_w s) = sum_F |F| s_b (psi_0 . eps n)
    T.add(q0[:, None, :], sb[:, :, None], v)
    return T.matrix()


def _coeff(mesh: Mesh, rho: float, expo: float) -> np.ndarray:
    # rho h_T^(1-expo) |F| per element face
    return rho * mesh.diameters[:, None] ** (1.0 - expo) * mesh.face_area[mesh.elem_faces]


def assemble_s1(mesh: Mesh, dofmap: DofMap, state: IterateState, params: PdwgParams) -> sparse.csr_matrix:
    state.check(dofmap)
    p = params.p
    ef = mesh.elem_faces
    jl, jq, _ = face_jumps(mesh, state)
    wl = stabilizer_weight(np.abs(jl), p, params.eps0)
    wq = stabilizer_weight(np.linalg.norm(jq, axis=2), p, params.eps0)
    cl = _coeff(mesh, params.rho1, p) * wl
    cq = _coeff(mesh, params.rho2, p) * wq

    T = _Triplets(dofmap.size)
    l0 = np.broadcast_to(dofmap.lam0()[:, None], ef.shape)
    lb = dofmap.lamb()[ef]
    T.add(l0, l0, cl)
    T.add(lb, lb, cl)
    T.add_sym(l0, lb, -cl)

    t = mesh.face_tangents[ef]  # (NE, 4, 2, 3)
    q0 = dofmap.q0()  # (NE, 3)
    qb = dofmap.qb_faces()[ef]  # (NE, 4, 2)
    P = np.einsum("efjx,efjy->efxy", t, t)  # tangential projector
    T.add(q0[:, None, :, None], q0[:, None, None, :], cq[:, :, None, None] * P)
    T.add_sym(q0[:, None, :, None], qb[:, :, None, :], -cq[:, :, None, None] * np.swapaxes(t, 2, 3))
    T.add(qb, qb, cq[:, :, None])
    return T.matrix()


def assemble_s2(mesh: Mesh, dofmap: DofMap, state: IterateState, params: PdwgParams) -> sparse.csr_matrix:
    """Reweighted s2 block (positive semidefinite; enters the system as -S2)."""
    state.check(dofmap)
    qq = params.q
    ef = mesh.elem_faces
    _, _, js = face_jumps(mesh, state)
    cs = _coeff(mesh, params.rho3, qq) * stabilizer_weight(np.abs(js), qq, params.eps0)
    T = _Triplets(dofmap.size)
    s0 = np.broadcast_to(dofmap.s0()[:, None], ef.shape)
    sb = dofmap.face_s_index[ef]
    T.add(s0, s0, cs)
    T.add(sb, sb, cs)
    T.add_sym(s0, sb, -cs)
    return T.matrix()


def _multiplier(mesh: Mesh, dofmap: DofMap) -> sparse.csr_matrix:
    T = _Triplets(dofmap.size)
    T.add_sym(dofmap.lam0(), np.full(mesh.n_elements, dofmap.mult), mesh.volumes)
    return T.matrix()


def singular_masks(mesh: Mesh, lines, tol: float = 1e-9):
    """Elements and faces with a vertex on one of the z-parallel lines (x0, y0)."""
    on = np.zeros(len(mesh.vertices), dtype=bool)
    for x0, y0 in lines or ():
        on |= (np.abs(mesh.vertices[:, 0] - x0) < tol) & (np.abs(mesh.vertices[:, 1] - y0) < tol)
    return on[mesh.elements].any(axis=1), on[mesh.faces].any(axis=1)


def assemble_F(mesh: Mesh, dofmap: DofMap, problem, quad_degree: int = 4, refine_levels: int = 1) -> np.ndarray:
    """Load vector: -(f, phi_0) + <phi1, phi_b> + (g, psi_0)."""
    b = np.zeros(dofmap.size)
    emask, fmask = singular_masks(mesh, getattr(problem, "singular_lines", ()))
    trule, frule = tet_rule(quad_degree), tri_rule(quad_degree)
    fint = cell_integrals(mesh, problem.f, trule, emask, refine_levels)
    gint = cell_integrals(mesh, problem.g, trule, emask, refine_levels)
    b[dofmap.lam0()] -= fint
    b[dofmap.q0().ravel()] += gint.ravel()

    bf = mesh.boundary_faces
    e = mesh.face_elems[bf, 0]
    nout = mesh.face_normal[bf] * mesh.elem_face_sign[e, mesh.face_local[bf, 0]][:, None]
    eps = np.asarray(problem.eps, dtype=float)

    # eps u . n_out is linear in u, so integrate u and contract afterwards
    uint = face_integrals(mesh, problem.u, bf, frule, fmask[bf], refine_levels)
    b[dofmap.lamb()[bf]] += np.einsum("bx,x,bx->b", uint, eps, nout)
    return b


def build_system(mesh: Mesh, dofmap: DofMap, problem, params: PdwgParams, state: IterateState | None = None,
                 rhs: np.ndarray | None = None, B: sparse.spmatrix | None = None, quad_degree: int = 4,
                 refine_levels: int = 1) -> SaddleSystem:
    """Assemble the symmetric indefinite system of one iterate.

    ``rhs`` and ``B`` do not depend on the iterate and may be passed in to
    avoid recomputation.
    """
    state = IterateState.zeros(dofmap) if state is None else state
    if B is None:
        B = assemble_B(mesh, dofmap, problem.eps)
    if rhs is None:
        rhs = assemble_F(mesh, dofmap, problem, quad_degree, refine_levels)
    if rhs.shape != (dofmap.size,) or B.shape != (dofmap.size, dofmap.size):
        raise ValueError("dimension mismatch between system blocks and the dof map")
    A = assemble_s1(mesh, dofmap, state, params) + B + B.T - assemble_s2(mesh, dofmap, state, params)
    A = A + _multiplier(mesh, dofmap)
    return SaddleSystem(A.tocsr(), rhs, dofmap)


def _signed_power(w, r):
    # |w|^(r-1) sgn(w), well defined at w = 0 for r > 1
    return np.abs(w) ** (r - 1.0) * np.sign(w)


def s1_value(mesh: Mesh, lam: tuple, q: tuple, params: PdwgParams, test: tuple | None = None) -> float:
    """Unsmoothed s1(lam, q; phi, psi); ``lam`` = (lam0, lamb), ``q`` = (q0, qb).

    Without ``test`` the form is evaluated at its own arguments.
    """
    p = params.p
    ef = mesh.elem_faces
    t = mesh.face_tangents[ef]
    jl = lam[0][:, None] - lam[1][ef]
    jq = np.einsum("efjx,ex->efj", t, q[0]) - q[1][ef]
    if test is None:
        kl, kq = jl, jq
    else:
        kl = test[0][0][:, None] - test[0][1][ef]
        kq = np.einsum("efjx,ex->efj", t, test[1][0]) - test[1][1][ef]
    mag = np.linalg.norm(jq, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dirq = np.where(mag[..., None] > 0, jq / mag[..., None], 0.0)
    vl = _coeff(mesh, params.rho1, p) * _signed_power(jl, p) * kl
    vq = _coeff(mesh, params.rho2, p) * mag ** (p - 1.0) * np.sum(dirq * kq, axis=2)
    return float(vl.sum() + vq.sum())


def s2_value(mesh: Mesh, s: tuple, params: PdwgParams, test: tuple | None = None) -> float:
    qq = params.q
    ef = mesh.elem_faces
    js = s[0][:, None] - s[1][ef]
    ks = js if test is None else test[0][:, None] - test[1][ef]
    return float(np.sum(_coeff(mesh, params.rho3, qq) * _signed_power(js, qq) * ks))


def nonlinear_residual(mesh: Mesh, dofmap: DofMap, x: np.ndarray, rhs: np.ndarray, B, params: PdwgParams) -> np.ndarray:
    """Residual of the unsmoothed nonlinear scheme at the global vector ``x``.

    The stabilizer parts use |w|^(p-1) sgn(w) directly, so this is an
    independent check of the reweighted linear solve.
    """
    p, qq = params.p, params.q
    ef = mesh.elem_faces
    st = IterateState.from_vector(dofmap, x)
    jl, jq, js = face_jumps(mesh, st)
    r = (B + B.T) @ x - rhs
    r += _multiplier(mesh, dofmap) @ x

    cl = _coeff(mesh, params.rho1, p) * _signed_power(jl, p)
    np.add.at(r, dofmap.lam0(), cl.sum(axis=1))
    np.add.at(r, dofmap.lamb()[ef].ravel(), -cl.ravel())

    mag = np.linalg.norm(jq, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0, mag ** (p - 2.0), 0.0)
    fq = (_coeff(mesh, params.rho2, p) * scale)[..., None] * jq  # (NE, 4, 2)
    t = mesh.face_tangents[ef]
    np.add.at(r, dofmap.q0().ravel(), np.einsum("efj,efjx->ex", fq, t).ravel())
    qb = dofmap.qb_faces()[ef]
    keep = qb >= 0
    np.add.at(r, qb[keep], -fq[keep])

    cs = _coeff(mesh, params.rho3, qq) * _signed_power(js, qq)
    np.add.at(r, dofmap.s0(), -cs.sum(axis=1))
    sb = dofmap.face_s_index[ef]
    keep = sb >= 0
    np.add.at(r, sb[keep], cs[keep])
    return r
