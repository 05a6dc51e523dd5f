"""Linear saddle solves and the reweighted outer iteration."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .assembly import IterateState, PdwgParams, SaddleSystem, assemble_B, assemble_F, build_system
from .mesh import Mesh
from .spaces import FREE, DofMap, build_dof_map

__all__ = ["LinearSolveError", "SolveReport", "solve_linear", "run_pdwg", "dof_coordinates", "nested_dissection"]

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
# below this size the default SuperLU ordering is just as quick
ORDERING_THRESHOLD = 20000


class LinearSolveError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _relres(A, x, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(A @ x - b) / (nb if nb > 0 else 1.0)


def dof_coordinates(mesh: Mesh, dofmap: DofMap) -> np.ndarray:
    """A representative point per unknown: element centroid or face centroid.

    Component constants and the multiplier have no location and get NaN.
    """
    X = np.full((dofmap.size, 3), np.nan)
    cen = mesh.vertices[mesh.elements].mean(axis=1)
    for idx in (dofmap.lam0(), dofmap.s0()):
        X[idx] = cen
    for idx in (dofmap.q0(), dofmap.u()):
        X[idx] = cen[:, None, :]
    X[dofmap.lamb()] = mesh.face_centroid
    inner = dofmap.face_q_index >= 0
    X[dofmap.face_q_index[inner]] = mesh.face_centroid[inner]
    X[dofmap.face_q_index[inner] + 1] = mesh.face_centroid[inner]
    free_s = dofmap.constraints.s_face == FREE
    X[dofmap.face_s_index[free_s]] = mesh.face_centroid[free_s]
    return X


def nested_dissection(pattern, coords: np.ndarray, leaf: int = 200) -> np.ndarray:
    """Fill-reducing symmetric ordering by recursive coordinate bisection.

    Each level splits the current set at the median of its widest axis and
    moves the left nodes adjacent to the right half into a separator that
    is numbered after both halves. Unlocated nodes (NaN rows) go last.
    """
    G = sparse.csr_matrix(abs(sparse.csr_matrix(pattern)))
    G = (G + G.T).tocsr()
    out = []
    located = np.isfinite(coords[:, 0])
    stack = [(np.flatnonzero(located), False)]
    # iterative post-order: (set, emitted) pairs; emitted sets are leaves or separators
    while stack:
        idx, emit = stack.pop()
        if emit or idx.size <= leaf:
            out.append(idx)
            continue
        P = coords[idx]
        ax = int(np.argmax(P.max(axis=0) - P.min(axis=0)))
        left = P[:, ax] < np.median(P[:, ax])
        if left.all() or not left.any():
            left = np.arange(idx.size) < idx.size // 2
        touch = (G[idx][:, idx] @ (~left).astype(float)) > 0
        sep = left & touch
        # pushed in reverse so the left part is numbered first, the separator last
        stack.append((idx[sep], True))
        stack.append((idx[~left], False))
        stack.append((idx[left & ~sep], False))
    out.append(np.flatnonzero(~located))
    return np.concatenate(out)


def _factor(A, ordering):
    if ordering is None:
        return splu(A)
    P = A[ordering][:, ordering].tocsc()
    lu = splu(P, permc_spec="NATURAL", diag_pivot_thresh=0.01, options={"SymmetricMode": True})
    inv = np.empty_like(ordering)
    inv[ordering] = np.arange(ordering.size)

    class _Permuted:
        def solve(self, b):
            return lu.solve(b[ordering])[inv]

    return _Permuted()


def solve_linear(system, rhs=None, refine_steps: int = 3, tol: float = RESIDUAL_TOL,
                 ordering: np.ndarray | None = None) -> np.ndarray:
    """Sparse LU solve with a few rounds of iterative refinement.

    Accepts a SaddleSystem or a bare (matrix, rhs) pair. ``ordering`` is an
    optional symmetric permutation (see nested_dissection); when it leads to
    an inaccurate factor the default column ordering is tried instead.
    Raises LinearSolveError when the relative residual stays above ``tol``;
    on multiply connected domains that usually signals a nontrivial
    discrete harmonic kernel.
    """
    if isinstance(system, SaddleSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = sparse.csr_matrix(system), np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError("system must be square and match the right-hand side")
    if not np.any(b):
        return np.zeros_like(b, dtype=float)
    A = sparse.csc_matrix(A)
    res = np.inf
    for order in ([ordering, None] if ordering is not None else [None]):
        try:
            lu = _factor(A, order)
        except RuntimeError as exc:  # exactly singular factor
            if order is not None:
                continue
            raise LinearSolveError(f"factorization failed: {exc}") from exc
        x = lu.solve(b)
        res = _relres(A, x, b)
        for _ in range(refine_steps):
            if res <= tol * 1e-2:
                break
            x_new = x + lu.solve(b - A @ x)
            res_new = _relres(A, x_new, b)
            if not res_new < res:
                break
            x, res = x_new, res_new
        if np.isfinite(res) and res <= tol:
            return x
        log.info("ordering %s gave residual %.2e", "custom" if order is not None else "default", res)
    raise LinearSolveError(f"relative residual {res:.3e} exceeds {tol:.1e}", residual=res)


@dataclass
class SolveReport:
    x: np.ndarray
    dofmap: DofMap
    iterations: int
    history: list
    residual: float
    converged: bool
    timings: dict = field(default_factory=dict)

    @property
    def blocks(self) -> dict:
        return self.dofmap.split(self.x)

    @property
    def u_h(self) -> np.ndarray:
        return self.blocks["u"]

    @property
    def s_h(self) -> tuple:
        b = self.blocks
        return b["s0"], b["sb"]

    @property
    def lambda_h(self) -> tuple:
        b = self.blocks
        return b["lam0"], b["lamb"]

    @property
    def q_h(self) -> tuple:
        b = self.blocks
        return b["q0"], b["qb"]


def run_pdwg(problem, mesh: Mesh, params: PdwgParams, quad_degree: int = 4, refine_levels: int = 1,
             dofmap: DofMap | None = None) -> SolveReport:
    """Reweighted iteration from the zero iterate.

    Stops when the largest coefficient change between consecutive iterates
    is at most ``params.tol``. For p = 2 the weights never change and a
    single solve is returned.
    """
    t0 = time.perf_counter()
    dofmap = build_dof_map(mesh) if dofmap is None else dofmap
    B = assemble_B(mesh, dofmap, problem.eps)
    rhs = assemble_F(mesh, dofmap, problem, quad_degree, refine_levels)
    t_setup = time.perf_counter() - t0

    ordering = None
    state = IterateState.zeros(dofmap)
    x_prev = np.zeros(dofmap.size)
    history = []
    converged = False
    residual = np.nan
    t_solve = 0.0
    x = x_prev
    for it in range(1, params.max_iters + 1):
        system = build_system(mesh, dofmap, problem, params, state, rhs=rhs, B=B)
        t1 = time.perf_counter()
        if ordering is None and dofmap.size > ORDERING_THRESHOLD:
            ordering = nested_dissection(system.matrix, dof_coordinates(mesh, dofmap))
        x = solve_linear(system, ordering=ordering)
        t_solve += time.perf_counter() - t1
        residual = _relres(system.matrix, x, system.rhs)
        upd = float(np.max(np.abs(x - x_prev)))
        history.append(upd)
        log.debug("iteration %d: max update %.3e, residual %.2e", it, upd, residual)
        if params.p == 2 or upd <= params.tol:
            converged = True
            break
        state = IterateState.from_vector(dofmap, x)
        x_prev = x
    if not converged:
        log.warning("reweighted iteration did not reach tol %.1e in %d steps", params.tol, params.max_iters)
    return SolveReport(
        x=x,
        dofmap=dofmap,
        iterations=len(history),
        history=history,
        residual=float(residual),
        converged=converged,
        timings={"setup": t_setup, "solve": t_solve, "total": time.perf_counter() - t0},
    )
