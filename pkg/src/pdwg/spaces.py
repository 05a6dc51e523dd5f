"""Global degrees of freedom for the four lowest-order weak Galerkin spaces.

System ordering::

    [ lam0 | lamb | q0 | qb | u | s0 | sb | mult ]

``lam0``/``s0`` hold one value per element, ``lamb`` one per face, ``q0``
and ``u`` three per element, ``qb`` two tangential coefficients per
interior face (in the face frame), ``sb`` one per interior face followed
by one shared constant per inner boundary component. ``mult`` is the
Lagrange multiplier enforcing sum_T |T| lam0_T = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryComponent, Mesh, boundary_components

__all__ = ["DofMap", "ConstraintSet", "build_dof_map", "scatter", "FREE", "ZERO", "TIED"]

FREE, ZERO, TIED = 0, 1, 2

# element-local layout used by element_dofs / scatter
LOCAL_LAYOUT = {
    "lam0": slice(0, 1),
    "lamb": slice(1, 5),
    "q0": slice(5, 8),
    "qb": slice(8, 16),  # face-major, two tangential coefficients per face
    "u": slice(16, 19),
    "s0": slice(19, 20),
    "sb": slice(20, 24),
}
N_LOCAL = 24


@dataclass(frozen=True)
class ConstraintSet:
    s_face: np.ndarray  # (NF,) FREE / ZERO / TIED
    q_face: np.ndarray  # (NF,) FREE / ZERO
    mean_zero: np.ndarray  # (NE,) element volumes


@dataclass(frozen=True, eq=False)
class DofMap:
    n_elements: int
    n_faces: int
    n_interior: int
    n_inner_components: int
    offsets: dict
    face_s_index: np.ndarray  # (NF,) global s_b index or -1
    face_q_index: np.ndarray  # (NF,) global index of first tangential q_b coefficient or -1
    constraints: ConstraintSet

    @property
    def dim_u(self) -> int:
        return 3 * self.n_elements

    @property
    def dim_s(self) -> int:
        return self.n_elements + self.n_interior + self.n_inner_components

    @property
    def dim_lam(self) -> int:
        return self.n_elements + self.n_faces + 1

    @property
    def dim_q(self) -> int:
        return 3 * self.n_elements + 2 * self.n_interior

    @property
    def size(self) -> int:
        return self.dim_u + self.dim_s + self.dim_lam + self.dim_q

    def block(self, name: str) -> slice:
        names = list(self.offsets)
        i = names.index(name)
        stop = self.offsets[names[i + 1]] if i + 1 < len(names) else self.size
        return slice(self.offsets[name], stop)

    def lam0(self) -> np.ndarray:
        return self.offsets["lam0"] + np.arange(self.n_elements)

    def lamb(self) -> np.ndarray:
        return self.offsets["lamb"] + np.arange(self.n_faces)

    def q0(self) -> np.ndarray:
        return self.offsets["q0"] + np.arange(3 * self.n_elements).reshape(-1, 3)

    def u(self) -> np.ndarray:
        return self.offsets["u"] + np.arange(3 * self.n_elements).reshape(-1, 3)

    def s0(self) -> np.ndarray:
        return self.offsets["s0"] + np.arange(self.n_elements)

    @property
    def mult(self) -> int:
        return self.offsets["mult"]

    def qb_faces(self) -> np.ndarray:
        """(NF, 2) global q_b indices, -1 on boundary faces."""
        base = self.face_q_index
        out = np.stack([base, base + 1], axis=1)
        out[base < 0] = -1
        return out

    def element_dofs(self, mesh: Mesh) -> np.ndarray:
        """(NE, 24) global indices in the element-local layout, -1 where dropped."""
        ne = self.n_elements
        ef = mesh.elem_faces
        tab = -np.ones((ne, N_LOCAL), dtype=np.int64)
        tab[:, LOCAL_LAYOUT["lam0"]] = self.lam0()[:, None]
        tab[:, LOCAL_LAYOUT["lamb"]] = self.lamb()[ef]
        tab[:, LOCAL_LAYOUT["q0"]] = self.q0()
        tab[:, LOCAL_LAYOUT["qb"]] = self.qb_faces()[ef].reshape(ne, 8)
        tab[:, LOCAL_LAYOUT["u"]] = self.u()
        tab[:, LOCAL_LAYOUT["s0"]] = self.s0()[:, None]
        tab[:, LOCAL_LAYOUT["sb"]] = self.face_s_index[ef]
        return tab

    def split(self, x: np.ndarray) -> dict:
        """Coefficient blocks of a global vector."""
        x = np.asarray(x)
        ne = self.n_elements
        o = self.offsets
        qb = np.zeros((self.n_faces, 2))
        has = self.face_q_index >= 0
        qb[has, 0] = x[self.face_q_index[has]]
        qb[has, 1] = x[self.face_q_index[has] + 1]
        return {
            "lam0": x[o["lam0"] : o["lam0"] + ne],
            "lamb": x[o["lamb"] : o["lamb"] + self.n_faces],
            "q0": x[o["q0"] : o["q0"] + 3 * ne].reshape(ne, 3),
            "qb": qb,
            "u": x[o["u"] : o["u"] + 3 * ne].reshape(ne, 3),
            "s0": x[o["s0"] : o["s0"] + ne],
            "sb": self.face_values_s(x),
            "mult": float(x[o["mult"]]),
        }

    def face_values_s(self, x: np.ndarray) -> np.ndarray:
        """s_b per face with constraints resolved (zero on the exterior boundary)."""
        out = np.zeros(self.n_faces)
        has = self.face_s_index >= 0
        out[has] = x[self.face_s_index[has]]
        return out


def build_dof_map(mesh: Mesh, components: list[BoundaryComponent] | None = None) -> DofMap:
    components = boundary_components(mesh) if components is None else components
    ne, nf = mesh.n_elements, mesh.n_faces
    interior = mesh.interior_faces
    ni = interior.size
    inner = [c for c in components if not c.exterior]
    L = len(inner)

    sizes = {
        "lam0": ne,
        "lamb": nf,
        "q0": 3 * ne,
        "qb": 2 * ni,
        "u": 3 * ne,
        "s0": ne,
        "sb": ni + L,
        "mult": 1,
    }
    offsets, acc = {}, 0
    for k, v in sizes.items():
        offsets[k] = acc
        acc += v

    s_face = np.full(nf, ZERO, dtype=np.int8)
    q_face = np.full(nf, ZERO, dtype=np.int8)
    face_s = -np.ones(nf, dtype=np.int64)
    face_q = -np.ones(nf, dtype=np.int64)
    s_face[interior] = FREE
    q_face[interior] = FREE
    face_s[interior] = offsets["sb"] + np.arange(ni)
    face_q[interior] = offsets["qb"] + 2 * np.arange(ni)
    for k, comp in enumerate(inner):
        s_face[comp.faces] = TIED
        face_s[comp.faces] = offsets["sb"] + ni + k

    cons = ConstraintSet(s_face, q_face, np.asarray(mesh.volumes).copy())
    return DofMap(ne, nf, ni, L, offsets, face_s, face_q, cons)


def scatter(local, element: int, dofmap: DofMap, mesh: Mesh) -> list[tuple[int, float]]:
    """Map a 24-entry element-local vector to (global index, value) pairs.

    Contributions to constrained-zero face values are dropped; tied faces
    land on their component constant.
    """
    local = np.asarray(local, dtype=float)
    if local.shape != (N_LOCAL,):
        raise IndexError(f"local contribution must have {N_LOCAL} entries")
    if not 0 <= element < dofmap.n_elements:
        raise IndexError("element id out of range")
    idx = dofmap.element_dofs(mesh)[element]
    return [(int(i), float(v)) for i, v in zip(idx, local) if i >= 0]
