"""Lowest-order weak gradient / weak curl kernels and L2 projections.

With piecewise-constant test fields the volume terms of the weak
operators drop out, leaving face sums:

    grad_w v = (1/|T|) sum_F |F| v_b n_F
    curl_w v = -(1/|T|) sum_F |F| v_b x n_F

with n_F the element-outward normal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureRule, refine_rule, tet_rule, tri_rule

__all__ = [
    "ScalarWeakFn0",
    "VectorWeakFn0",
    "ElementGeometry",
    "element_geometry",
    "weak_gradient_p0",
    "weak_curl_p0",
    "project_cell",
    "project_face",
    "cell_integrals",
    "face_integrals",
]

# local face i is opposite local vertex i
LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True)
class ScalarWeakFn0:
    v0: float
    vb: np.ndarray  # (4,)

    def __post_init__(self):
        vb = np.asarray(self.vb, dtype=float).reshape(4)
        object.__setattr__(self, "vb", vb)
        if not (np.isfinite(self.v0) and np.all(np.isfinite(vb))):
            raise ValueError("weak function values must be finite")


@dataclass(frozen=True)
class VectorWeakFn0:
    v0: np.ndarray  # (3,)
    vb: np.ndarray  # (4, 3), tangential to the faces

    def __post_init__(self):
        object.__setattr__(self, "v0", np.asarray(self.v0, dtype=float).reshape(3))
        object.__setattr__(self, "vb", np.asarray(self.vb, dtype=float).reshape(4, 3))


@dataclass(frozen=True)
class ElementGeometry:
    vertices: np.ndarray  # (4, 3)
    volume: float
    areas: np.ndarray  # (4,)
    normals: np.ndarray  # (4, 3) outward
    diameter: float


def element_geometry(vertices) -> ElementGeometry:
    X = np.asarray(vertices, dtype=float).reshape(4, 3)
    vol = np.linalg.det(X[1:] - X[0]) / 6.0
    if vol == 0:
        raise ValueError("degenerate tetrahedron")
    areas = np.empty(4)
    normals = np.empty((4, 3))
    for i, (a, b, c) in enumerate(LOCAL_FACES):
        cr = np.cross(X[b] - X[a], X[c] - X[a])
        nrm = np.linalg.norm(cr)
        areas[i] = 0.5 * nrm
        n = cr / nrm
        if np.dot(n, X[a] - X[i]) < 0:
            n = -n
        normals[i] = n
    diam = max(np.linalg.norm(X[i] - X[j]) for i in range(4) for j in range(i + 1, 4))
    return ElementGeometry(X, abs(vol), areas, normals, diam)


def _geom(element) -> ElementGeometry:
    return element if isinstance(element, ElementGeometry) else element_geometry(element)


def weak_gradient_p0(element, v: ScalarWeakFn0) -> np.ndarray:
    g = _geom(element)
    return (g.areas * v.vb) @ g.normals / g.volume


def weak_curl_p0(element, v: VectorWeakFn0, tol: float = 1e-12) -> np.ndarray:
    g = _geom(element)
    normal_part = np.abs(np.sum(v.vb * g.normals, axis=1))
    if np.any(normal_part > tol * np.maximum(np.linalg.norm(v.vb, axis=1), 1.0)):
        raise ValueError("face values of a vector weak function must be tangential")
    return -np.sum(g.areas[:, None] * np.cross(v.vb, g.normals), axis=0) / g.volume


def project_cell(f, element, rule: QuadratureRule | None = None):
    """Volume mean of ``f`` (scalar or vector valued) over one tetrahedron."""
    g = _geom(element)
    rule = rule or tet_rule(4)
    pts = rule.physical_points(g.vertices)
    vals = np.asarray(f(pts), dtype=float)
    w = rule.weights / rule.reference_measure
    if vals.ndim == 1:
        return float(w @ vals)
    return w @ vals


def project_face(f, vertices, rule: QuadratureRule | None = None, normal=None, tangential=False):
    """Face mean of ``f``; with ``tangential`` the mean of (n x f) x n."""
    P = np.asarray(vertices, dtype=float).reshape(3, 3)
    rule = rule or tri_rule(4)
    vals = np.asarray(f(rule.physical_points(P)), dtype=float)
    w = rule.weights / rule.reference_measure
    mean = w @ vals if vals.ndim > 1 else float(w @ vals)
    if not tangential:
        return mean
    if normal is None:
        cr = np.cross(P[1] - P[0], P[2] - P[0])
        normal = cr / np.linalg.norm(cr)
    n = np.asarray(normal, dtype=float)
    return np.cross(np.cross(n, mean), n)


def _grouped(func, verts, measure, rule, refine_mask, levels):
    # integrals of func over simplices, finer rule where refine_mask is set
    nel = verts.shape[0]
    out = None
    groups = [(np.ones(nel, dtype=bool), rule)]
    if refine_mask is not None and levels > 0 and np.any(refine_mask):
        refine_mask = np.asarray(refine_mask, dtype=bool)
        groups = [(~refine_mask, rule), (refine_mask, refine_rule(rule, levels))]
    for sel, r in groups:
        if not np.any(sel):
            continue
        pts = r.physical_points(verts[sel])
        vals = np.asarray(func(pts), dtype=float)
        w = r.scaled_weights(measure[sel])
        res = np.sum(w * vals, axis=-1) if vals.ndim == w.ndim else np.einsum("eq,eqk->ek", w, vals)
        if out is None:
            out = np.zeros((nel,) + res.shape[1:])
        out[sel] = res
    return out


def cell_integrals(mesh, func, rule: QuadratureRule | None = None, refine_mask=None, levels: int = 1):
    """Per-element integrals of ``func`` (points (E, nq, 3) -> (E, nq[, k]))."""
    rule = rule or tet_rule(4)
    return _grouped(func, mesh.element_vertices(), mesh.volumes, rule, refine_mask, levels)


def face_integrals(mesh, func, faces=None, rule: QuadratureRule | None = None, refine_mask=None, levels: int = 1):
    rule = rule or tri_rule(4)
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    return _grouped(func, mesh.face_vertices(faces), mesh.face_area[faces], rule, refine_mask, levels)
