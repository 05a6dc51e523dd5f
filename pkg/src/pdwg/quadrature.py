"""Conical-product quadrature on the reference triangle and tetrahedron.

Points are stored in barycentric coordinates so one rule serves every
simplex of the mesh; weights sum to the reference measure (1/2 for the
triangle, 1/6 for the tetrahedron).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "QuadratureRule",
    "tet_rule",
    "tri_rule",
    "refine_rule",
    "integrate_tet",
    "integrate_tri",
]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, dim+1) barycentric
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    @property
    def reference_measure(self) -> float:
        return 1.0 / 6.0 if self.dim == 3 else 0.5

    def physical_points(self, vertices: np.ndarray) -> np.ndarray:
        """Map to physical points; ``vertices`` is (..., dim+1, 3)."""
        return np.einsum("qa,...ax->...qx", self.points, vertices)

    def scaled_weights(self, measure) -> np.ndarray:
        """Weights for simplices of the given measure(s), shape (..., nq)."""
        measure = np.asarray(measure, dtype=float)
        return measure[..., None] * (self.weights / self.reference_measure)


def _jacobi01(n: int, alpha: float):
    # Gauss-Jacobi on [0, 1] for the weight (1 - x)^alpha
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1.0)


def _legendre01(n: int):
    t, w = roots_legendre(n)
    return 0.5 * (1.0 + t), 0.5 * w


@lru_cache(maxsize=None)
def tet_rule(degree: int = 4) -> QuadratureRule:
    """Collapsed-coordinate rule exact for polynomials of total degree ``degree``."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = degree // 2 + 1
    a, wa = _jacobi01(n, 2.0)
    b, wb = _jacobi01(n, 1.0)
    c, wc = _legendre01(n)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    pts = np.stack([1.0 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    rule = QuadratureRule(pts, W.ravel(), degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def tri_rule(degree: int = 4) -> QuadratureRule:
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = degree // 2 + 1
    a, wa = _jacobi01(n, 1.0)
    b, wb = _legendre01(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = wa[:, None] * wb[None, :]
    x = A
    y = B * (1.0 - A)
    pts = np.stack([1.0 - x - y, x, y], axis=-1).reshape(-1, 3)
    rule = QuadratureRule(pts, W.ravel(), degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def _red_children(dim: int) -> np.ndarray:
    """Barycentric vertices of the uniform (red) children, shape (nchild, dim+1, dim+1)."""
    e = np.eye(dim + 1)

    def mid(i, j):
        return 0.5 * (e[i] + e[j])

    if dim == 2:
        children = [
            [e[0], mid(0, 1), mid(0, 2)],
            [mid(0, 1), e[1], mid(1, 2)],
            [mid(0, 2), mid(1, 2), e[2]],
            [mid(1, 2), mid(0, 2), mid(0, 1)],
        ]
    else:
        m01, m02, m03 = mid(0, 1), mid(0, 2), mid(0, 3)
        m12, m13, m23 = mid(1, 2), mid(1, 3), mid(2, 3)
        children = [
            [e[0], m01, m02, m03],
            [m01, e[1], m12, m13],
            [m02, m12, e[2], m23],
            [m03, m13, m23, e[3]],
            # octahedron split along the m02-m13 diagonal
            [m01, m02, m03, m13],
            [m01, m02, m12, m13],
            [m02, m03, m13, m23],
            [m02, m12, m13, m23],
        ]
    return np.array(children)


@lru_cache(maxsize=None)
def refine_rule(rule: QuadratureRule, levels: int = 1) -> QuadratureRule:
    """Composite rule on ``levels`` rounds of uniform subdivision."""
    if levels <= 0:
        return rule
    children = _red_children(rule.dim)
    nchild = children.shape[0]
    pts = np.einsum("qa,cax->cqx", rule.points, children).reshape(-1, rule.dim + 1)
    wts = np.tile(rule.weights / nchild, nchild)
    out = QuadratureRule(pts, wts, rule.degree)
    return refine_rule(out, levels - 1)


def integrate_tet(func, vertices: np.ndarray, rule: QuadratureRule | None = None):
    """Integrate ``func(points)`` over tetrahedra with (..., 4, 3) vertex arrays.

    ``func`` receives physical points of shape (..., nq, 3) and returns
    (..., nq) or (..., nq, k).
    """
    rule = rule or tet_rule(4)
    vertices = np.asarray(vertices, dtype=float)
    d = vertices[..., 1:, :] - vertices[..., :1, :]
    vol = np.abs(np.linalg.det(d)) / 6.0
    vals = np.asarray(func(rule.physical_points(vertices)))
    w = rule.scaled_weights(vol)
    if vals.ndim == w.ndim:
        return np.sum(w * vals, axis=-1)
    return np.einsum("...q,...qk->...k", w, vals)


def integrate_tri(func, vertices: np.ndarray, rule: QuadratureRule | None = None):
    rule = rule or tri_rule(4)
    vertices = np.asarray(vertices, dtype=float)
    area = 0.5 * np.linalg.norm(
        np.cross(vertices[..., 1, :] - vertices[..., 0, :], vertices[..., 2, :] - vertices[..., 0, :]),
        axis=-1,
    )
    vals = np.asarray(func(rule.physical_points(vertices)))
    w = rule.scaled_weights(area)
    if vals.ndim == w.ndim:
        return np.sum(w * vals, axis=-1)
    return np.einsum("...q,...qk->...k", w, vals)
