"""Manufactured div-curl test problems.

Each problem supplies eps (diagonal), the exact field u, f = div(eps u),
g = curl u, and the voxel domain. The normal flux phi1 = eps u . n is
evaluated from u on boundary faces during assembly. Fields take point
arrays of shape (..., 3).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import VoxelDomainSpec

__all__ = ["PolarPotential", "ProblemSpec", "polar_field", "example", "EXAMPLE_IDS", "GAMMA_OPTIONS"]

EXAMPLE_IDS = (1, 2, 3, 4, 5, 6)
GAMMA_OPTIONS = (5 / 4, 1.0, 2 / 3)
PI = np.pi


@dataclass(frozen=True)
class PolarPotential:
    """Stream function r^gamma sin(a theta) about the z-parallel line through ``center``.

    theta = atan2 angle taken in [branch_start, branch_start + 2 pi), plus ``c``.
    """

    center: tuple[float, float] = (0.0, 0.0)
    gamma: float = 2 / 3
    a: float = 2 / 3
    c: float = 0.0
    branch_start: float = -PI

    def polar(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        r = np.hypot(dx, dy)
        th = np.mod(np.arctan2(dy, dx) - self.branch_start, 2 * PI) + self.branch_start
        return r, th

    def potential(self, pts):
        r, th = self.polar(pts)
        return r**self.gamma * np.sin(self.a * (th + self.c))

    def velocity(self, pts):
        """curl (0, 0, psi) = (d psi/dy, -d psi/dx, 0)."""
        r, th = self.polar(pts)
        phase = th + self.c
        g, a = self.gamma, self.a
        s, co = np.sin(a * phase), np.cos(a * phase)
        rp = r ** (g - 1.0)
        ux = rp * (g * s * np.sin(th) + a * co * np.cos(th))
        uy = rp * (-g * s * np.cos(th) + a * co * np.sin(th))
        return np.stack([ux, uy, np.zeros_like(ux)], axis=-1)

    def curl_z(self, pts):
        r, th = self.polar(pts)
        return (self.a**2 - self.gamma**2) * r ** (self.gamma - 2.0) * np.sin(self.a * (th + self.c))


def polar_field(pp: PolarPotential, point) -> tuple[np.ndarray, float]:
    point = np.asarray(point, dtype=float)
    r, _ = pp.polar(point)
    if r == 0:
        raise ValueError("polar field is undefined on its center line")
    return pp.velocity(point), float(pp.curl_z(point))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    id: int
    name: str
    domain: VoxelDomainSpec
    eps: np.ndarray
    u: Callable
    f: Callable
    g: Callable
    rho: Callable[[float], tuple[float, float]]
    singular_lines: tuple = ()
    formula: str = ""
    gamma: float | None = None
    reference: dict = field(default_factory=dict)

    def phi1(self, pts, normal):
        """Normal flux eps u . n for outward normal(s) ``normal``."""
        return np.sum(self.u(pts) * self.eps * np.asarray(normal), axis=-1)

    def rho_table(self, ps=(2, 3, 4, 5)) -> dict:
        return {p: self.rho(p) for p in ps}


def _zeros(pts):
    return np.zeros(np.shape(pts)[:-1])


def _rho_ex1(p):
    r = 1.0 if p == 2 else 9.0 * 10.0 ** (p - 1)
    return r, r


def _rho_ex4(p):
    if p == 2:
        return 1.0, 1.0
    r = 3e3 if p <= 3 else 3e4
    return r, r


def _rho_ex5(p):
    r = 1.0 if p == 2 else 5e4
    return r, r


# rows: 1/h -> (e_h, |||(e_lam, e_q)|||, |||s_h|||) at p = 2
_REF_P2 = {
    1: {2: (1.52e-01, 3.27e-02, 1.52e-03), 4: (7.67e-02, 1.82e-02, 3.05e-04),
        8: (3.82e-02, 9.37e-03, 5.10e-05), 16: (1.91e-02, 4.72e-03, 9.29e-06)},
    2: {2: (1.28e-01, 3.70e-02, 1.02e-03), 4: (8.25e-02, 2.42e-02, 3.18e-04),
        8: (5.28e-02, 1.55e-02, 9.66e-05), 16: (3.35e-02, 9.92e-03, 2.96e-05)},
    3: {2: (1.49, 3.48, 5.16e-01), 4: (1.02, 2.60, 2.66e-01),
        8: (6.84e-01, 1.86, 1.01e-01), 16: (4.69e-01, 1.30, 3.49e-02)},
    5: {2: (2.60e-01, 3.79e-01, 5.83e-02), 4: (2.03e-01, 2.55e-01, 2.93e-02),
        8: (1.70e-01, 1.67e-01, 1.03e-02), 16: (1.53e-01, 1.07e-01, 3.26e-03)},
    6: {2: (2.18e-01, 2.98e-01, 5.18e-02), 4: (1.75e-01, 2.16e-01, 2.67e-02),
        8: (1.47e-01, 1.47e-01, 9.49e-03), 16: (1.33e-01, 9.61e-02, 3.04e-03)},
}
_REF_EX4_P2 = {
    5 / 4: {2: (3.96e-01, 9.07e-01, 6.51e-02), 4: (2.07e-01, 5.01e-01, 3.23e-02),
            8: (1.06e-01, 2.67e-01, 9.48e-03), 16: (5.38e-02, 1.39e-01, 2.17e-03)},
    1.0: {2: (5.33e-01, 1.22, 1.14e-01), 4: (3.01e-01, 7.27e-01, 5.65e-02),
          8: (1.63e-01, 4.15e-01, 1.79e-02), 16: (8.86e-02, 2.30e-01, 4.62e-03)},
    2 / 3: {2: (8.87e-01, 2.09, 2.77e-01), 4: (5.77e-01, 1.45, 1.38e-01),
            8: (3.62e-01, 9.67e-01, 4.92e-02), 16: (2.29e-01, 6.26e-01, 1.55e-02)},
}

# two-hole slab [-1, 3/2]^2 x [0, 1/2] minus two through-holes, lattice unit 1/2
_TWO_HOLES = VoxelDomainSpec(((-2, -2, 0), (3, 3, 1)), (((-1, -1, 0), (0, 0, 1)), ((1, -1, 0), (2, 0, 1))), 0.5)
# one-hole slab [-1, 1/2]^2 x [0, 1/2] minus [-1/2, 0] x [0, 1/2] x [0, 1/2]
_ONE_HOLE = VoxelDomainSpec(((-2, -2, 0), (1, 1, 1)), (((-1, 0, 0), (0, 1, 1)),), 0.5)


def _example1():
    eps = np.array([3.0, 2.0, 1.0])

    def u(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([np.sin(PI * X) * np.cos(PI * Y) + X, -np.sin(PI * Y) * np.cos(PI * X) + Y, Z], axis=-1)

    def f(x):
        return PI * np.cos(PI * x[..., 0]) * np.cos(PI * x[..., 1]) + 6.0

    def g(x):
        s = 2 * PI * np.sin(PI * x[..., 0]) * np.sin(PI * x[..., 1])
        z = np.zeros_like(s)
        return np.stack([z, z, s], axis=-1)

    return ProblemSpec(
        1, "smooth field on the unit cube", VoxelDomainSpec(((0, 0, 0), (1, 1, 1))), eps, u, f, g, _rho_ex1,
        formula="u = (sin(pi x) cos(pi y), -sin(pi y) cos(pi x), 0) + (x, y, z), eps = diag(3, 2, 1)",
        reference=_REF_P2[1],
    )


def _polar_problem(pid, name, domain, potentials, rho, lines, formula, extra=None, gamma=None, reference=None):
    """Sum of polar stream-function fields plus an optional smooth field (u, f, g)."""
    eps = np.ones(3)

    def u(x):
        out = sum(pp.velocity(x) for pp in potentials)
        if extra is not None:
            out = out + extra[0](x)
        return out

    def f(x):
        return extra[1](x) if extra is not None else _zeros(x)

    def g(x):
        cz = sum(pp.curl_z(x) for pp in potentials)
        z = np.zeros_like(cz)
        out = np.stack([z, z, cz], axis=-1)
        if extra is not None:
            out = out + extra[2](x)
        return out

    return ProblemSpec(pid, name, domain, eps, u, f, g, rho, tuple(lines), formula, gamma, reference or {})


def _example2():
    # L-shape ((-1,1)^2 minus [0,1]x[-1,0]) x (0,1); theta in [0, 3pi/2] from the face y = 0, x > 0
    dom = VoxelDomainSpec(((-1, -1, 0), (1, 1, 1)), (((0, -1, 0), (1, 0, 1)),), 1.0)
    pp = PolarPotential((0.0, 0.0), 2 / 3, 2 / 3, 0.0, branch_start=0.0)
    return _polar_problem(2, "L-shape singular field", dom, [pp], _rho_ex1, [(0.0, 0.0)],
                          "u = curl(0, 0, r^(2/3) sin(2 theta / 3)), eps = I", reference=_REF_P2[2])


def _example3():
    pps = [PolarPotential((0.0, 0.0), 0.5, 2.0), PolarPotential((1.0, 0.0), 2 / 3, 2.0)]
    return _polar_problem(3, "two-hole slab, two singular corners", _TWO_HOLES, pps, _rho_ex5,
                          [(0.0, 0.0), (1.0, 0.0)],
                          "u = curl(0, 0, r1^(1/2) sin(2 theta1) + r2^(2/3) sin(2 theta2)), eps = I",
                          reference=_REF_P2[3])


def _example4(gamma):
    if not any(abs(gamma - g) < 1e-12 for g in GAMMA_OPTIONS):
        raise ValueError(f"gamma must be one of {GAMMA_OPTIONS}")
    gamma = next(g for g in GAMMA_OPTIONS if abs(gamma - g) < 1e-12)
    pp = PolarPotential((0.0, 0.0), gamma, 2.0)
    return _polar_problem(4, f"one-hole slab, gamma={gamma:.4g}", _ONE_HOLE, [pp], _rho_ex4, [(0.0, 0.0)],
                          f"u = curl(0, 0, r^{gamma:.4g} sin(2 theta)), eps = I", gamma=gamma,
                          reference=_REF_EX4_P2[gamma])


def _example5():
    beta = 1 / 40
    pps = [PolarPotential((0.0, 0.0), 4 / 5, 1.0), PolarPotential((1.0, 0.0), 2 / 3, 1.0)]

    def w(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return beta * np.stack([np.exp(Y) * np.sin(Z), np.exp(X) * np.sin(Z), Z], axis=-1)

    def div_w(x):
        return beta * np.ones(np.shape(x)[:-1])

    def curl_w(x):
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        return beta * np.stack(
            [-np.exp(X) * np.cos(Z), np.exp(Y) * np.cos(Z), (np.exp(X) - np.exp(Y)) * np.sin(Z)], axis=-1
        )

    return _polar_problem(5, "two-hole slab with smooth additive field", _TWO_HOLES, pps, _rho_ex5,
                          [(0.0, 0.0), (1.0, 0.0)],
                          "u = curl(0, 0, r1^(4/5) sin(theta1) + r2^(2/3) sin(theta2))"
                          " + (1/40) (e^y sin z, e^x sin z, z), eps = I",
                          extra=(w, div_w, curl_w), reference=_REF_P2[5])


def _example6():
    beta = 1 / 8
    pp = PolarPotential((0.0, 0.0), 2 / 3, 1.0)

    def w(x):
        X, Y, Z = PI * x[..., 0], PI * x[..., 1], PI * x[..., 2]
        return beta * np.stack(
            [np.sin(X) * np.cos(Y) * np.sin(Z), np.cos(X) * np.sin(Y) * np.sin(Z), np.zeros_like(X)], axis=-1
        )

    def div_w(x):
        X, Y, Z = PI * x[..., 0], PI * x[..., 1], PI * x[..., 2]
        return beta * 2 * PI * np.cos(X) * np.cos(Y) * np.sin(Z)

    def curl_w(x):
        X, Y, Z = PI * x[..., 0], PI * x[..., 1], PI * x[..., 2]
        return beta * PI * np.stack(
            [-np.cos(X) * np.sin(Y) * np.cos(Z), np.sin(X) * np.cos(Y) * np.cos(Z), np.zeros_like(X)], axis=-1
        )

    return _polar_problem(6, "one-hole slab with smooth additive field", _ONE_HOLE, [pp], _rho_ex5, [(0.0, 0.0)],
                          "u = curl(0, 0, r^(2/3) sin(theta))"
                          " + (1/8) (sin(pi x) cos(pi y) sin(pi z), cos(pi x) sin(pi y) sin(pi z), 0), eps = I",
                          extra=(w, div_w, curl_w), reference=_REF_P2[6])


def example(id: int, p: float = 2.0, gamma: float = 2 / 3) -> ProblemSpec:
    """Problem ``id`` (1..6); ``gamma`` selects the Example-4 variant.

    ``p`` is accepted for symmetry with the run grid; the returned spec
    carries the full rho table via ``spec.rho(p)``.
    """
    if id == 1:
        return _example1()
    if id == 2:
        return _example2()
    if id == 3:
        return _example3()
    if id == 4:
        return _example4(gamma)
    if id == 5:
        return _example5()
    if id == 6:
        return _example6()
    raise ValueError(f"unknown example id {id!r}; expected one of {EXAMPLE_IDS}")
