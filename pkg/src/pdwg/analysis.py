"""Error quantities, convergence rates, tables and VTK field export."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import PdwgParams, s1_value, s2_value, singular_masks
from .mesh import Mesh
from .quadrature import refine_rule, tet_rule
from .weakcalc import cell_integrals

__all__ = [
    "ErrorRecord",
    "RateTable",
    "project_cells",
    "error_lq",
    "triple_norm_dual",
    "triple_norm_s",
    "rate",
    "evaluate",
    "export_field",
    "read_vtk",
]


def project_cells(mesh: Mesh, func, quad_degree: int = 4, singular_lines=(), refine_levels: int = 1) -> np.ndarray:
    """Cell means of ``func`` (the piecewise-constant L2 projection)."""
    emask, _ = singular_masks(mesh, singular_lines)
    ints = cell_integrals(mesh, func, tet_rule(quad_degree), emask, refine_levels)
    return ints / (mesh.volumes[:, None] if ints.ndim == 2 else mesh.volumes)


def error_lq(u_h, reference, eps, q: float, mesh: Mesh, quad_degree: int = 4, singular_lines=(),
             refine_levels: int = 1) -> float:
    """|| eps^(1/q) (reference - u_h) ||_{L^q} for cellwise-constant ``u_h``.

    ``reference`` is a point-evaluable field or a (NE, 3) array of cell
    constants; eps is diagonal and powered componentwise.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    u_h = np.asarray(u_h, dtype=float)
    w = np.asarray(eps, dtype=float) ** (1.0 / q)
    if callable(reference):
        emask, _ = singular_masks(mesh, singular_lines)
        total = 0.0
        for sel, lev in ((~emask, 0), (emask, refine_levels)):
            if not np.any(sel):
                continue
            rule = refine_rule(tet_rule(quad_degree), lev)
            pts = rule.physical_points(mesh.element_vertices(sel))
            d = (reference(pts) - u_h[sel][:, None, :]) * w
            total += float(np.sum(rule.scaled_weights(mesh.volumes[sel]) * np.linalg.norm(d, axis=-1) ** q))
        return total ** (1.0 / q)
    d = (np.asarray(reference, dtype=float) - u_h) * w
    return float(np.sum(mesh.volumes * np.linalg.norm(d, axis=1) ** q) ** (1.0 / q))


def triple_norm_dual(lam: tuple, qh: tuple, params: PdwgParams, mesh: Mesh) -> float:
    """s1 evaluated at its own arguments, then the p-th root."""
    return max(s1_value(mesh, lam, qh, params), 0.0) ** (1.0 / params.p)


def triple_norm_s(s: tuple, params: PdwgParams, mesh: Mesh) -> float:
    return max(s2_value(mesh, s, params), 0.0) ** (1.0 / params.q)


def rate(e_coarse: float, e_fine: float) -> float:
    """Observed order for a halved mesh size."""
    return math.log2(e_coarse / e_fine)


@dataclass
class ErrorRecord:
    inv_h: int
    e_h: float
    eta_h: float
    dual: float
    s_norm: float
    iterations: int
    p: float = 2.0
    n_elements: int = 0
    n_dofs: int = 0
    converged: bool = True


COLUMNS = [("e_h", "||eps^(1/q) e_h||_Lq"), ("eta_h", "||eps^(1/q) eta_h||_Lq"),
           ("dual", "|||(e_lam, e_q)|||"), ("s_norm", "|||s_h|||")]


@dataclass
class RateTable:
    records: list = field(default_factory=list)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.inv_h)

    def rates(self, column: str) -> list:
        vals = [getattr(r, column) for r in self.records]
        return [rate(a, b) if a > 0 and b > 0 else float("nan") for a, b in zip(vals, vals[1:])]

    def rows(self) -> list[dict]:
        out = []
        rates = {c: [None] + self.rates(c) for c, _ in COLUMNS}
        for i, r in enumerate(self.records):
            row = {"p": r.p, "inv_h": r.inv_h}
            for c, _ in COLUMNS:
                row[c] = getattr(r, c)
                row[c + "_rate"] = rates[c][i]
            row.update(iterations=r.iterations, n_elements=r.n_elements, n_dofs=r.n_dofs, converged=r.converged)
            out.append(row)
        return out

    def to_csv(self, path=None) -> str:
        rows = self.rows()
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_markdown(self, path=None) -> str:
        head = ["p", "1/h"]
        for _, label in COLUMNS:
            head += [label.replace("|", "\\|"), "rate"]
        head.append("It.")
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for row in self.rows():
            cells = [f"{row['p']:g}", str(row["inv_h"])]
            for c, _ in COLUMNS:
                cells.append(f"{row[c]:.2e}")
                r = row[c + "_rate"]
                cells.append("--" if r is None else f"{r:.2f}")
            cells.append(str(row["iterations"]))
            lines.append("| " + " | ".join(cells) + " |")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def evaluate(report, problem, mesh: Mesh, params: PdwgParams, inv_h: int, quad_degree: int = 4,
             refine_levels: int = 1):
    """ErrorRecord plus the cellwise field eta_h = Q_h u - u_h."""
    b = report.blocks
    lines = problem.singular_lines
    qq = params.q
    Qu = project_cells(mesh, problem.u, quad_degree, lines, refine_levels)
    eta = Qu - b["u"]
    rec = ErrorRecord(
        inv_h=inv_h,
        e_h=error_lq(b["u"], problem.u, problem.eps, qq, mesh, quad_degree, lines, refine_levels),
        eta_h=error_lq(b["u"], Qu, problem.eps, qq, mesh),
        dual=triple_norm_dual((b["lam0"], b["lamb"]), (b["q0"], b["qb"]), params, mesh),
        s_norm=triple_norm_s((b["s0"], b["sb"]), params, mesh),
        iterations=report.iterations,
        p=params.p,
        n_elements=mesh.n_elements,
        n_dofs=report.dofmap.size,
        converged=report.converged,
    )
    return rec, eta


VTK_TETRA = 10


def export_field(mesh: Mesh, values, path, name: str = "eta_h") -> Path:
    """Legacy ASCII VTK unstructured grid with one cell vector field.

    Layout (one item per line, numbers in %.17g)::

        # vtk DataFile Version 3.0
        <name>
        ASCII
        DATASET UNSTRUCTURED_GRID
        POINTS <NV> double
        x y z                       (NV lines)
        CELLS <NE> <5 NE>
        4 i j k l                   (NE lines)
        CELL_TYPES <NE>
        10                          (NE lines)
        CELL_DATA <NE>
        VECTORS <name> double
        vx vy vz                    (NE lines)
    """
    values = np.asarray(values, dtype=float)
    ne = mesh.n_elements
    if values.shape != (ne, 3):
        raise ValueError(f"expected ({ne}, 3) cell vectors, got {values.shape}")
    path = Path(path)
    fmt = "%.17g"
    with path.open("w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(mesh.vertices)} double\n")
        np.savetxt(fh, mesh.vertices, fmt=fmt)
        fh.write(f"CELLS {ne} {5 * ne}\n")
        np.savetxt(fh, np.hstack([np.full((ne, 1), 4), mesh.elements]), fmt="%d")
        fh.write(f"CELL_TYPES {ne}\n")
        np.savetxt(fh, np.full(ne, VTK_TETRA), fmt="%d")
        fh.write(f"CELL_DATA {ne}\n")
        fh.write(f"VECTORS {name} double\n")
        np.savetxt(fh, values, fmt=fmt)
    return path


def read_vtk(path) -> dict:
    """Parse files written by export_field."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens)
    out = {}
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([next(it).split() for _ in range(n)], dtype=float)
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.array([next(it).split() for _ in range(n)], dtype=np.int64)[:, 1:]
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = np.array([next(it) for _ in range(n)], dtype=np.int64)
        elif key == "VECTORS":
            n = len(out["cells"])
            out["name"] = parts[1]
            out["vectors"] = np.array([next(it).split() for _ in range(n)], dtype=float).reshape(n, 3)
    return out
