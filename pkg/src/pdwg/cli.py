"""Command line driver: ``pdwg run config.json`` and ``pdwg describe ID``.

A config is a single JSON object, for example::

    {"example": 1, "p": [2, 3], "refinements": [2, 4, 8],
     "overrides": {"tol": 1e-5}, "out": "results/ex1", "export_fields": true}

Exit status: 0 on success, 2 for an invalid config, 3 when some grid
point failed to converge (tables are still written), 4 when a linear
solve failed outright.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .analysis import COLUMNS, ErrorRecord, RateTable, evaluate, export_field
from .assembly import PdwgParams
from .mesh import build_mesh
from .problems import EXAMPLE_IDS, GAMMA_OPTIONS, example
from .solver import LinearSolveError, run_pdwg

__all__ = ["ConfigError", "ExperimentConfig", "run", "describe", "main"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_SOLVE_FAILED = 0, 2, 3, 4
OVERRIDE_KEYS = ("rho1", "rho2", "rho3", "eps0", "tol", "max_iters", "quad_degree")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    example: int
    p: list = field(default_factory=lambda: [2.0])
    refinements: list = field(default_factory=lambda: [2, 4, 8])
    gamma: float = 2 / 3
    overrides: dict = field(default_factory=dict)
    out: str = "results"
    export_fields: bool = False
    refine_levels: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.example not in EXAMPLE_IDS:
            raise ConfigError(f"example must be one of {EXAMPLE_IDS}, got {self.example!r}")
        if not self.p:
            raise ConfigError("p list is empty")
        for p in self.p:
            if not isinstance(p, (int, float)) or not p > 1:
                raise ConfigError(f"every p must exceed 1, got {p!r}")
        if not self.refinements:
            raise ConfigError("refinement list is empty")
        if len(set(self.refinements)) != len(self.refinements):
            raise ConfigError("refinements must be distinct")
        if self.example == 4 and not any(math.isclose(self.gamma, g) for g in GAMMA_OPTIONS):
            raise ConfigError(f"gamma for example 4 must be one of {GAMMA_OPTIONS}")
        dom = example(self.example, gamma=self.gamma).domain
        for r in self.refinements:
            if isinstance(r, bool) or not isinstance(r, int) or r <= 0:
                raise ConfigError(f"refinements are positive integers 1/h, got {r!r}")
            try:
                dom.refinement_for(r)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        unknown = set(self.overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ConfigError(f"unknown override(s): {sorted(unknown)}")
        q = self.overrides.get("quad_degree")
        if q is not None and (not isinstance(q, int) or q < 1):
            raise ConfigError("quad_degree must be a positive integer")
        if self.refine_levels < 0:
            raise ConfigError("refine_levels must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}")
        if "example" not in data:
            raise ConfigError("config needs an 'example' id")
        data = dict(data)
        for key in ("p", "refinements"):
            if key in data and not isinstance(data[key], list):
                data[key] = [data[key]]
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def params_for(self, p: float) -> PdwgParams:
        prob = example(self.example, p, self.gamma)
        r1, r2 = prob.rho(p)
        ov = self.overrides
        return PdwgParams(
            p=float(p),
            rho1=float(ov.get("rho1", r1)),
            rho2=float(ov.get("rho2", r2)),
            rho3=float(ov.get("rho3", 1.0)),
            eps0=ov.get("eps0"),
            tol=float(ov.get("tol", 1e-5)),
            max_iters=int(ov.get("max_iters", 100)),
        )

    @property
    def quad_degree(self) -> int:
        return int(self.overrides.get("quad_degree", 4))


def _stem(cfg: ExperimentConfig, p: float, inv_h: int | None = None) -> str:
    s = f"ex{cfg.example}"
    if cfg.example == 4:
        s += f"_gamma{cfg.gamma:.4g}".replace(".", "p")
    s += f"_p{p:g}"
    if inv_h is not None:
        s += f"_invh{inv_h}"
    return s


def _grid_point(cfg: ExperimentConfig, p: float, inv_h: int, out: Path) -> dict:
    prob = example(cfg.example, p, cfg.gamma)
    params = cfg.params_for(p)
    mesh = build_mesh(prob.domain, prob.domain.refinement_for(inv_h))
    entry = {"p": p, "inv_h": inv_h, "rho1": params.rho1, "rho2": params.rho2, "rho3": params.rho3,
             "eps0": params.eps0, "tol": params.tol, "max_iters": params.max_iters,
             "quad_degree": cfg.quad_degree, "n_elements": mesh.n_elements}
    try:
        rep = run_pdwg(prob, mesh, params, cfg.quad_degree, cfg.refine_levels)
    except LinearSolveError as exc:
        entry.update(error=str(exc), residual=exc.residual)
        return entry
    rec, eta = evaluate(rep, prob, mesh, params, inv_h, cfg.quad_degree, cfg.refine_levels)
    entry.update(record=asdict(rec), updates=rep.history, residual=rep.residual,
                 timings=rep.timings, converged=rep.converged)
    if cfg.export_fields:
        entry["vtk"] = str(export_field(mesh, eta, out / f"{_stem(cfg, p, inv_h)}_eta.vtk"))
    return entry


def run(cfg: ExperimentConfig, out=None, threads: int = 1) -> int:
    """Run the whole (p, 1/h) grid and write tables, fields and a JSON log."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(p, h) for p in cfg.p for h in sorted(cfg.refinements)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            entries = list(ex.map(_grid_point, [cfg] * len(jobs), *zip(*jobs), [out] * len(jobs)))
    else:
        entries = [_grid_point(cfg, p, h, out) for p, h in jobs]

    status = EXIT_OK
    csv_parts, md_parts = [], []
    for p in cfg.p:
        recs = [ErrorRecord(**e["record"]) for e in entries if e["p"] == p and "record" in e]
        table = RateTable(recs)
        csv_text = table.to_csv()
        csv_parts.append(csv_text if not csv_parts else csv_text.split("\n", 1)[1])
        md_parts.append(f"p = {p:g}\n\n" + table.to_markdown())
        table.to_csv(out / f"{_stem(cfg, p)}.csv")
    (out / f"ex{cfg.example}_table.csv").write_text("".join(csv_parts))
    (out / f"ex{cfg.example}_table.md").write_text("\n".join(md_parts))
    for e in entries:
        if "error" in e:
            status = EXIT_SOLVE_FAILED
        elif not e["converged"] and status == EXIT_OK:
            status = EXIT_NOT_CONVERGED
    payload = {"config": asdict(cfg), "columns": [c for c, _ in COLUMNS], "status": status, "runs": entries}
    (out / f"ex{cfg.example}_log.json").write_text(json.dumps(payload, indent=2, default=float))
    return status


def describe(example_id: int, gamma: float = 2 / 3) -> str:
    prob = example(example_id, gamma=gamma)
    dom = prob.domain
    lines = [
        f"Example {prob.id}: {prob.name}",
        f"  domain: lattice box {dom.bbox} minus {list(dom.excluded) or 'nothing'}, lattice unit {dom.unit:g}",
        f"  eps = diag({', '.join(f'{e:g}' for e in prob.eps)})",
        f"  exact solution: {prob.formula}",
        f"  singular lines (x, y): {list(prob.singular_lines) or 'none'}",
        "  default rho1 = rho2 by p:",
    ]
    for p, (r1, r2) in prob.rho_table().items():
        eps0 = 10.0 ** (-6.0 / (p - 1))
        lines.append(f"    p={p:g}: rho1={r1:g} rho2={r2:g} rho3=1 eps0={eps0:.3g}")
    if prob.reference:
        lines.append("  reference values at p=2 (1/h: e_h, dual, s-norm):")
        for h, vals in sorted(prob.reference.items()):
            lines.append(f"    {h}: " + ", ".join(f"{v:.3g}" for v in vals))
    if example_id == 4:
        lines.append(f"  gamma options: {', '.join(f'{g:.4g}' for g in GAMMA_OPTIONS)}")
    return "\n".join(lines)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdwg", description="Lowest-order Lp primal-dual weak Galerkin experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a JSON experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, default=1, help="parallel grid points")
    r.add_argument("--quad-degree", type=int, help="quadrature degree override")
    r.add_argument("-v", "--verbose", action="store_true")
    d = sub.add_parser("describe", help="print an example's setup")
    d.add_argument("id", type=int)
    d.add_argument("--gamma", type=float, default=2 / 3)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "describe":
        try:
            print(describe(args.id, args.gamma))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.quad_degree is not None:
            cfg.overrides["quad_degree"] = args.quad_degree
            cfg.validate()
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run(cfg, args.out, args.threads)
    if status == EXIT_NOT_CONVERGED:
        print("warning: some runs did not converge; see the JSON log", file=sys.stderr)
    elif status == EXIT_SOLVE_FAILED:
        print("error: a linear solve failed; see the JSON log", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
