#!/usr/bin/env python3
"""Iteration count of the reweighted solve as a function of rho1 = rho2.

Example 1 at p=3 on the coarsest mesh by default. Prints one line per rho.
"""
import argparse

from pdwg.assembly import PdwgParams
from pdwg.mesh import build_mesh
from pdwg.problems import example
from pdwg.solver import run_pdwg


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--example", type=int, default=1)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--inv-h", type=int, default=2)
    ap.add_argument("--rho", type=float, nargs="+", default=[1e2, 9e2, 2.7e3, 9e3, 9e4, 9e5])
    ap.add_argument("--max-iters", type=int, default=300)
    args = ap.parse_args(argv)
    prob = example(args.example, args.p)
    mesh = build_mesh(prob.domain, prob.domain.refinement_for(args.inv_h))
    print(f"example {args.example}, p={args.p:g}, 1/h={args.inv_h}, {mesh.n_elements} elements")
    for rho in args.rho:
        rep = run_pdwg(prob, mesh, PdwgParams(p=args.p, rho1=rho, rho2=rho, max_iters=args.max_iters))
        tail = ", ".join(f"{u:.2e}" for u in rep.history[-3:])
        print(f"rho={rho:9.3g}  iterations={rep.iterations:4d}  converged={rep.converged}  last updates: {tail}")


if __name__ == "__main__":
    main()
