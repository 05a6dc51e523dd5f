#!/usr/bin/env python3
"""Run every JSON config in configs/ (or the ones named) and collect the Markdown tables.

    python3 scripts/run_tables.py                      # all configs
    python3 scripts/run_tables.py configs/example1.json --threads 4
"""
import argparse
import sys
from pathlib import Path

from pdwg.cli import ConfigError, ExperimentConfig, run

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--summary", type=Path, default=ROOT / "results" / "summary.md")
    args = ap.parse_args(argv)
    paths = args.configs or sorted(p for p in (ROOT / "configs").glob("*.json") if p.stem != "quick")
    status, chunks = 0, []
    for path in paths:
        try:
            cfg = ExperimentConfig.load(path)
        except ConfigError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return 2
        out = ROOT / cfg.out
        print(f"running {path.name} -> {out}", flush=True)
        rc = run(cfg, out, args.threads)
        status = max(status, rc)
        chunks.append(f"## {path.stem}\n\n" + (out / f"ex{cfg.example}_table.md").read_text())
    args.summary.parent.mkdir(parents=True, exist_ok=True)
    args.summary.write_text("\n".join(chunks))
    print(f"summary written to {args.summary}")
    return status


if __name__ == "__main__":
    sys.exit(main())
