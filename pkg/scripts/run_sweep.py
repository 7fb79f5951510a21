"""Defect convergence and Strichartz trend on one eps sweep, with a short summary."""
import argparse
import json
from pathlib import Path

from boussinesq_lab.config import load_config
from boussinesq_lab.harness import run_converge, run_strichartz


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    base = load_config(args.config, seed=args.seed)
    out = Path(args.out)
    conv = run_converge(base.with_overrides(kind="converge", out=str(out / "converge")))
    stri = run_strichartz(base.with_overrides(kind="strichartz", out=str(out / "strichartz")))
    summary = {
        "eps": conv["eps"],
        "sup_delta": conv["sup_delta"],
        "rate_exponent": conv["rate_exponent"],
        "strichartz_exponents": stri["exponents"],
        "passed": conv["passed"] and stri["passed"],
    }
    print(json.dumps(summary, indent=2))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
