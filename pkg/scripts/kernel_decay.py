"""Decay of the dispersive kernel in tau for several cutoff shells."""
import argparse

import numpy as np

from boussinesq_lab.kernel import KernelParams, fit_decay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--n-tau", type=int, default=13)
    args = ap.parse_args()
    taus = np.logspace(1, 4, args.n_tau)
    print("r      R      slope    residual")
    for r, R in [(1.0, 2.0), (1.0, 4.0), (0.5, 4.0)]:
        fit, _ = fit_decay(KernelParams(r, R, eps=args.eps), taus)
        print(f"{r:<6g} {R:<6g} {fit.slope:+.4f}  {fit.residual:.2e}")


if __name__ == "__main__":
    main()
