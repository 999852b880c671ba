"""|completed - truncated holomorphic| as v grows, on the signature (1,1) instance.

usage: python3 scripts/degeneration_sweep.py [--u 0.3] [--vmax 50]
"""

import argparse
from fractions import Fraction

import numpy as np

from indefinite_theta import CubicalCollection, EvenLattice, TauPoint, completed_theta, holomorphic_theta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--u", type=float, default=0.3)
    ap.add_argument("--vmax", type=float, default=50.0)
    ap.add_argument("--N", default="10")
    args = ap.parse_args()

    L = EvenLattice(((2, 0), (0, -4)))
    mu = (Fraction(0), Fraction(1, 4))
    cc = CubicalCollection(L.space, (((0, 1), (1, 2)),))
    hol = holomorphic_theta(L, mu, cc, Fraction(args.N))
    print("q-expansion:", ", ".join(f"{c} q^{e}" for e, c in hol.terms))
    print(f"{'v':>6} {'|completed|':>12} {'|holomorphic|':>14} {'|diff|':>10} {'est_error':>10}")
    for v in np.geomspace(0.5, args.vmax, 12):
        t = TauPoint(args.u, float(v))
        tv = completed_theta(L, mu, cc, t)
        h = hol.evaluate(t)
        print(f"{v:6.2f} {abs(tv.value):12.4e} {abs(h):14.4e} {abs(tv.value - h):10.3e} {tv.est_error:10.2e}")


if __name__ == "__main__":
    main()
