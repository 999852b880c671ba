"""Shadow lattice sum vs finite-difference lowering, for cubical instances with q = 1, 2.

usage: python3 scripts/shadow_check.py [--h 1e-3] [--tau 0.3,1.1]
"""

import argparse
import time
from fractions import Fraction

from indefinite_theta import CubicalCollection, EvenLattice, TauPoint, lowering_fd, shadow_value

F = Fraction


def instances():
    L1 = EvenLattice(((2, 0), (0, -4)))
    yield "q=1 diag(2,-4)", L1, (F(0), F(1, 4)), CubicalCollection(L1.space, (((0, 1), (1, 2)),))
    L2 = EvenLattice(((2, 0, 0), (0, -4, 0), (0, 0, -2)))
    pairs = (((0, 1, 0), (1, 2, 0)), ((0, 0, 1), (1, 0, 2)))
    yield "q=2 diag(2,-4,-2)", L2, (F(0), F(1, 4), F(1, 2)), CubicalCollection(L2.space, pairs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--tau", default="0.3,1.1")
    args = ap.parse_args()
    tau = TauPoint(*map(float, args.tau.split(",")))
    for name, L, mu, cc in instances():
        t0 = time.perf_counter()
        sv = shadow_value(L, mu, cc, tau)
        fd = lowering_fd(L, mu, cc, tau, h=args.h)
        bound = max(1e-4 * abs(sv.value), 5 * (sv.est_error + fd.est_error))
        diff = abs(sv.value - fd.value)
        print(f"{name}: shadow {sv.value:.10g}  fd {fd.value:.10g}  |diff| {diff:.2e}  "
              f"bound {bound:.2e}  {'ok' if diff <= bound else 'FAIL'}  ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
