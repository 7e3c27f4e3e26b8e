#!/usr/bin/env python3
"""Direct resolvent vs truncated renewal series on the fan of three half-discs."""
import argparse

from flatwalk.generate import fan
from flatwalk.transport import BallIndicator, resolvent_series_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", default="0.5,1,2,10")
    ap.add_argument("--n-terms", type=int, default=12)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    c = fan(3)
    x = c.point_on([0, 1], [0.5, 0.5])
    f = BallIndicator(c, c.centroid(0), 0.25)
    print(f"{'lambda':>7} {'direct':>9} {'series':>9} {'diff':>9} {'tail':>9} {'pass':>5}")
    for lam in (float(v) for v in a.lams.split(",")):
        r = resolvent_series_check(c, f, x, lam, a.n_terms, a.paths, a.seed)
        print(
            f"{lam:7.2f} {r['lhs'].value:9.5f} {r['rhs_partial'].value:9.5f} "
            f"{r['diff']:9.2e} {r['tail_bound']:9.2e} {str(r['pass']):>5}"
        )


if __name__ == "__main__":
    main()
