#!/usr/bin/env python3
"""Classifier verdict, return probability and shell resistance on the generators."""
import argparse

from flatwalk.dual_graph import build_dual, classify_transience, estimate_return, shell_resistance
from flatwalk.generate import generate, parse_spec

CASES = ["tree:3:12", "tree:4:9", "line:400", "book:3:12", "plane:12"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--walks", type=int, default=5000)
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--radius", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("cases", nargs="*", default=CASES)
    a = ap.parse_args()
    print(f"{'complex':>12} {'verdict':>12} {'return':>8} {'absorbed':>9} {'R_eff':>9}")
    for text in a.cases:
        spec = parse_spec(text)
        c = generate(spec.kind, *spec.params)
        g = build_dual(c)
        root = c.meta["root"]
        origin = root if c.dimension == 1 else int(c.cofaces[0][root][0])
        w = estimate_return(g, origin, a.horizon, a.walks, a.seed)
        R = shell_resistance(g, origin, a.radius)[-1]["R_eff"]
        verdict = classify_transience(c)["verdict"]
        print(f"{text:>12} {verdict:>12} {w.return_probability.value:8.4f} {w.absorbed / a.walks:9.4f} {R:9.4f}")


if __name__ == "__main__":
    main()
