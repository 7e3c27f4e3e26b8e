#!/usr/bin/env python3
"""KS distances between laws of d(x0, Y^eta_t) for consecutive etas."""
import argparse

from flatwalk.generate import generate, home_point, parse_spec
from flatwalk.scaling import convergence_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--generate", default="plane:auto")
    ap.add_argument("--etas", default="0.4,0.2,0.1,0.05")
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    etas = [float(e) for e in a.etas.split(",")]
    spec = parse_spec(a.generate)
    c = generate(spec.kind, *spec.params, reach=a.t / min(etas))
    r = convergence_sweep(c, home_point(c), etas, a.t, a.paths, a.seed)
    for p in r["ks_pairs"]:
        print(f"eta {p['eta_a']:.3f} vs {p['eta_b']:.3f}: KS {p['ks']:.4f}")
    print(f"threshold at alpha=0.01: {r['threshold']:.4f}; absorbed per eta: {r['absorbed']}")


if __name__ == "__main__":
    main()
