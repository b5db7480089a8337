"""
How many quantile nodes does each interpolator need?

Nodes are exact N(0,1) quantiles, so every error below comes from the
interpolation itself. The reference is a 500-node PCHIP build.

    python3 demos/interpolation.py
"""

import numpy as np
from scipy import stats

from fqcast.distbuild import build, ks_distance
from fqcast.qreg import Q9, equidistant_partition


def gaussian(taus, method):
    taus = np.asarray(taus, dtype=float)
    return build(taus, stats.norm.ppf(taus), method)


def main():
    ref = gaussian(equidistant_partition(500).array, "pchip")
    print("sup |F - F_ref| against the 500-node build")
    print(f"  pchip on the 9 default nodes {Q9.taus}: {ks_distance(gaussian(Q9.array, 'pchip'), ref):.4f}")
    print(f"  step  on the same nodes: {ks_distance(gaussian(Q9.array, 'step'), ref):.4f}")
    print()
    print(f"{'nodes':>6} {'step':>8} {'kernel':>8} {'pchip':>8}")
    for q in (10, 20, 35, 50, 100):
        taus = equidistant_partition(q).array
        row = [ks_distance(gaussian(taus, m), ref) for m in ("step", "epanechnikov_kernel", "pchip")]
        print(f"{q:>6} " + " ".join(f"{v:8.4f}" for v in row))
    # the step build jumps by 1/(q+1) at every node, which bounds its error from below
    print("\nstep error floor 1/(q+1) at q=50:", round(1 / 51, 4))


if __name__ == "__main__":
    main()
