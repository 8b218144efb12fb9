"""Bounded A_r, growing A_2, and the gradient ratio on both sides.

Run with ``python3 demos/weights_contrast.py``; it takes a few minutes.
"""
import mpmath

from czweights.construct import BuildParams, build
from czweights.muckenhoupt import ar_characteristic, theoretical_bound
from czweights.positive import contrast_report

NS = (4, 8, 12, 16)


def main() -> None:
    builds = {N: build(BuildParams(N)) for N in NS}
    print("A_r estimates (rows r, columns N):")
    for r in (2, 3, 4):
        row = [ar_characteristic(builds[N], r).sup_estimate for N in NS]
        bound = f"  bound {mpmath.nstr(theoretical_bound(r), 5)}" if r > 2 else ""
        print(f"  r={r}: " + "  ".join(mpmath.nstr(v, 5) for v in row) + bound)

    rep = contrast_report(1.0, N=16)
    print(f"random well-conditioned problems, max (2,1) ratio: {mpmath.nstr(rep.trials_max, 5)}")
    print(f"N=16 construction at (3,1): {mpmath.nstr(rep.counterexample_ratio, 5)} ({rep.factor:.1f}x the cap)")
    print("ratio curve over p with s=1:")
    for p, v in rep.curve:
        print(f"  p={p:g}: {mpmath.nstr(v, 6)}")
    print(f"knee near p={rep.knee}")


if __name__ == "__main__":
    main()
