"""Walk through one construction: sequences, audit, forcing, certificate.

Run with ``python3 demos/blowup_walkthrough.py [N]``.
"""
import sys

import mpmath

from czweights.certify import blowup_ratio, make_forcing, pde_residual
from czweights.construct import BuildParams, audit, build
from czweights.sequences import build_table


def main(N: int = 8) -> None:
    t = build_table(N)
    print(f"depth N={N}: b_N={t.b} ({float(t.b):.4f}), beta_N={float(t.beta):.4g}")
    for k in range(1, min(N, 5) + 1):
        print(f"  level {k}: mu_k={float(t.mu_(k)):.4g} slope -2^{k} weight 2^-{k}")

    c = build(BuildParams(N))
    rep = audit(c)
    print(f"audit passed={rep.passed}, sup|u|={float(c.sup_norm):.3e} <= delta={float(c.params.delta):.3e}")

    F = make_forcing(c)
    res = pde_residual(c, F, test_count=100)
    print(f"flux w u' - w F is -1 on every piece: {res.per_piece_ok}; 100 hat tests, max residual {res.max_test_residual}")

    for p, s in ((3, 1), (2, 1)):
        cert = blowup_ratio(c, p, s)
        print(f"(p, s)=({p}, {s}): lhs={mpmath.nstr(cert.lhs, 8)} rhs_F={mpmath.nstr(cert.rhs_F, 8)} ratio={mpmath.nstr(cert.ratio, 8)}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 8)
