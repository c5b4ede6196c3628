"""Standalone derivation of the Gaussian-matching minimizer r(alpha).

Independent route: the expectation E[exp(-|rT|^alpha)] is computed with a
fixed trapezoid rule on a fine grid (not adaptive quadrature), and the
objective r*(sqrt(pi) - 2*sqrt(2*pi)*E) is minimized by dense scan plus
parabolic refinement (not golden section). At alpha = 2 the closed form
E = 1/sqrt(1+2r^2) pins the minimizer at 1/sqrt(2): the stationarity
condition reduces to (1+2r^2)^(3/2) = 2*sqrt(2).

Run: python3 scripts/derive_matching_r.py
"""

import math

import numpy as np


def e_term_trapezoid(r: float, alpha: float, n: int = 400_001, hi: float = 8.0) -> float:
    t = np.linspace(0.0, hi, n)
    f = np.exp(-0.5 * t * t - (r * t) ** alpha) / math.sqrt(2.0 * math.pi)
    return 2.0 * float(np.trapezoid(f, t))


def objective(r: float, alpha: float) -> float:
    e = e_term_trapezoid(r, alpha)
    return r * (math.sqrt(math.pi) - 2.0 * math.sqrt(2.0 * math.pi) * e)


def argmin_scan(alpha: float) -> float:
    # coarse scan
    grid = np.linspace(1e-3, 10.0, 400)
    vals = [objective(r, alpha) for r in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    # three rounds of zoomed scans: interval shrinks ~25x each round
    for _ in range(3):
        grid = np.linspace(lo, hi, 51)
        vals = [objective(r, alpha) for r in grid]
        k = int(np.argmin(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    return 0.5 * (lo + hi)


def main() -> None:
    # closed-form check at alpha = 2
    r = 1.0 / math.sqrt(2.0)
    e_closed = 1.0 / math.sqrt(1.0 + 2.0 * r * r)
    e_num = e_term_trapezoid(r, 2.0)
    print(f"alpha=2 closed-form E at r=1/sqrt(2): {e_closed:.12f}")
    print(f"alpha=2 trapezoid   E at r=1/sqrt(2): {e_num:.12f}")
    print(f"stationarity check (1+2r^2)^1.5 = {(1 + 2 * r * r) ** 1.5:.12f}"
          f" vs 2*sqrt(2) = {2 * math.sqrt(2):.12f}")
    print()
    for alpha in (2.0, 1.5, 1.0, 0.6, 0.5):
        r_hat = argmin_scan(alpha)
        print(f"alpha={alpha:4.2f}  r_opt={r_hat:.6f}  "
              f"rel dev from 1/sqrt(2): {r_hat * math.sqrt(2) - 1:+.4f}")


if __name__ == "__main__":
    main()
