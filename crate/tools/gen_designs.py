#!/usr/bin/env python3
"""Numerically compute spherical t-designs on S^2 for the bundled data set.

Each design minimises E(X) = sum_{n=1}^t (2n+1) sum_{i,j} P_n(<x_i, x_j>),
which is nonnegative and vanishes exactly on t-designs, with N = (t+1)^2
points. Output uses the point-set text format (17 significant digits).

    python3 tools/gen_designs.py data/designs
"""
import sys
import numpy as np
from scipy.optimize import minimize


def legendre_and_derivative(t, x):
    """Return K(x) = sum_{n=1}^t (2n+1) P_n(x) and K'(x)."""
    p_prev = np.ones_like(x)
    p = x.copy()
    dp_prev = np.zeros_like(x)
    dp = np.ones_like(x)
    k = 3.0 * p
    dk = 3.0 * dp
    for n in range(1, t):
        p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        dp_next = dp_prev + (2 * n + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        k += (2 * n + 3) * p
        dk += (2 * n + 3) * dp
    return k, dk


def energy(flat, t, n_pts):
    y = flat.reshape(n_pts, 3)
    norms = np.linalg.norm(y, axis=1)
    x = y / norms[:, None]
    g = np.clip(x @ x.T, -1.0, 1.0)
    k, dk = legendre_and_derivative(t, g)
    e = k.sum() / n_pts**2
    grad_x = 2.0 * (dk @ x) / n_pts**2
    # chain rule through the normalisation
    grad_y = (grad_x - np.sum(grad_x * x, axis=1)[:, None] * x) / norms[:, None]
    return e, grad_y.ravel()


def design(t, seed):
    n_pts = (t + 1) ** 2
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(8):
        y0 = rng.standard_normal((n_pts, 3))
        res = minimize(energy, y0.ravel(), args=(t, n_pts), jac=True, method="L-BFGS-B",
                       options={"maxiter": 20000, "maxcor": 30, "ftol": 0.0, "gtol": 1e-16})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < 1e-22:
            break
    y = best.x.reshape(n_pts, 3)
    return y / np.linalg.norm(y, axis=1)[:, None], best.fun


def write(path, pts, comment):
    with open(path, "w") as f:
        for line in comment:
            f.write(f"# {line}\n")
        for p in pts:
            f.write(" ".join(f"{v:.16e}" for v in p) + "\n")


def main():
    out = sys.argv[1]
    for t in range(2, 22):
        pts, e = design(t, seed=1000 + t)
        print(f"t={t:2d} N={len(pts):4d} energy/N^2={e:.3e}", flush=True)
        write(f"{out}/design_t{t:02d}_n{len(pts):04d}.txt", pts,
              [f"spherical {t}-design on S^2, N = {len(pts)}",
               "computed numerically by tools/gen_designs.py"])


if __name__ == "__main__":
    main()
