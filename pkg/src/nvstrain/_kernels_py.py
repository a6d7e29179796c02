"""Pure-numpy dual-Lorentzian kernels.

Reference implementation and import-time fallback for the compiled
``_kernels`` extension. Both expose the same three functions over the
seven-element raw parameter vector::

    p = [nu_plus, nu_minus, depth_plus, depth_minus,
         gamma_plus, gamma_minus, baseline]

The model is ``baseline - sum_k depth_k * gamma_k**2 / ((nu - nu_k)**2 + gamma_k**2)``,
i.e. each dip has peak depth ``depth_k`` at ``nu_k``.
"""
import numpy as np

NPARAM = 7


def dual_lorentzian(nu, p):
    nu = np.asarray(nu, dtype=float)
    xp = nu - p[0]
    xm = nu - p[1]
    gp2 = p[4] * p[4]
    gm2 = p[5] * p[5]
    return p[6] - p[2] * gp2 / (xp * xp + gp2) - p[3] * gm2 / (xm * xm + gm2)


def jacobian(nu, w, p):
    """Weighted Jacobian of the model, shape (n, 7)."""
    nu = np.asarray(nu, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.empty((nu.shape[0], NPARAM))
    for k, (c, d, g) in enumerate(((p[0], p[2], p[4]), (p[1], p[3], p[5]))):
        x = nu - c
        g2 = g * g
        den = x * x + g2
        den2 = den * den
        out[:, k] = -2.0 * d * x * g2 / den2
        out[:, 2 + k] = -g2 / den
        out[:, 4 + k] = -2.0 * d * g * x * x / den2
    out[:, 6] = 1.0
    out *= w[:, None]
    return out


def normal_equations(nu, y, w, p):
    """Return ``(cost, JtJ, Jtr)`` for residual ``r = w * (y - model)``."""
    r = np.asarray(w, dtype=float) * (np.asarray(y, dtype=float) - dual_lorentzian(nu, p))
    jac = jacobian(nu, w, p)
    return float(r @ r), jac.T @ jac, jac.T @ r
