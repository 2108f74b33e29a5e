"""Pure-NumPy ADMM inner loops (fallback for the compiled ``_kernels``).

Both functions advance the ADMM state arrays in place for at most
``max_iter`` iterations and return ``(iters, converged, rho, r_norm, s_norm)``.
Convergence means the primal and dual residual norms fall below
``abs_tol + rel_tol * scale`` (Boyd et al. 2011, section 3.3).  Every
``adapt_every`` iterations the penalty ``rho`` is rebalanced by a factor of 2
when one residual exceeds the other tenfold (their section 3.4.1).
"""

from __future__ import annotations

import numpy as np

MU = 10.0
TAU = 2.0


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def bp_admm(P, q, x, z, u, rho, max_iter, abs_tol, rel_tol, adapt_every):
    """Basis pursuit ``min |x|_1 s.t. Phi x = y``.

    The affine projection is ``v -> v - P v + q`` with ``P`` the orthogonal
    projector onto ``range(Phi^T)`` and ``q`` the least-norm solution.
    """
    r_norm = s_norm = np.inf
    for it in range(1, max_iter + 1):
        v = z - u
        x[:] = v - P @ v + q
        z_old = z.copy()
        z[:] = _soft(x + u, 1.0 / rho)
        u += x - z
        r_norm = np.linalg.norm(x - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        eps_pri = abs_tol + rel_tol * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = abs_tol + rel_tol * rho * np.linalg.norm(u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            return it, True, rho, r_norm, s_norm
        if adapt_every and it % adapt_every == 0:
            if r_norm > MU * s_norm:
                rho *= TAU
                u /= TAU
            elif s_norm > MU * r_norm:
                rho /= TAU
                u *= TAU
    return max_iter, False, rho, r_norm, s_norm


def bpdn_admm(Minv, B, Phi, y, eta, x, z, u, w, s, rho, max_iter, abs_tol, rel_tol, adapt_every):
    """Noise-aware basis pursuit ``min |x|_1 s.t. |Phi x - y|_2 <= eta``.

    Splitting: ``x = z`` (l1 term) and ``Phi x - y = w`` (ball indicator).
    ``Minv = (I + Phi^T Phi)^{-1}`` and ``B = Minv Phi^T``.
    """
    r_norm = s_norm = np.inf
    y_norm = np.linalg.norm(y)
    for it in range(1, max_iter + 1):
        x[:] = Minv @ (z - u) + B @ (y + w - s)
        Phix = Phi @ x
        z_old = z.copy()
        w_old = w.copy()
        z[:] = _soft(x + u, 1.0 / rho)
        w[:] = Phix - y + s
        wn = np.linalg.norm(w)
        if wn > eta:
            w *= eta / wn
        r1 = x - z
        r2 = Phix - y - w
        u += r1
        s += r2
        r_norm = np.sqrt(r1 @ r1 + r2 @ r2)
        s_norm = rho * np.linalg.norm((z - z_old) + Phi.T @ (w - w_old))
        eps_pri = abs_tol + rel_tol * max(np.sqrt(x @ x + Phix @ Phix), np.sqrt(z @ z + w @ w), y_norm)
        eps_dual = abs_tol + rel_tol * rho * np.linalg.norm(u + Phi.T @ s)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            return it, True, rho, r_norm, s_norm
        if adapt_every and it % adapt_every == 0:
            if r_norm > MU * s_norm:
                rho *= TAU
                u /= TAU
                s /= TAU
            elif s_norm > MU * r_norm:
                rho /= TAU
                u *= TAU
                s *= TAU
    return max_iter, False, rho, r_norm, s_norm
