"""Straight-line reference implementations used to double-check the package.

Each function is written independently of ``compobs`` from the formulas
themselves, with plain ``math`` and loops, so a transcription slip in one
implementation shows up as a disagreement.
"""

import math


def rip_core(N, S, delta, nu):
    return (S * (math.log(42 / delta) + 1 + math.log(N) - math.log(S)) + math.log(2) - math.log(nu)) / (delta * delta)


def rip_unitary(N, S, delta, nu):
    return 512 * rip_core(N, S, delta, nu)


def rip_scaled(N, S, delta, nu, a, K):
    if abs(a) < 1:
        factor = (1 - a * a) * K + a * a
    else:
        factor = (1 - a ** -2) * K + a ** -2
    return 512 * factor * rip_core(N, S, delta, nu)


def rip_symmetric(N, S, delta, nu, K, rho):
    return 512 * K * rip_core(N, S, delta, nu) / rho


def rip_symmetric_extreme(N, S, delta, nu, lam, delta_S, k0, k_last):
    span = k_last - k0
    pen = lam ** (-4 * span) if lam < 1 else lam ** (4 * span)
    return 512 * (1 + delta_S) ** 2 * pen * rip_core(N, S, delta, nu) / (1 - delta_S) ** 2


def rho_bound(lam, K, k0, k_last, delta_S):
    r = K * ((1 - delta_S) / (1 + delta_S)) ** 2
    if lam < 1:
        return r * lam ** (4 * (k_last - k0))
    if lam > 1:
        return r * lam ** (-4 * (k_last - k0))
    return r


def b_sum(a, K):
    total = 0.0
    for i in range(K):
        total += a ** (2 * i)
    return total


def tail_bound(M, eps, weights):
    w = [x for x in weights if x > 0]
    l1 = sum(w)
    l2sq = sum(x * x for x in w)
    linf = max(w)
    thr = 16 * l2sq / (linf * l1)
    if eps <= thr:
        v = 2 * math.exp(-(M * eps * eps * l1 * l1) / (256 * l2sq))
    else:
        v = 2 * math.exp(-(M * eps * l1) / (16 * linf))
    return min(v, 2.0)


def tail_unitary(M, K, eps):
    return min(2.0, 2 * math.exp(-M * K * eps * eps / 256))
