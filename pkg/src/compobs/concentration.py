"""Concentration-of-measure statistics and RIP measurement bounds.

Closed forms for how tightly ``|O x0|^2`` concentrates when the measurement
blocks are random Gaussian, and the total measurement counts ``MK`` that
suffice for the restricted isometry property of the observability matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameterError, ShapeMismatchError, UndefinedStatisticError
from .measure import MeasurementEnsemble, block_diag_apply
from .seeding import derive_seed
from .system import EigSplit, StateModel, as_sample_set, stacked_apply

EIG_ZERO_RTOL = 1e-12


class Regime(enum.Enum):
    INDEPENDENT_BLOCKS = "independent"
    IDENTICAL_BLOCKS = "identical"
    UNITARY = "unitary"
    SCALED_UNITARY = "scaled-unitary"
    SYMMETRIC = "symmetric"
    SYMMETRIC_EXTREME = "symmetric-extreme"
    SYMMETRIC_UNIT = "symmetric-unit"


def _ratio_stat(w: np.ndarray) -> float:
    s1 = float(np.sum(w))
    s2 = float(np.sum(w * w))
    if s2 == 0.0:
        raise UndefinedStatisticError("statistic is undefined for the zero vector")
    return s1 * s1 / s2


def block_energies(v: np.ndarray, K: int) -> np.ndarray:
    """``gamma``: squared norms of the ``K`` equal-length blocks of ``v``."""
    v = np.asarray(v, dtype=float)
    if v.size % K:
        raise ShapeMismatchError(f"length {v.size} is not a multiple of K={K}")
    return np.sum(v.reshape(K, -1) ** 2, axis=1)


def gamma_stat(v: np.ndarray, K: int) -> float:
    """``(sum gamma)^2 / sum gamma^2``; lies in ``[1, K]``."""
    return _ratio_stat(block_energies(v, K))


def gram_spectrum(V: np.ndarray) -> np.ndarray:
    """Non-zero eigenvalues of ``V^T V`` (descending), ``V`` being ``N x K``.

    Eigenvalues below ``1e-12`` of the largest count as zero.
    """
    V = np.asarray(V, dtype=float)
    N, K = V.shape
    if K > N:
        raise InvalidParameterError(f"need K <= N, got K={K}, N={N}")
    lam = np.linalg.eigvalsh(V.T @ V)[::-1]
    if lam[0] <= 0:
        return lam[:0]
    return lam[lam > EIG_ZERO_RTOL * lam[0]]


def lambda_stat(V: np.ndarray) -> float:
    """``(sum lam)^2 / sum lam^2`` over the Gram spectrum; lies in ``[1, min(K, N)]``."""
    lam = gram_spectrum(V)
    if lam.size == 0:
        raise UndefinedStatisticError("statistic is undefined for the zero matrix")
    return _ratio_stat(lam)


def b_normalizer(a: float, K: int) -> float:
    """``1 + a^2 + ... + a^{2(K-1)}``."""
    if a == 0:
        raise InvalidParameterError("a must be nonzero")
    a2 = a * a
    if a2 == 1.0:
        return float(K)
    return (1.0 - a2**K) / (1.0 - a2)


def gamma_scaled_unitary(a: float, K: int) -> float:
    """Closed-form ``Gamma(A_Omega x0)`` for ``A = aU`` and ``Omega = {0..K-1}``.

    Independent of ``x0``.  For ``|a| > 1`` the identity
    ``Gamma(a) = Gamma(1/a)`` keeps the powers from overflowing.
    """
    if abs(a) == 1.0:
        raise InvalidParameterError("|a| = 1 is the unitary case, where Gamma = K")
    a2 = a * a
    if a2 > 1.0:
        a2 = 1.0 / a2
    p = a2**K
    return (1.0 - p) * (1.0 + a2) / ((1.0 + p) * (1.0 - a2))


def scaled_unitary_factor(a: float, K: int) -> float:
    """``(1 - a^2) K + a^2`` for ``|a| < 1``; ``a`` replaced by ``1/a`` for ``|a| > 1``."""
    if a == 0:
        raise InvalidParameterError("a must be nonzero")
    a2 = a * a
    if a2 > 1.0:
        a2 = 1.0 / a2
    return (1.0 - a2) * K + a2


def gamma_lower_scaled_unitary(a: float, K: int) -> float:
    """Lower bound ``K / ((1 - a^2) K + a^2)`` on the scaled-unitary Gamma."""
    return K / scaled_unitary_factor(a, K)


def block_com_bound(M: int, eps: float, weights: np.ndarray) -> float:
    """Two-branch tail bound for a block-diagonal Gaussian matrix.

    ``weights`` is ``gamma`` (independent blocks) or the Gram spectrum
    (identical blocks).  Below ``eps* = 16 |w|_2^2 / (|w|_inf |w|_1)`` the
    quadratic branch ``2 exp(-M eps^2 |w|_1^2 / (256 |w|_2^2))`` applies,
    above it the linear branch ``2 exp(-M eps |w|_1 / (16 |w|_inf))``.
    """
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    w = np.asarray(weights, dtype=float)
    w = w[w > 0]
    if w.size == 0:
        raise UndefinedStatisticError("bound is undefined for zero weights")
    l1, l2sq, linf = float(w.sum()), float(w @ w), float(w.max())
    if eps <= com_branch_threshold(w):
        val = 2.0 * math.exp(-M * eps**2 * l1**2 / (256.0 * l2sq))
    else:
        val = 2.0 * math.exp(-M * eps * l1 / (16.0 * linf))
    return min(val, 2.0)


def com_branch_threshold(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return 16.0 * float(w @ w) / (float(w.max()) * float(w.sum()))


def com_tail_bound(M: int, eps: float, regime: Regime | str, weights=None, *, K: int | None = None,
                   a: float | None = None) -> float:
    """Concentration tail bound for the given regime.

    ``independent``/``identical`` take ``weights`` (gamma or Gram spectrum);
    ``unitary`` takes ``K`` and gives ``2 exp(-M K eps^2/256)``;
    ``scaled-unitary`` takes ``K`` and ``a`` and divides the exponent by
    ``(1 - a^2) K + a^2``.
    """
    regime = Regime(regime)
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    if regime in (Regime.INDEPENDENT_BLOCKS, Regime.IDENTICAL_BLOCKS):
        if weights is None:
            raise InvalidParameterError(f"{regime.value} regime needs block weights")
        return block_com_bound(M, eps, weights)
    if K is None:
        raise InvalidParameterError(f"{regime.value} regime needs K")
    if regime is Regime.UNITARY:
        return min(2.0, 2.0 * math.exp(-M * K * eps**2 / 256.0))
    if regime is Regime.SCALED_UNITARY:
        if a is None or abs(a) == 1.0:
            raise InvalidParameterError("scaled-unitary regime needs |a| != 1")
        return min(2.0, 2.0 * math.exp(-M * K * eps**2 / (256.0 * scaled_unitary_factor(a, K))))
    raise InvalidParameterError(f"no tail bound for regime {regime.value}")


# -- RIP measurement counts -------------------------------------------------


@dataclass(frozen=True)
class RipBoundInput:
    """Parameters of a sufficient-measurement-count formula.

    ``delta`` is the target isometry constant (``delta_S`` in the unitary and
    scaled-unitary theorems, the CoM distortion in the symmetric ones);
    ``delta_S`` is the RIP constant assumed for ``U_1^T`` in the symmetric
    regimes.
    """

    N: int
    S: int
    delta: float
    nu: float
    a: float | None = None
    K: int | None = None
    lam: float | None = None
    delta_S: float | None = None
    k0: int = 0
    k_last: int | None = None
    rho: float | None = None
    L: int | None = None

    def __post_init__(self):
        if not 1 <= self.S <= self.N:
            raise InvalidParameterError(f"need 1 <= S <= N, got S={self.S}, N={self.N}")
        for name in ("delta", "nu"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidParameterError(f"{name} must lie in (0, 1), got {v}")
        if self.delta_S is not None and not 0 <= self.delta_S < 1:
            raise InvalidParameterError(f"delta_S must lie in [0, 1), got {self.delta_S}")


def _rip_core(N: int, S: int, delta: float, nu: float) -> float:
    """``(S (log(42/delta) + 1 + log(N/S)) + log(2/nu)) / delta^2``."""
    return (S * (math.log(42.0 / delta) + 1.0 + math.log(N / S)) + math.log(2.0 / nu)) / delta**2


def rip_measurement_count(inp: RipBoundInput, regime: Regime | str) -> float:
    """Sufficient total measurement count ``MK`` for the RIP in ``regime``.

    * ``unitary``: ``512 core``
    * ``scaled-unitary``: ``512 ((1 - a^2) K + a^2) core``, ``a -> 1/a`` if ``|a| > 1``
    * ``symmetric``: ``512 K core / rho``
    * ``symmetric-extreme``: ``512 (1+dS)^2 lam^{-+4(k_last - k0)} core / (1-dS)^2``
    * ``symmetric-unit``: the previous with ``lam = 1``

    where ``core = (S (log(42/delta) + 1 + log(N/S)) + log(2/nu)) / delta^2``.
    """
    regime = Regime(regime)
    core = _rip_core(inp.N, inp.S, inp.delta, inp.nu)
    if regime is Regime.UNITARY:
        return 512.0 * core
    if regime is Regime.SCALED_UNITARY:
        if inp.a is None or inp.K is None:
            raise InvalidParameterError("scaled-unitary bound needs a and K")
        if abs(inp.a) == 1.0 or inp.a == 0:
            raise InvalidParameterError("scaled-unitary bound needs 0 < |a| != 1; use the unitary regime")
        return 512.0 * scaled_unitary_factor(inp.a, inp.K) * core
    if regime is Regime.SYMMETRIC:
        if inp.K is None or inp.rho is None or inp.rho <= 0:
            raise InvalidParameterError("symmetric bound needs K and rho > 0")
        return 512.0 * inp.K * core / inp.rho
    if regime in (Regime.SYMMETRIC_EXTREME, Regime.SYMMETRIC_UNIT):
        if inp.delta_S is None:
            raise InvalidParameterError("symmetric bounds need delta_S")
        ratio = (1.0 + inp.delta_S) ** 2 / (1.0 - inp.delta_S) ** 2
        if regime is Regime.SYMMETRIC_UNIT:
            return 512.0 * ratio * core
        if inp.lam is None or inp.lam <= 0 or inp.k_last is None:
            raise InvalidParameterError("symmetric-extreme bound needs lam > 0 and k_last")
        return 512.0 * ratio * _lam_penalty(inp.lam, inp.k_last - inp.k0) * core
    raise InvalidParameterError(f"no measurement count for regime {regime.value}")


def _lam_penalty(lam: float, span: int) -> float:
    """``lam^{-4 span}`` for ``lam < 1`` and ``lam^{4 span}`` for ``lam > 1``."""
    if lam <= 0:
        raise InvalidParameterError("lambda must be positive")
    if lam < 1.0:
        return lam ** (-4 * span)
    return lam ** (4 * span)


def rho_lower_bound(lam: float, K: int, k0: int, k_last: int, delta_S: float) -> float:
    """Lower bound on ``inf Gamma(A_Omega x0)`` over ``S``-sparse ``x0``.

    ``K (1 - dS)^2 / (1 + dS)^2``, times ``lam^{4 (k_last - k0)}`` when
    ``lam < 1`` or ``lam^{-4 (k_last - k0)}`` when ``lam > 1``.
    """
    if lam <= 0:
        raise InvalidParameterError("lambda must be positive")
    if not 0 <= delta_S < 1:
        raise InvalidParameterError("delta_S must lie in [0, 1)")
    base = K * (1.0 - delta_S) ** 2 / (1.0 + delta_S) ** 2
    return base / _lam_penalty(lam, k_last - k0)


def rho_scaled_unitary(a: float, K: int) -> float:
    """Lower bound on ``Gamma`` for ``A = aU`` with consecutive sample times."""
    return gamma_lower_scaled_unitary(a, K)


def deterministic_ak_bounds(eig: EigSplit, omega, delta_S: float) -> tuple[float, float]:
    """Bounds on ``|A_Omega x0|^2 / |x0|^2`` for ``S``-sparse ``x0``.

    Valid when ``U_1^T`` satisfies ``(1 -+ dS) L/N |x|^2`` RIP bounds on
    ``S``-sparse vectors::

        lower = (1 - dS) L/N sum_i lam1_min^{2 k_i}
        upper = (1 + dS) L/N sum_i lam1_max^{2 k_i} + sum_i lam2_max^{2 k_i}

    The residual sum is dropped when ``L = N``.
    """
    if not 0 <= delta_S < 1:
        raise InvalidParameterError("delta_S must lie in [0, 1)")
    times = np.array(as_sample_set(omega).times, dtype=float)
    frac = eig.L / eig.N
    lower = (1.0 - delta_S) * frac * float(np.sum(eig.lam1_min ** (2 * times)))
    upper = (1.0 + delta_S) * frac * float(np.sum(eig.lam1_max ** (2 * times)))
    if eig.lam2.size:
        # A^0 = I keeps the residual energy, so 0^0 counts as 1 here
        upper += float(np.sum(eig.lam2_max ** (2 * times)))
    return lower, upper


def support_rip_constant(U1: np.ndarray, support: Sequence[int]) -> float:
    """Smallest ``dS`` with ``(1 -+ dS) L/N |x|^2`` bounding ``|U1^T x|^2`` on ``support``."""
    N, L = U1.shape
    rows = U1[list(support), :]
    ev = np.linalg.eigvalsh(rows @ rows.T) * (N / L)
    return float(max(ev[-1] - 1.0, 1.0 - ev[0], 0.0))


# -- empirical concentration ------------------------------------------------


@dataclass
class ComBoundReport:
    epsilon: float
    bound: float
    empirical_failure: float
    trials: int
    regime: Regime
    M: int = 0
    K: int = 0
    seed: int = 0
    deviations: np.ndarray | None = field(default=None, repr=False)

    @property
    def holds(self) -> bool:
        return self.empirical_failure <= self.bound

    def row(self) -> dict:
        return {
            "regime": self.regime.value,
            "M": self.M,
            "K": self.K,
            "epsilon": self.epsilon,
            "bound": self.bound,
            "empirical": self.empirical_failure,
            "trials": self.trials,
            "seed": self.seed,
        }


def com_deviations(model: StateModel, omega, x0: np.ndarray,
                   ensemble_factory: Callable[[int], MeasurementEnsemble], trials: int, seed: int) -> np.ndarray:
    """Relative deviations ``| |C v|^2 - |v|^2 | / |v|^2`` for ``v = A_Omega x0``.

    ``x0`` stays fixed while a fresh ensemble is drawn for every trial, from
    seed ``derive_seed(seed, "com", t)``.
    """
    omega = as_sample_set(omega)
    v = stacked_apply(model, omega, x0)
    vv = float(v @ v)
    if vv == 0:
        raise UndefinedStatisticError("A_Omega x0 is zero")
    dev = np.empty(trials)
    for t in range(trials):
        ens = ensemble_factory(derive_seed(seed, "com", t))
        w = block_diag_apply(ens, v)
        dev[t] = abs(float(w @ w) - vv) / vv
    return dev


def empirical_com(model: StateModel, omega, x0: np.ndarray,
                  ensemble_factory: Callable[[int], MeasurementEnsemble], eps: float, trials: int, seed: int,
                  regime: Regime | str = Regime.INDEPENDENT_BLOCKS, a: float | None = None) -> ComBoundReport:
    """Monte-Carlo failure frequency of the concentration event next to its bound.

    The bound is taken from ``regime``: signal-dependent gamma or Gram
    spectrum for the block regimes, closed forms for the unitary ones.
    """
    if trials < 100:
        raise InvalidParameterError("empirical_com needs at least 100 trials")
    regime = Regime(regime)
    omega = as_sample_set(omega)
    dev = com_deviations(model, omega, x0, ensemble_factory, trials, seed)
    probe = ensemble_factory(derive_seed(seed, "com", 0))
    M, K = probe.M, omega.K
    v = stacked_apply(model, omega, x0)
    if regime is Regime.INDEPENDENT_BLOCKS:
        bound = com_tail_bound(M, eps, regime, block_energies(v, K))
    elif regime is Regime.IDENTICAL_BLOCKS:
        bound = com_tail_bound(M, eps, regime, gram_spectrum(v.reshape(K, -1).T))
    else:
        bound = com_tail_bound(M, eps, regime, K=K, a=a)
    return ComBoundReport(eps, bound, float(np.mean(dev > eps)), trials, regime, M, K, seed, dev)
