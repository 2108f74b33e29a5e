"""Sparse initial-state recovery by l1 minimization.

``solve_bp`` solves ``min |x|_1 s.t. Phi x = y`` and ``solve_bpdn`` solves
``min |x|_1 s.t. |Phi x - y|_2 <= eta``, both by ADMM on the materialized
operator.  The ADMM loop runs in short chunks; between chunks the support of
the sparse iterate is polished to an exact solution on that support and
accepted as soon as a dual certificate proves it optimal.

``brute_force_oracle`` and ``bp_vertex_oracle`` are exhaustive checkers for
small instances, independent of the ADMM path.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg as sla

from . import kernels
from .errors import InstanceTooLargeError, InvalidParameterError, ShapeMismatchError
from .measure import ObservabilityOperator

FEAS_TOL = 1e-8
RANK_RTOL = 1e-12
CERT_TOL = 1e-9
ORACLE_LIMIT = 10**6


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    INFEASIBLE = "infeasible"


@dataclass
class RecoveryProblem:
    """Measurements ``y`` of an unknown state through ``operator``.

    ``operator`` is an :class:`ObservabilityOperator` or an explicit matrix.
    """

    operator: ObservabilityOperator | np.ndarray
    y: np.ndarray
    noise_level: float = 0.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if not np.all(np.isfinite(self.y)):
            raise InvalidParameterError("measurements must be finite")
        if self.noise_level < 0:
            raise InvalidParameterError("noise level must be non-negative")
        if self.matrix.shape[0] != self.y.size:
            raise ShapeMismatchError(f"operator has {self.matrix.shape[0]} rows but y has {self.y.size} entries")

    @cached_property
    def matrix(self) -> np.ndarray:
        if isinstance(self.operator, ObservabilityOperator):
            return self.operator.materialize()
        return np.atleast_2d(np.asarray(self.operator, dtype=float))


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    status: Status
    certified: bool = False
    rank_deficient: bool = False
    info: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


@dataclass
class _RowSpace:
    """Thin SVD of ``Phi`` truncated at ``RANK_RTOL`` relative singular value."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    full_rows: int

    @classmethod
    def of(cls, Phi: np.ndarray) -> "_RowSpace":
        U, s, Vt = np.linalg.svd(Phi, full_matrices=False)
        r = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
        return cls(U[:, :r], s[:r], Vt[:r].T, Phi.shape[0])

    @property
    def rank(self) -> int:
        return self.s.size

    def least_norm(self, y):
        return self.V @ ((self.U.T @ y) / self.s)

    def range_residual(self, y) -> float:
        return float(np.linalg.norm(y - self.U @ (self.U.T @ y)))


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _support_lstsq(Phi, y, T):
    """Least squares on columns ``T``; ``None`` if those columns are dependent."""
    A = Phi[:, T]
    w, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    if rank < len(T) or (sv.size and sv[-1] <= RANK_RTOL * sv[0]):
        return None
    return w


def _bp_polish(Phi, y, z, rs: _RowSpace, rho_u):
    """Exact solution on ``supp(z)`` plus an optimality certificate.

    Returns ``(x, certified)`` or ``None`` when the support does not admit a
    feasible solution.  The certificate is a ``lam`` with ``Phi_T^T lam =
    sign(x_T)`` and ``|Phi_{T^c}^T lam|_inf <= 1``; candidates are the ADMM dual
    estimate corrected onto the support and the least-norm choice.
    """
    n = Phi.shape[1]
    T = np.flatnonzero(z)
    if T.size == 0 or T.size > rs.rank:
        return None
    w = _support_lstsq(Phi, y, T)
    if w is None:
        return None
    x = np.zeros(n)
    x[T] = w
    if np.linalg.norm(Phi @ x - y) > CERT_TOL * max(1.0, np.linalg.norm(y)):
        return None
    sgn = np.sign(w)
    PhiT = Phi[:, T]
    off = np.ones(n, dtype=bool)
    off[T] = False
    lam_admm = rs.U @ ((rs.V.T @ rho_u) / rs.s)
    for lam0 in (lam_admm, np.zeros(Phi.shape[0])):
        fix = np.linalg.lstsq(PhiT.T, sgn - PhiT.T @ lam0, rcond=None)[0]
        lam = lam0 + fix
        g = Phi.T @ lam
        if np.max(np.abs(g[T] - sgn)) > 1e-8:
            continue
        if not off.any() or np.max(np.abs(g[off])) <= 1.0 + CERT_TOL:
            return x, True
    return x, False


def _l1(v):
    return float(np.sum(np.abs(v)))


def solve_bp(problem: RecoveryProblem | np.ndarray, y=None, *, max_iter: int = 50_000,
             abs_tol: float = 1e-9, rel_tol: float = 1e-9, polish_every: int = 25,
             adapt_every: int = 10, backend=None) -> RecoveryResult:
    """Basis pursuit: ``argmin |x|_1`` subject to ``Phi x = y``.

    Accepts a :class:`RecoveryProblem` or ``(Phi, y)``.  Returns
    ``Status.INFEASIBLE`` when ``y`` is not in the range of ``Phi``.
    """
    if not isinstance(problem, RecoveryProblem):
        problem = RecoveryProblem(problem, y)
    Phi, y = problem.matrix, problem.y
    kern = kernels if backend is None else kernels.BACKENDS[backend]
    m, n = Phi.shape
    y_norm = float(np.linalg.norm(y))
    if m == 0 or y_norm == 0.0:
        return RecoveryResult(np.zeros(n), 0, 0.0, 0.0, Status.CONVERGED, certified=True)

    rs = _RowSpace.of(Phi)
    rank_deficient = rs.rank < m
    feas = FEAS_TOL * max(1.0, y_norm)
    q = rs.least_norm(y) if rs.rank else np.zeros(n)
    if rs.rank == 0 or rs.range_residual(y) > feas:
        return RecoveryResult(q, 0, rs.range_residual(y), 0.0, Status.INFEASIBLE, rank_deficient=rank_deficient)

    P = np.ascontiguousarray(rs.V @ rs.V.T)
    x = q.copy()
    z = q.copy()
    u = np.zeros(n)
    rho = n / max(_l1(q), 1e-300)
    done = 0
    converged = False
    r_norm = s_norm = np.inf
    polished = None
    while done < max_iter:
        chunk = min(polish_every, max_iter - done)
        it, converged, rho, r_norm, s_norm = kern.bp_admm(P, q, x, z, u, rho, chunk, abs_tol, rel_tol, adapt_every)
        done += it
        polished = _bp_polish(Phi, y, z, rs, rho * u)
        if polished is not None and polished[1]:
            return RecoveryResult(polished[0], done, r_norm, s_norm, Status.CONVERGED, True, rank_deficient)
        if converged:
            break

    best = x
    if polished is not None and _l1(polished[0]) <= _l1(x):
        best = polished[0]
    status = Status.CONVERGED if converged else Status.MAX_ITERS
    return RecoveryResult(best, done, r_norm, s_norm, status, False, rank_deficient)


def _bpdn_polish(Phi, y, eta, z):
    """Exact constrained solution on ``supp(z)`` with the signs of ``z``.

    With the ball constraint active, ``x_T = x_ls - t G^{-1} sign`` where
    ``G = Phi_T^T Phi_T`` and ``t`` makes the residual norm equal ``eta``.  The
    multiplier ``lam = -(Phi x - y)/t`` is then the unique dual certificate.
    """
    n = Phi.shape[1]
    T = np.flatnonzero(z)
    if T.size == 0 or T.size > Phi.shape[0]:
        return None
    A = Phi[:, T]
    x_ls = _support_lstsq(Phi, y, T)
    if x_ls is None:
        return None
    sgn = np.sign(z[T])
    r_ls = float(np.linalg.norm(A @ x_ls - y))
    if r_ls > eta:
        return None
    d = np.linalg.solve(A.T @ A, sgn)
    h = float(np.linalg.norm(A @ d))
    t = math.sqrt(eta**2 - r_ls**2) / h
    xT = x_ls - t * d
    if np.any(np.sign(xT) != sgn):
        return None
    x = np.zeros(n)
    x[T] = xT
    r = Phi @ x - y
    off = np.ones(n, dtype=bool)
    off[T] = False
    certified = not off.any() or float(np.max(np.abs(Phi[:, off].T @ r))) / t <= 1.0 + CERT_TOL
    return x, certified


def solve_bpdn(problem: RecoveryProblem | np.ndarray, eta: float, y=None, *, max_iter: int = 50_000,
               abs_tol: float = 1e-9, rel_tol: float = 1e-9, polish_every: int = 25,
               adapt_every: int = 10, backend=None) -> RecoveryResult:
    """Noise-aware basis pursuit: ``argmin |x|_1`` subject to ``|Phi x - y|_2 <= eta``.

    ``eta = 0`` is plain basis pursuit and is delegated to :func:`solve_bp`.
    """
    if not isinstance(problem, RecoveryProblem):
        problem = RecoveryProblem(problem, y)
    if eta < 0:
        raise InvalidParameterError("eta must be non-negative")
    if eta == 0:
        return solve_bp(problem, max_iter=max_iter, abs_tol=abs_tol, rel_tol=rel_tol,
                        polish_every=polish_every, adapt_every=adapt_every, backend=backend)
    kern = kernels if backend is None else kernels.BACKENDS[backend]
    Phi, y = problem.matrix, problem.y
    m, n = Phi.shape
    if np.linalg.norm(y) <= eta:
        return RecoveryResult(np.zeros(n), 0, 0.0, 0.0, Status.CONVERGED, certified=True)
    rs = _RowSpace.of(Phi)
    if rs.rank == 0 or rs.range_residual(y) > eta:
        x = rs.least_norm(y) if rs.rank else np.zeros(n)
        return RecoveryResult(x, 0, rs.range_residual(y), 0.0, Status.INFEASIBLE, rank_deficient=rs.rank < m)

    # work with Phi / |Phi|_2 so the x- and w-constraints are balanced
    alpha = float(rs.s[0])
    Ps, ys, es = Phi / alpha, y / alpha, eta / alpha
    cf = sla.cho_factor(np.eye(m) + Ps @ Ps.T)
    B = np.ascontiguousarray(sla.cho_solve(cf, Ps).T)  # (I + Ps^T Ps)^{-1} Ps^T
    Minv = np.ascontiguousarray(np.eye(n) - B @ Ps)
    Ps = np.ascontiguousarray(Ps)

    x0 = rs.least_norm(y)
    x, z = x0.copy(), x0.copy()
    u = np.zeros(n)
    w = Ps @ x - ys
    s = np.zeros(m)
    rho = n / max(_l1(x0), 1e-300)
    done = 0
    converged = False
    r_norm = s_norm = np.inf
    polished = None
    while done < max_iter:
        chunk = min(polish_every, max_iter - done)
        it, converged, rho, r_norm, s_norm = kern.bpdn_admm(
            Minv, B, Ps, ys, es, x, z, u, w, s, rho, chunk, abs_tol, rel_tol, adapt_every)
        done += it
        polished = _bpdn_polish(Phi, y, eta, z)
        if polished is not None and polished[1]:
            return RecoveryResult(polished[0], done, r_norm, s_norm, Status.CONVERGED, True, rs.rank < m)
        if converged:
            break

    slack = 1e-6
    candidates = [v for v in (z, x) if np.linalg.norm(Phi @ v - y) <= eta + slack]
    if polished is not None:
        candidates.append(polished[0])
    # ADMM stalls when eta is tiny next to |y|.  There the optimum usually keeps
    # the support and signs of the basis pursuit solution, which is also
    # feasible itself (zero residual).
    bp = solve_bp(problem, max_iter=max_iter, abs_tol=abs_tol, rel_tol=rel_tol,
                  polish_every=polish_every, adapt_every=adapt_every, backend=backend)
    if bp.status is not Status.INFEASIBLE:
        done += bp.iterations
        polished = _bpdn_polish(Phi, y, eta, bp.x_hat)
        if polished is not None and polished[1]:
            return RecoveryResult(polished[0], done, r_norm, s_norm, Status.CONVERGED, True, rs.rank < m)
        candidates.append(bp.x_hat)
    best = min(candidates, key=_l1) if candidates else x
    status = Status.CONVERGED if converged else Status.MAX_ITERS
    return RecoveryResult(best, done, r_norm, s_norm, status, False, rs.rank < m)


# -- exhaustive oracles -----------------------------------------------------


def _count_supports(N: int, S: int) -> int:
    return sum(math.comb(N, s) for s in range(S + 1))


def sparse_solutions(Phi: np.ndarray, y: np.ndarray, S: int, tol: float = FEAS_TOL) -> list[np.ndarray]:
    """Every distinct feasible vector with at most ``S`` non-zeros, in lexicographic support order."""
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    N = Phi.shape[1]
    if _count_supports(N, S) > ORACLE_LIMIT:
        raise InstanceTooLargeError(f"C({N}, <={S}) supports exceed {ORACLE_LIMIT}")
    feas = tol * max(1.0, float(np.linalg.norm(y)))
    found: list[np.ndarray] = []
    for size in range(S + 1):
        for T in itertools.combinations(range(N), size):
            x = np.zeros(N)
            if size:
                x[list(T)] = np.linalg.lstsq(Phi[:, list(T)], y, rcond=None)[0]
            if np.linalg.norm(Phi @ x - y) <= feas and not any(np.allclose(x, f, rtol=0, atol=1e-9) for f in found):
                found.append(x)
    return found


def brute_force_oracle(Phi: np.ndarray, y: np.ndarray, S: int) -> np.ndarray | None:
    """Minimal-l1 feasible vector among all supports of size ``<= S``.

    Ties go to the lexicographically first support.  Returns ``None`` when no
    ``S``-sparse vector reproduces ``y`` to a residual of ``1e-8``.
    """
    best, best_l1 = None, np.inf
    for x in sparse_solutions(Phi, y, S):
        v = _l1(x)
        if v < best_l1 * (1 - 1e-12):
            best, best_l1 = x, v
    return best


def bp_vertex_oracle(Phi: np.ndarray, y: np.ndarray) -> tuple[np.ndarray | None, bool]:
    """Basis-pursuit optimum by enumerating basic feasible solutions.

    The l1 minimum over ``{x: Phi x = y}`` is attained at a basic solution,
    supported on ``rank(Phi)`` linearly independent columns.  Returns the
    minimizer and whether it is unique (all optimal vertices coincide).
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    N = Phi.shape[1]
    r = int(np.linalg.matrix_rank(Phi))
    if math.comb(N, r) > ORACLE_LIMIT:
        raise InstanceTooLargeError(f"C({N}, {r}) bases exceed {ORACLE_LIMIT}")
    feas = FEAS_TOL * max(1.0, float(np.linalg.norm(y)))
    if r == 0:
        return (np.zeros(N), True) if np.linalg.norm(y) <= feas else (None, False)
    verts = []
    for T in itertools.combinations(range(N), r):
        A = Phi[:, list(T)]
        if np.linalg.matrix_rank(A) < r:
            continue
        x = np.zeros(N)
        x[list(T)] = np.linalg.lstsq(A, y, rcond=None)[0]
        if np.linalg.norm(Phi @ x - y) <= feas:
            verts.append(x)
    if not verts:
        return None, False
    vals = np.array([_l1(v) for v in verts])
    best = verts[int(np.argmin(vals))]
    opt = vals.min()
    tied = [v for v, val in zip(verts, vals) if val <= opt * (1 + 1e-9) + 1e-12]
    unique = all(np.allclose(v, best, rtol=0, atol=1e-7) for v in tied)
    return best, unique


def certify_unique_sparse(Phi: np.ndarray, y: np.ndarray, S: int) -> tuple[np.ndarray | None, bool]:
    """Brute-force certificate that ``y`` has one ``S``-sparse preimage and that it is the l1 optimum.

    Returns ``(x, certified)``: ``x`` is the oracle's ``S``-sparse solution, and
    ``certified`` requires it to be the only feasible ``S``-sparse vector and
    the unique basis-pursuit minimizer.
    """
    sols = sparse_solutions(Phi, y, S)
    if len(sols) != 1:
        return (brute_force_oracle(Phi, y, S) if sols else None), False
    x = sols[0]
    vx, unique = bp_vertex_oracle(Phi, y)
    ok = unique and vx is not None and np.allclose(vx, x, rtol=0, atol=1e-7)
    return x, bool(ok)


# -- metrics ----------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryMetrics:
    l2_error: float
    rel_error: float
    precision: float
    recall: float
    exact: bool


def recovery_metrics(x_hat: np.ndarray, x0: np.ndarray, exact_tol: float = 1e-4) -> RecoveryMetrics:
    """Error norms, support precision/recall and the exact-recovery flag.

    Supports are taken at magnitude ``1e-4 * |x0|_inf``; exact recovery means
    relative l2 error at most ``exact_tol``.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x_hat.shape != x0.shape:
        raise ShapeMismatchError("estimate and truth differ in length")
    err = float(np.linalg.norm(x_hat - x0))
    ref = float(np.linalg.norm(x0))
    rel = err / ref if ref > 0 else (0.0 if err == 0 else math.inf)
    thr = 1e-4 * float(np.max(np.abs(x0))) if x0.size else 0.0
    est = np.abs(x_hat) > thr
    true = np.abs(x0) > thr
    tp = int(np.sum(est & true))
    precision = tp / int(est.sum()) if est.any() else 1.0
    recall = tp / int(true.sum()) if true.any() else 1.0
    return RecoveryMetrics(err, rel, precision, recall, rel <= exact_tol)
