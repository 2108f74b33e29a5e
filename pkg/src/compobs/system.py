"""State transition matrices for discrete-time linear systems.

Builds the transition matrix ``A`` of ``x_k = A x_{k-1}`` for the model
families the recovery guarantees cover (unitary, scaled unitary, symmetric
PSD with a dominant eigenspace) and for the diffusion case study, and
applies powers of ``A`` without ever forming ``A^k`` densely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidParameterError, ModelMismatchError, ShapeMismatchError
from .seeding import make_rng

SYM_TOL = 1e-8
PSD_CLAMP = 1e-10


class ModelKind(enum.Enum):
    GENERAL = "general"
    UNITARY = "unitary"
    SCALED_UNITARY = "scaled-unitary"
    SPECTRAL_SPLIT = "spectral-split"
    DIFFUSION = "diffusion"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EigSplit:
    """Eigendecomposition of a PSD matrix split into dominant and residual parts.

    ``U1`` holds the eigenvectors of the ``L`` largest eigenvalues ``lam1``
    (descending); ``U2``/``lam2`` hold the rest.
    """

    U1: np.ndarray
    lam1: np.ndarray
    U2: np.ndarray
    lam2: np.ndarray

    def __post_init__(self):
        for name in ("U1", "lam1", "U2", "lam2"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.U1.shape[1] != self.lam1.size or self.U2.shape[1] != self.lam2.size:
            raise ShapeMismatchError("eigenvector/eigenvalue counts disagree")

    @property
    def L(self) -> int:
        return self.lam1.size

    @property
    def N(self) -> int:
        return self.U1.shape[0]

    @property
    def lam1_min(self) -> float:
        return float(self.lam1.min())

    @property
    def lam1_max(self) -> float:
        return float(self.lam1.max())

    @property
    def lam2_max(self) -> float:
        return float(self.lam2.max()) if self.lam2.size else 0.0

    def reconstruct(self) -> np.ndarray:
        return (self.U1 * self.lam1) @ self.U1.T + (self.U2 * self.lam2) @ self.U2.T

    def power_apply(self, k: int, x: np.ndarray) -> np.ndarray:
        """``A^k x`` through the eigenbasis."""
        out = self.U1 @ (self.lam1**k * (self.U1.T @ x))
        if self.lam2.size:
            out = out + self.U2 @ (self.lam2**k * (self.U2.T @ x))
        return out


@dataclass(frozen=True)
class StateModel:
    matrix: np.ndarray
    kind: ModelKind = ModelKind.GENERAL
    scale: float | None = None  # ``a`` for ModelKind.SCALED_UNITARY
    eig: EigSplit | None = None

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ShapeMismatchError(f"transition matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidParameterError("transition matrix has non-finite entries")
        object.__setattr__(self, "matrix", m)
        if self.kind is ModelKind.SCALED_UNITARY and not self.scale:
            raise InvalidParameterError("scaled-unitary model needs a nonzero scale")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def with_split(self, L: int) -> "StateModel":
        return StateModel(self.matrix, self.kind, self.scale, spectral_split(self, L))


@dataclass(frozen=True)
class SampleSet:
    """Observation times ``{k_0 < k_1 < ... < k_{K-1}}``."""

    times: tuple[int, ...] = field(default=(0,))

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        if not times:
            raise InvalidParameterError("sample set must contain at least one time")
        if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError(f"sample times must be non-negative and strictly increasing: {times}")
        object.__setattr__(self, "times", times)

    @classmethod
    def consecutive(cls, K: int, start: int = 0) -> "SampleSet":
        return cls(tuple(range(start, start + K)))

    @property
    def K(self) -> int:
        return len(self.times)

    @property
    def span(self) -> int:
        return self.times[-1] - self.times[0]

    def __iter__(self):
        return iter(self.times)

    def __len__(self):
        return len(self.times)


def as_sample_set(omega: SampleSet | Iterable[int] | int) -> SampleSet:
    if isinstance(omega, SampleSet):
        return omega
    if isinstance(omega, (int, np.integer)):
        return SampleSet((int(omega),))
    return SampleSet(tuple(omega))


def path_laplacian(N: int, D: float = 1.0, ds: float = 1.0) -> np.ndarray:
    """Discrete Laplacian ``G`` of an ``N``-node path with zero-flux ends.

    Interior rows are ``D/ds^2 * [1, -2, 1]``; the two end rows are
    ``D/ds^2 * [-1, 1]`` so every row sums to zero.
    """
    if N < 2:
        raise InvalidDimensionError(f"path needs at least 2 nodes, got {N}")
    return grid_laplacian(1, N, D, ds)


def grid_laplacian(rows: int, cols: int, D: float = 1.0, ds: float = 1.0) -> np.ndarray:
    """``-(D/ds^2) * L`` for the 4-neighbour ``rows x cols`` grid graph Laplacian ``L``.

    Nodes are numbered row-major, ``j = r * cols + c``.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InvalidDimensionError(f"grid {rows}x{cols} has fewer than 2 nodes")
    if D <= 0 or ds <= 0:
        raise InvalidParameterError("D and ds must be positive")
    N = rows * cols
    idx = np.arange(N).reshape(rows, cols)
    adj = np.zeros((N, N))
    right = (idx[:, :-1].ravel(), idx[:, 1:].ravel())
    down = (idx[:-1, :].ravel(), idx[1:, :].ravel())
    for a, b in (right, down):
        adj[a, b] = 1.0
        adj[b, a] = 1.0
    G = adj - np.diag(adj.sum(axis=1))
    return G * (D / ds**2)


def discretize(G: np.ndarray, Ts: float) -> StateModel:
    """Forward-Euler transition matrix ``A = I + Ts * G``."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ShapeMismatchError(f"G must be square, got shape {G.shape}")
    if Ts <= 0:
        raise InvalidParameterError("Ts must be positive")
    return StateModel(np.eye(G.shape[0]) + Ts * G, ModelKind.DIFFUSION)


def diffusion_model(grid: Sequence[int], D: float = 1.0, ds: float = 1.0, Ts: float = 0.1) -> StateModel:
    rows, cols = grid
    return discretize(grid_laplacian(rows, cols, D, ds), Ts)


def random_orthogonal(N: int, seed: int) -> StateModel:
    """Haar-distributed orthogonal matrix from the QR of a Gaussian draw.

    The signs of ``R``'s diagonal are folded into ``Q`` so the result does
    not depend on the QR routine's sign convention.
    """
    if N < 1:
        raise InvalidDimensionError("N must be positive")
    Z = make_rng(seed).standard_normal((N, N))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return StateModel(Q * signs, ModelKind.UNITARY)


def scaled_unitary(a: float, U: StateModel) -> StateModel:
    if a == 0:
        raise InvalidParameterError("scale a must be nonzero")
    if U.kind is not ModelKind.UNITARY:
        raise ModelMismatchError("scaled_unitary expects a unitary model")
    return StateModel(a * U.matrix, ModelKind.SCALED_UNITARY, scale=float(a))


def cyclic_shift(N: int) -> StateModel:
    """Permutation matrix sending ``e_j`` to ``e_{(j+1) mod N}``."""
    return StateModel(np.roll(np.eye(N), 1, axis=0), ModelKind.UNITARY)


def spectral_split(A: StateModel | np.ndarray, L: int) -> EigSplit:
    """Split a symmetric PSD matrix into its ``L`` dominant eigenpairs and the rest.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero; anything more negative,
    or an asymmetry above ``1e-8`` in max norm, raises ``ModelMismatchError``.
    """
    M = A.matrix if isinstance(A, StateModel) else np.asarray(A, dtype=float)
    N = M.shape[0]
    if not 1 <= L <= N:
        raise InvalidParameterError(f"L must be in 1..{N}, got {L}")
    if np.max(np.abs(M - M.T)) > SYM_TOL:
        raise ModelMismatchError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w.min() < -PSD_CLAMP:
        raise ModelMismatchError(f"matrix is indefinite (min eigenvalue {w.min():.3e})")
    w = np.maximum(w, 0.0)
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    return EigSplit(V[:, :L], w[:L], V[:, L:], w[L:])


def apply_power(A: StateModel, k: int, x: np.ndarray, method: str = "iterate") -> np.ndarray:
    """``A^k x`` by ``k`` matrix-vector products, or through ``A.eig`` with ``method="eig"``."""
    if k < 0:
        raise InvalidParameterError("power must be non-negative")
    x = np.asarray(x, dtype=float)
    if method == "eig":
        if A.eig is None:
            raise ModelMismatchError("model has no eigendecomposition; call with_split first")
        return A.eig.power_apply(k, x)
    out = x.copy()
    for _ in range(k):
        out = A.matrix @ out
    return out


def stacked_apply(A: StateModel, omega, x: np.ndarray) -> np.ndarray:
    """Stack ``[A^{k_0} x; ...; A^{k_{K-1}} x]`` (length ``N*K``)."""
    return np.concatenate(power_blocks(A, omega, x))


def power_blocks(A: StateModel, omega, x: np.ndarray) -> list[np.ndarray]:
    omega = as_sample_set(omega)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.dim:
        raise ShapeMismatchError(f"state has length {x.shape[0]}, model dimension is {A.dim}")
    blocks = []
    cur, k_cur = x, 0
    # times are increasing, so each block continues from the previous power
    for k in omega:
        cur = apply_power(A, k - k_cur, cur)
        k_cur = k
        blocks.append(cur)
    return blocks
