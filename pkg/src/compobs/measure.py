"""Random measurement ensembles and the compressive observability operator.

The observability operator maps an initial state to every collected
measurement::

    y = scale * [C_{k_0} A^{k_0} x; C_{k_1} A^{k_1} x; ...]

It is applied matrix-free (iterated mat-vecs with ``A``) and can be
materialized into an ``MK x N`` matrix for the recovery solvers.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, ShapeMismatchError
from .seeding import derive_seed, make_rng
from .system import SampleSet, StateModel, as_sample_set, power_blocks

ENSEMBLE_MAGIC = b"COMPOBS1"


class Sharing(enum.Enum):
    INDEPENDENT = "independent"
    IDENTICAL = "identical"


@dataclass(frozen=True)
class MeasurementEnsemble:
    """The ``K`` measurement matrices of one trial.

    ``generator`` is ``"dense"`` or ``"line"``; ``line_c`` is the decay
    constant of line measurements (``None`` for dense ones).
    """

    blocks: tuple[np.ndarray, ...]
    sharing: Sharing
    generator: str
    seed: int
    line_c: float | None = None

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            b = np.array(b, dtype=float)
            b.setflags(write=False)
            blocks.append(b)
        if not blocks:
            raise ShapeMismatchError("ensemble needs at least one block")
        if any(b.ndim != 2 or b.shape != blocks[0].shape for b in blocks):
            raise ShapeMismatchError("all measurement blocks must share one M x N shape")
        object.__setattr__(self, "blocks", tuple(blocks))

    @property
    def K(self) -> int:
        return len(self.blocks)

    @property
    def M(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def N(self) -> int:
        return self.blocks[0].shape[1]

    @property
    def generator_label(self) -> str:
        return self.generator if self.line_c is None else f"{self.generator}(c={self.line_c!r})"

    def header(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "K": self.K,
            "seed": self.seed,
            "generator": self.generator,
            "line_c": self.line_c,
            "sharing": self.sharing.value,
        }


def _block_seeds(seed: int, K: int, sharing: Sharing) -> list[int]:
    if sharing is Sharing.IDENTICAL:
        return [derive_seed(seed, "block", 0)] * K
    return [derive_seed(seed, "block", i) for i in range(K)]


def dense_gaussian_ensemble(M: int, N: int, omega, sharing=Sharing.INDEPENDENT, seed: int = 0) -> MeasurementEnsemble:
    """I.i.d. ``N(0, 1/M)`` blocks, one per observation time."""
    if M < 1 or N < 1:
        raise InvalidParameterError("M and N must be positive")
    sharing = Sharing(sharing)
    K = as_sample_set(omega).K
    blocks = [make_rng(s).standard_normal((M, N)) / np.sqrt(M) for s in _block_seeds(seed, K, sharing)]
    return MeasurementEnsemble(tuple(blocks), sharing, "dense", seed)


def grid_coordinates(grid_dims: Sequence[int], ds: float = 1.0) -> np.ndarray:
    """``(N, 2)`` array of ``(x, y)`` node positions, row-major numbering."""
    rows, cols = grid_dims
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([c * ds, r * ds]).astype(float)


def line_weights(coords: np.ndarray, angles: np.ndarray, anchors: np.ndarray, c: float) -> np.ndarray:
    """``exp(-d/c)`` for the perpendicular distance ``d`` of every node to every line.

    Line ``i`` passes through ``anchors[i]`` with direction angle ``angles[i]``.
    Returns an ``(len(angles), N)`` matrix.
    """
    normals = np.column_stack([-np.sin(angles), np.cos(angles)])
    d = np.abs((coords[None, :, :] - anchors[:, None, :]) @ normals[:, :, None])[..., 0]
    return np.exp(-d / c)


def line_ensemble(M: int, grid_dims: Sequence[int], omega, c: float = 3.0, seed: int = 0,
                  sharing=Sharing.INDEPENDENT, ds: float = 1.0) -> MeasurementEnsemble:
    """Line measurements: each row weights nodes by their distance to a random line.

    Each row gets its own line, with direction angle uniform on ``[0, pi)`` and
    an anchor point uniform over the grid's bounding box.
    """
    if c <= 0:
        raise InvalidParameterError(f"line decay constant must be positive, got {c}")
    if M < 1:
        raise InvalidParameterError("M must be positive")
    sharing = Sharing(sharing)
    rows, cols = grid_dims
    coords = grid_coordinates(grid_dims, ds)
    K = as_sample_set(omega).K
    blocks = []
    for s in _block_seeds(seed, K, sharing):
        rng = make_rng(s)
        angles = rng.uniform(0.0, np.pi, size=M)
        anchors = rng.uniform(0.0, 1.0, size=(M, 2)) * np.array([(cols - 1) * ds, (rows - 1) * ds])
        blocks.append(line_weights(coords, angles, anchors, c))
    return MeasurementEnsemble(tuple(blocks), sharing, "line", seed, line_c=float(c))


def block_diag_apply(ensemble: MeasurementEnsemble, v: np.ndarray) -> np.ndarray:
    """Apply the block-diagonal matrix ``diag(C_{k_0}, ..., C_{k_{K-1}})`` to ``v``."""
    v = np.asarray(v, dtype=float)
    K, N = ensemble.K, ensemble.N
    if v.shape[0] != K * N:
        raise ShapeMismatchError(f"expected a vector of length {K * N}, got {v.shape[0]}")
    return np.concatenate([C @ v[i * N : (i + 1) * N] for i, C in enumerate(ensemble.blocks)])


@dataclass(frozen=True)
class ObservabilityOperator:
    model: StateModel
    omega: SampleSet
    ensemble: MeasurementEnsemble
    scale: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ensemble.M * self.ensemble.K, self.model.dim)

    def apply(self, x: np.ndarray) -> np.ndarray:
        blocks = power_blocks(self.model, self.omega, x)
        return self.scale * np.concatenate([C @ b for C, b in zip(self.ensemble.blocks, blocks)])

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """``O^T y`` via transposed powers (``(A^T)^k`` applied to ``C_k^T y_k``)."""
        y = np.asarray(y, dtype=float)
        M = self.ensemble.M
        At = self.model.matrix.T
        out = np.zeros(self.model.dim)
        # Horner-style sweep from the latest time back to zero
        times = self.omega.times
        for i in range(len(times) - 1, -1, -1):
            out = out + self.ensemble.blocks[i].T @ y[i * M : (i + 1) * M]
            step = times[i] - (times[i - 1] if i > 0 else 0)
            for _ in range(step):
                out = At @ out
        return self.scale * out

    def __matmul__(self, x):
        return self.apply(x)

    def materialize(self) -> np.ndarray:
        """Dense ``MK x N`` matrix, built from the blocks ``C_k A^k``."""
        blocks = power_blocks(self.model, self.omega, np.eye(self.model.dim))
        return self.scale * np.vstack([C @ P for C, P in zip(self.ensemble.blocks, blocks)])


def observability(model: StateModel, omega, ensemble: MeasurementEnsemble, scale: float = 1.0) -> ObservabilityOperator:
    omega = as_sample_set(omega)
    if ensemble.K != omega.K:
        raise ShapeMismatchError(f"ensemble has {ensemble.K} blocks but the sample set has {omega.K} times")
    if ensemble.N != model.dim:
        raise ShapeMismatchError(f"ensemble width {ensemble.N} does not match state dimension {model.dim}")
    if not scale > 0:
        raise InvalidParameterError("operator scale must be positive")
    return ObservabilityOperator(model, omega, ensemble, float(scale))


# -- ensemble dumps ---------------------------------------------------------
#
# CSV:    "# compobs-ensemble v1" line, "# {json header}" line, then K*M rows
#         of N comma-separated values (row-major, block after block), "%.17g".
# binary: b"COMPOBS1", uint32 little-endian header length, UTF-8 JSON header,
#         K*M*N little-endian float64 values in the same order.


def save_ensemble(ensemble: MeasurementEnsemble, path) -> Path:
    path = Path(path)
    data = np.vstack(ensemble.blocks)
    header = json.dumps(ensemble.header(), sort_keys=True)
    if path.suffix == ".csv":
        with open(path, "w", newline="\n") as fh:
            fh.write("# compobs-ensemble v1\n")
            fh.write(f"# {header}\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    else:
        hb = header.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(ENSEMBLE_MAGIC)
            fh.write(struct.pack("<I", len(hb)))
            fh.write(hb)
            fh.write(data.astype("<f8").tobytes())
    return path


def load_ensemble(path) -> MeasurementEnsemble:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path) as fh:
            if fh.readline().strip() != "# compobs-ensemble v1":
                raise ValueError(f"{path}: not a compobs ensemble dump")
            header = json.loads(fh.readline()[1:])
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    else:
        raw = path.read_bytes()
        if raw[:8] != ENSEMBLE_MAGIC:
            raise ValueError(f"{path}: not a compobs ensemble dump")
        (n,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12 : 12 + n].decode("utf-8"))
        data = np.frombuffer(raw[12 + n :], dtype="<f8")
    M, N, K = header["M"], header["N"], header["K"]
    data = np.asarray(data, dtype=float).reshape(K, M, N)
    return MeasurementEnsemble(
        tuple(data), Sharing(header["sharing"]), header["generator"], header["seed"], header.get("line_c")
    )
