"""Monte-Carlo harness for the diffusion recovery experiments.

Every trial is reproducible from the master seed alone.  Trial ``t`` at
per-time measurement count ``M`` draws everything from::

    trial_seed = derive_seed(master_seed, "trial", M, t)
    x0         <- derive_seed(trial_seed, "state")
    ensemble   <- derive_seed(trial_seed, "ensemble")
    noise      <- derive_seed(trial_seed, "noise")

so the same ``(M, t)`` pair sees the same initial state under every sample
set, and tables do not depend on how trials are scheduled across threads.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .concentration import ComBoundReport, Regime, empirical_com
from .errors import ConfigError, InvalidParameterError
from .measure import Sharing, dense_gaussian_ensemble, line_ensemble, observability
from .recovery import Status, recovery_metrics, solve_bp, solve_bpdn
from .seeding import derive_seed, make_rng
from .system import (
    SampleSet,
    StateModel,
    as_sample_set,
    cyclic_shift,
    diffusion_model,
    power_blocks,
    random_orthogonal,
    scaled_unitary,
)

MAX_TIME = 10_000

FIG6_OMEGA_SETS = (
    (0, 1, 2, 3),
    (4, 5, 6, 7),
    (8, 9, 10, 11),
    (10, 20, 30, 40),
    (20, 21, 22, 23),
    (10, 30, 50, 70),
    (51, 52, 53, 54),
    (60, 70, 80, 90),
    (91, 92, 93, 94),
    (97, 98, 99, 100),
)


class Amplitude(enum.Enum):
    """Distribution of the non-zero entries of a sparse initial state."""

    UNIFORM = "uniform"  # U(0, 1): non-negative concentrations
    GAUSSIAN = "gaussian"
    UNIT = "unit"


def default_threads() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


# -- initial states ---------------------------------------------------------


def _amplitudes(rng: np.random.Generator, n: int, amplitude: Amplitude) -> np.ndarray:
    if amplitude is Amplitude.UNIFORM:
        return rng.uniform(0.0, 1.0, size=n)
    if amplitude is Amplitude.GAUSSIAN:
        return rng.standard_normal(n)
    return np.ones(n)


def cluster_sparse_state(grid_dims: Sequence[int], block: Sequence[int] = (3, 3), seed: int = 0,
                         amplitude: Amplitude | str = Amplitude.UNIFORM) -> np.ndarray:
    """State supported on a uniformly placed, grid-aligned ``h x w`` block.

    Nodes are numbered row-major, so on a ``1 x N`` path the block is a run
    of ``w`` consecutive nodes.
    """
    rows, cols = grid_dims
    h, w = block
    if h < 1 or w < 1 or h > rows or w > cols:
        raise ConfigError(f"block {h}x{w} does not fit in a {rows}x{cols} grid")
    rng = make_rng(seed)
    r = int(rng.integers(0, rows - h + 1))
    c = int(rng.integers(0, cols - w + 1))
    x = np.zeros((rows, cols))
    x[r : r + h, c : c + w] = _amplitudes(rng, h * w, Amplitude(amplitude)).reshape(h, w)
    return x.ravel()


def scattered_sparse_state(N: int, S: int, seed: int = 0, amplitude: Amplitude | str = Amplitude.UNIT) -> np.ndarray:
    """State with ``S`` non-zeros at uniformly chosen distinct positions."""
    if not 0 <= S <= N:
        raise ConfigError(f"need 0 <= S <= N, got S={S}, N={N}")
    rng = make_rng(seed)
    x = np.zeros(N)
    idx = np.sort(rng.choice(N, size=S, replace=False))
    x[idx] = _amplitudes(rng, S, Amplitude(amplitude))
    return x


# -- configuration ----------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field maps to one JSON key.

    ``measurement`` is ``"dense"``, ``"line"`` (decay constant ``line_c``)
    or a list of both, giving one curve per kind.
    ``state`` is ``"cluster"`` (``block``-shaped) or ``"scattered"``
    (``S`` random positions).
    """

    experiment: str = "phase"
    grid: tuple = (10, 10)
    D: float = 1.0
    ds: float = 1.0
    Ts: float = 0.1
    state: str = "cluster"
    block: tuple = (3, 3)
    S: int = 9
    amplitude: str = Amplitude.UNIFORM.value
    M_list: list = field(default_factory=lambda: [10, 20, 30, 40, 50])
    omega_sets: list = field(default_factory=lambda: [[0]])
    trials: int = 300
    noise_std: float = 0.0
    measurement: str | list = "dense"
    line_c: float = 3.0
    sharing: str = Sharing.INDEPENDENT.value
    master_seed: int = 0
    exact_tol: float = 1e-4
    # com-verify only
    com_regimes: list = field(default_factory=lambda: ["unitary"])
    com_N: int = 64
    com_M: list = field(default_factory=lambda: [8, 16, 32])
    com_K: list = field(default_factory=lambda: [2, 4])
    com_eps: list = field(default_factory=lambda: [0.3, 0.5, 1.0])
    com_a: float = 0.9
    # simulate only
    sim_times: list = field(default_factory=lambda: [0, 10, 50, 100, 500])

    def __post_init__(self):
        self.grid = tuple(int(g) for g in (self.grid if isinstance(self.grid, (list, tuple)) else (1, self.grid)))
        self.block = tuple(int(b) for b in self.block)
        self.omega_sets = [list(as_sample_set(o).times) for o in self.omega_sets]
        self.M_list = [int(m) for m in self.M_list]
        if self.state == "cluster":
            self.S = self.block[0] * self.block[1]
        self.validate()

    @property
    def measurements(self) -> list[str]:
        return [self.measurement] if isinstance(self.measurement, str) else list(self.measurement)

    @property
    def N(self) -> int:
        return self.grid[0] * self.grid[1]

    def validate(self) -> None:
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ConfigError(f"grid must be (rows, cols) with positive entries, got {self.grid}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.S <= self.N:
            raise ConfigError(f"sparsity S={self.S} exceeds N={self.N}")
        if self.state == "cluster" and (self.block[0] > self.grid[0] or self.block[1] > self.grid[1]):
            raise ConfigError(f"block {self.block} does not fit in grid {self.grid}")
        if self.state not in ("cluster", "scattered"):
            raise ConfigError(f"unknown state generator {self.state!r}")
        if not self.measurements or any(m not in ("dense", "line") for m in self.measurements):
            raise ConfigError(f"unknown measurement kind in {self.measurement!r}")
        if "line" in self.measurements and self.line_c <= 0:
            raise ConfigError("line_c must be positive")
        if any(m < 0 for m in self.M_list):
            raise ConfigError("measurement counts must be non-negative")
        if not self.omega_sets:
            raise ConfigError("omega_sets must not be empty")
        if any(k > MAX_TIME for o in self.omega_sets for k in o):
            raise ConfigError(f"observation times are limited to {MAX_TIME}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        try:
            Amplitude(self.amplitude)
            Sharing(self.sharing)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = list(self.grid)
        d["block"] = list(self.block)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def model(self) -> StateModel:
        return diffusion_model(self.grid, self.D, self.ds, self.Ts)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    M: int
    omega: tuple
    noise_std: float
    l2_error: float
    rel_error: float
    exact: bool
    solver_status: str
    wall_time: float = field(default=0.0, compare=False)
    eta: float = 0.0  # l2 budget handed to the noise-aware solver, 0 for exact recovery

    CSV_FIELDS = ("trial_index", "seed", "M", "omega", "noise_std", "eta", "l2_error", "rel_error", "exact",
                  "solver_status")

    def csv_row(self) -> dict:
        """Row for CSV output.  ``wall_time`` is left out so files stay reproducible."""
        return {
            "trial_index": self.trial_index,
            "seed": self.seed,
            "M": self.M,
            "omega": " ".join(str(k) for k in self.omega),
            "noise_std": repr(self.noise_std),
            "eta": repr(float(self.eta)),
            "l2_error": repr(float(self.l2_error)),
            "rel_error": repr(float(self.rel_error)),
            "exact": int(self.exact),
            "solver_status": self.solver_status,
        }


@dataclass(frozen=True)
class RatePoint:
    M: int
    rate: float
    trials: int
    seed: int
    omega: tuple = (0,)
    measurement: str = "dense"
    records: tuple = field(default=(), repr=False, compare=False)

    @property
    def exact_count(self) -> int:
        return sum(r.exact for r in self.records)


# -- trials -----------------------------------------------------------------


def trial_seed(master_seed: int, M: int, t: int) -> int:
    return derive_seed(master_seed, "trial", M, t)


def initial_state(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    if cfg.state == "cluster":
        return cluster_sparse_state(cfg.grid, cfg.block, seed, cfg.amplitude)
    return scattered_sparse_state(cfg.N, cfg.S, seed, cfg.amplitude)


def make_ensemble(cfg: ExperimentConfig, kind: str, M: int, omega: SampleSet, seed: int):
    if kind == "dense":
        return dense_gaussian_ensemble(M, cfg.N, omega, cfg.sharing, seed)
    return line_ensemble(M, cfg.grid, omega, cfg.line_c, seed, cfg.sharing, cfg.ds)


def noise_budget(noise_std: float, rows: int) -> float:
    """l2 budget ``sigma sqrt(MK)``, the expected norm of the noise vector."""
    return noise_std * math.sqrt(rows)


def run_trial(cfg: ExperimentConfig, model: StateModel, kind: str, M: int, omega, t: int) -> TrialRecord:
    """One recovery trial; solver trouble is recorded, never raised."""
    omega = as_sample_set(omega)
    seed = trial_seed(cfg.master_seed, M, t)
    start = time.perf_counter()
    x0 = initial_state(cfg, derive_seed(seed, "state"))
    if M == 0:
        metrics = recovery_metrics(np.zeros_like(x0), x0, cfg.exact_tol)
        return TrialRecord(t, seed, M, omega.times, cfg.noise_std, metrics.l2_error, metrics.rel_error,
                           metrics.exact, "no-measurements", time.perf_counter() - start)
    ens = make_ensemble(cfg, kind, M, omega, derive_seed(seed, "ensemble"))
    Phi = observability(model, omega, ens).materialize()
    y = Phi @ x0
    eta = noise_budget(cfg.noise_std, y.size)
    try:
        if cfg.noise_std > 0:
            y = y + cfg.noise_std * make_rng(derive_seed(seed, "noise")).standard_normal(y.size)
            res = solve_bpdn(Phi, eta, y)
        else:
            res = solve_bp(Phi, y)
        x_hat, status = res.x_hat, res.status.value
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        x_hat, status = np.zeros_like(x0), f"error:{type(exc).__name__}"
    metrics = recovery_metrics(x_hat, x0, cfg.exact_tol)
    exact = metrics.exact and status != Status.INFEASIBLE.value
    return TrialRecord(t, seed, M, omega.times, cfg.noise_std, metrics.l2_error, metrics.rel_error, exact, status,
                       time.perf_counter() - start, eta)


def _map(fn: Callable, items: Iterable, threads: int | None) -> list:
    items = list(items)
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def rate_point(cfg: ExperimentConfig, kind: str, M: int, omega, threads: int | None = None,
               model: StateModel | None = None) -> RatePoint:
    model = model or cfg.model()
    omega = as_sample_set(omega)
    recs = _map(lambda t: run_trial(cfg, model, kind, M, omega, t), range(cfg.trials), threads)
    ok = sum(r.exact for r in recs)
    return RatePoint(M, ok / cfg.trials, cfg.trials, cfg.master_seed, omega.times, kind, tuple(recs))


def phase_transition(cfg: ExperimentConfig, threads: int | None = None) -> list[list[RatePoint]]:
    """Recovery rate against ``M``: one curve per measurement kind and (single-time) sample set."""
    if any(len(o) != 1 for o in cfg.omega_sets):
        raise ConfigError("phase transition curves take one observation time per sample set")
    model = cfg.model()
    return [
        [rate_point(cfg, kind, M, omega, threads, model) for M in cfg.M_list]
        for kind in cfg.measurements
        for omega in cfg.omega_sets
    ]


def multi_time_sweep(cfg: ExperimentConfig, threads: int | None = None) -> list[RatePoint]:
    """Recovery rate for every sample set, ``M`` measurements per time."""
    model = cfg.model()
    return [
        rate_point(cfg, kind, M, omega, threads, model)
        for kind in cfg.measurements
        for omega in cfg.omega_sets
        for M in cfg.M_list
    ]


def noise_histogram(cfg: ExperimentConfig, threads: int | None = None) -> list[RatePoint]:
    """Noise-aware recovery errors for every (sample set, M); errors live in ``records``."""
    if cfg.noise_std <= 0:
        raise ConfigError("noise histogram needs noise_std > 0")
    return multi_time_sweep(cfg, threads)


def simulate(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """States ``x_k`` at ``cfg.sim_times`` from one seeded sparse initial state.

    Returns ``(times, states)`` with ``states[i]`` the state at ``times[i]``.
    """
    model = cfg.model()
    x0 = initial_state(cfg, derive_seed(cfg.master_seed, "simulate"))
    times = sorted(set(int(k) for k in cfg.sim_times))
    return np.array(times), np.vstack(power_blocks(model, times, x0))


# -- concentration suite ----------------------------------------------------


def _com_case(regime: str, N: int, K: int, a: float, seed: int):
    """(model, x0, sharing, bound regime) for one named suite regime."""
    if regime == "unitary":
        return random_orthogonal(N, derive_seed(seed, "A")), Sharing.INDEPENDENT, Regime.UNITARY
    if regime == "scaled":
        return scaled_unitary(a, random_orthogonal(N, derive_seed(seed, "A"))), Sharing.INDEPENDENT, Regime.SCALED_UNITARY
    if regime == "rotation":
        if K > N:
            raise InvalidParameterError("rotation regime needs K <= N")
        return cyclic_shift(N), Sharing.IDENTICAL, Regime.IDENTICAL_BLOCKS
    if regime == "identity":
        return StateModel(np.eye(N)), Sharing.IDENTICAL, Regime.IDENTICAL_BLOCKS
    raise ConfigError(f"unknown concentration regime {regime!r}")


def com_verification_suite(cfg: ExperimentConfig, threads: int | None = None) -> list[ComBoundReport]:
    """Empirical concentration failure rates next to their bounds.

    Regimes: ``unitary`` (random orthogonal ``A``), ``scaled`` (``a`` times
    one), ``rotation`` (cyclic shift with ``x0 = e_0`` and identical blocks,
    so the ``A^k x0`` are orthogonal) and ``identity`` (``A = I`` with
    identical blocks, the worst case).  ``x0`` is fixed per cell and only
    the ensemble is redrawn.
    """
    cells = [(r, M, K, eps) for r in cfg.com_regimes for K in cfg.com_K for M in cfg.com_M for eps in cfg.com_eps]

    def one(cell):
        regime, M, K, eps = cell
        seed = derive_seed(cfg.master_seed, "com", regime, M, K)
        model, sharing, bound_regime = _com_case(regime, cfg.com_N, K, cfg.com_a, seed)
        if regime in ("rotation", "identity"):
            x0 = np.zeros(cfg.com_N)
            x0[0] = 1.0
        else:
            x0 = make_rng(derive_seed(seed, "x0")).standard_normal(cfg.com_N)
        omega = SampleSet.consecutive(K)

        def factory(s):
            return dense_gaussian_ensemble(M, cfg.com_N, omega, sharing, s)

        return empirical_com(model, omega, x0, factory, eps, cfg.trials, seed, bound_regime, a=cfg.com_a)

    return _map(one, cells, threads)
