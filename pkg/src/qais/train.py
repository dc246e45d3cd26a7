"""Born-machine training of the ansatz against a target PMF."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .statevector import AnsatzSpec, probabilities, run_ansatz
from .target import TargetPMF

Q_FLOOR = 1e-300
OPTIMIZERS = ("cobyla", "nelder-mead")


def _pmf(p) -> np.ndarray:
    return np.asarray(p.probabilities if isinstance(p, TargetPMF) else p, dtype=float)


def kl_divergence(target, q, atol: float = 1e-9) -> float:
    """``sum_i P_i ln(P_i / Q_i)`` over the support of ``P``.

    Returns ``inf`` when ``P_i > 0`` meets ``Q_i`` below ``1e-300``.
    """
    p = _pmf(target)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("P and Q must have the same shape")
    for name, v in (("P", p), ("Q", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > atol:
            raise ValueError(f"{name} is not a normalised PMF")
    sup = p > 0
    if np.any(q[sup] < Q_FLOOR):
        return math.inf
    return float(np.sum(p[sup] * np.log(p[sup] / q[sup])))


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "cobyla"
    max_iter: int = 5000
    initial_step: float = 0.5
    tol: float = 1e-6
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class TrainReport:
    params: np.ndarray
    history: list = field(default_factory=list)
    final_kl: float = math.inf
    wall_time: float = 0.0
    message: str = ""

    @property
    def n_evals(self) -> int:
        return len(self.history)

    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate([kl for _, kl in self.history])

    def write_history(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "kl"])
            for it, kl in self.history:
                w.writerow([it, repr(float(kl))])


class _Tracker:
    """Cost wrapper keeping the evaluation history and the best point."""

    def __init__(self, ansatz: AnsatzSpec, n: int, target: np.ndarray, budget: int):
        self.ansatz, self.n, self.target, self.budget = ansatz, n, target, budget
        sup = target > 0
        self.sup = sup
        self.entropy_part = float(np.sum(target[sup] * np.log(target[sup])))
        self.history: list[tuple[int, float]] = []
        self.best_cost = math.inf
        self.best_x = None

    def cost(self, x: np.ndarray) -> float:
        q = probabilities(run_ansatz(self.ansatz, self.n, x))[self.sup]
        if np.any(q < Q_FLOOR):
            c = math.inf
        else:
            c = self.entropy_part - float(np.dot(self.target[self.sup], np.log(q)))
        if len(self.history) < self.budget:
            self.history.append((len(self.history), c))
            if c < self.best_cost:
                self.best_cost, self.best_x = c, np.array(x, dtype=float)
        # inf breaks the simplex/trust-region updates
        return c if math.isfinite(c) else 1e300


def train_qcbm(ansatz: AnsatzSpec, n: int, target, cfg: TrainConfig = TrainConfig()) -> TrainReport:
    """Minimise ``KL(target || |psi(theta)|^2)`` with a derivative-free optimiser.

    The all-zero parameter vector (the uniform superposition) is evaluated first
    so the result is never worse than the untrained circuit; the search itself
    starts from angles drawn uniformly in ``[-init_scale, init_scale]``.
    ``history`` counts one entry per cost evaluation, capped at ``max_iter``.
    """
    p = _pmf(target)
    if p.size != 1 << n:
        raise ValueError(f"target has {p.size} cells, circuit has {1 << n} states")
    t0 = time.perf_counter()
    k = ansatz.n_params(n)
    tr = _Tracker(ansatz, n, p, cfg.max_iter)
    tr.cost(np.zeros(k))
    message = ""
    if tr.best_cost <= cfg.tol:
        message = "uniform superposition already matches the target"
    elif cfg.max_iter > 1:
        rng = np.random.default_rng(cfg.seed)
        x0 = rng.uniform(-cfg.init_scale, cfg.init_scale, k)
        budget = cfg.max_iter - 1
        if cfg.optimizer == "cobyla":
            res = minimize(tr.cost, x0, method="COBYLA",
                           options={"maxiter": budget, "rhobeg": cfg.initial_step,
                                    "tol": cfg.tol})
        else:
            simplex = np.vstack([x0, x0 + cfg.initial_step * np.eye(k)])
            res = minimize(tr.cost, x0, method="Nelder-Mead",
                           options={"maxfev": budget, "initial_simplex": simplex,
                                    "fatol": cfg.tol, "xatol": cfg.tol})
        message = str(res.message)
    return TrainReport(tr.best_x, tr.history, tr.best_cost,
                       time.perf_counter() - t0, message)


def oracle_proposal(target, n: int | None = None) -> np.ndarray:
    """Statevector with amplitudes ``sqrt(P_k)``: reproduces the target exactly."""
    p = _pmf(target)
    if n is not None and p.size != 1 << n:
        raise ValueError("target size does not match the qubit count")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("target is not a normalised PMF")
    return np.sqrt(p).astype(complex)
