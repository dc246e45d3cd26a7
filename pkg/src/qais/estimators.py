"""scikit-learn style front ends.

``QCBMSampler`` fits circuit parameters to a target PMF, ``QAISIntegrator``
fits a proposal to an integrand and then integrates it, ``VegasIntegrator``
adapts a separable grid.  Hyper-parameters live in ``__init__`` so
``get_params``/``set_params``/``clone`` work as usual; fitted state carries a
trailing underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimator import MixtureConfig, qais_estimate, repeat_runs
from .statevector import AnsatzSpec, probabilities, run_ansatz, sample
from .target import TargetPMF, build_target_pmf
from .train import TrainConfig, kl_divergence, oracle_proposal, train_qcbm
from .validation import check_grid, check_integrand, check_pmf, check_shots
from .vegas import VegasConfig, map_point, vegas_integrate


class QCBMSampler(BaseEstimator):
    """Quantum circuit Born machine over ``2^n`` basis states.

    Parameters
    ----------
    layers : str
        Layer list such as ``"EZ,R,EX,R"``.
    optimizer : {"cobyla", "nelder-mead"}
    max_iter : int
        Cost-evaluation budget.
    initial_step : float
        Initial trust-region radius / simplex size.
    tol : float
    random_state : int
        Seed of the parameter initialisation.
    """

    def __init__(self, layers="EZ,R,EX,R", optimizer="cobyla", max_iter=5000,
                 initial_step=0.5, tol=1e-6, random_state=0):
        self.layers = layers
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.initial_step = initial_step
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        """Fit to a target PMF (``TargetPMF`` or probability array)."""
        p = check_pmf(X)
        self.n_qubits_ = int(p.size).bit_length() - 1
        self.ansatz_ = AnsatzSpec.parse(self.layers)
        cfg = TrainConfig(self.optimizer, int(self.max_iter), float(self.initial_step),
                          float(self.tol), int(self.random_state))
        self.report_ = train_qcbm(self.ansatz_, self.n_qubits_, p, cfg)
        self.params_ = self.report_.params
        self.kl_ = self.report_.final_kl
        return self

    def state(self) -> np.ndarray:
        check_is_fitted(self, "params_")
        return run_ansatz(self.ansatz_, self.n_qubits_, self.params_)

    def predict_proba(self, X=None) -> np.ndarray:
        """Basis-state probabilities of the trained circuit (``X`` is ignored)."""
        return probabilities(self.state())

    def sample(self, n_shots, random_state=None):
        return sample(self.predict_proba(), check_shots(n_shots), random_state)

    def score(self, X, y=None) -> float:
        """Negative KL divergence of ``X`` from the model."""
        return -kl_divergence(check_pmf(X, self.n_qubits_), self.predict_proba())


class QAISIntegrator(BaseEstimator):
    """Adaptive importance sampling with a circuit-encoded grid proposal.

    Parameters
    ----------
    qubits : sequence of int
        Qubits per axis.
    proposal : {"oracle", "train"} or ndarray
        ``"oracle"`` loads ``sqrt`` of the target PMF directly, ``"train"`` fits
        a :class:`QCBMSampler`; an array is used as a given statevector.
    n_per_cell : int
        Integrand evaluations per cell for the target PMF.
    beta : float
        Defensive-mixture fraction.
    layers, optimizer, max_iter, initial_step : training settings.
    random_state : int
    """

    def __init__(self, qubits=(5, 5), proposal="oracle", n_per_cell=8, beta=0.0,
                 layers="EZ,R,EX,R", optimizer="cobyla", max_iter=5000,
                 initial_step=0.5, random_state=0):
        self.qubits = qubits
        self.proposal = proposal
        self.n_per_cell = n_per_cell
        self.beta = beta
        self.layers = layers
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.initial_step = initial_step
        self.random_state = random_state

    def fit(self, f, y=None):
        f = check_integrand(f)
        self.spec_ = check_grid(self.qubits, f)
        self.integrand_ = f
        self.mix_ = MixtureConfig(float(self.beta))
        self.target_: TargetPMF = build_target_pmf(self.spec_, f, int(self.n_per_cell),
                                                   seed=self.random_state)
        if isinstance(self.proposal, str) and self.proposal == "oracle":
            self.state_ = oracle_proposal(self.target_, self.spec_.n)
        elif isinstance(self.proposal, str) and self.proposal == "train":
            self.sampler_ = QCBMSampler(self.layers, self.optimizer, self.max_iter,
                                        self.initial_step, random_state=self.random_state)
            self.sampler_.fit(self.target_)
            self.state_ = self.sampler_.state()
        elif isinstance(self.proposal, str):
            raise ValueError(f"unknown proposal {self.proposal!r}")
        else:
            state = np.asarray(self.proposal)
            check_pmf(probabilities(state) if np.iscomplexobj(state) else state, self.spec_.n)
            self.state_ = state
        pmf = probabilities(self.state_) if np.iscomplexobj(self.state_) else self.state_
        self.kl_ = kl_divergence(self.target_, pmf)
        return self

    def integrate(self, n_shots, random_state=None, return_samples=False):
        check_is_fitted(self, "state_")
        return qais_estimate(self.spec_, self.integrand_, self.state_, check_shots(n_shots),
                             self.mix_, random_state, return_samples=return_samples)

    def repeat(self, n_shots, n_runs=100, random_state=0, n_jobs=1):
        check_is_fitted(self, "state_")
        return repeat_runs(self.spec_, self.integrand_, self.state_, check_shots(n_shots),
                           self.mix_, n_runs, random_state, n_jobs)


class VegasIntegrator(BaseEstimator):
    """Classic VEGAS; ``fit`` adapts the grid, ``transform`` applies its map."""

    def __init__(self, n_bins=50, n_eval=10_000, n_iter=10, alpha=1.5, random_state=0):
        self.n_bins = n_bins
        self.n_eval = n_eval
        self.n_iter = n_iter
        self.alpha = alpha
        self.random_state = random_state

    def fit(self, f, y=None):
        f = check_integrand(f)
        cfg = VegasConfig(int(self.n_bins), int(self.n_eval), int(self.n_iter),
                          float(self.alpha), self.random_state)
        self.result_ = vegas_integrate(f, cfg)
        self.grid_ = self.result_.grid
        self.estimate_ = self.result_.mean
        self.sigma_ = self.result_.sigma
        return self

    def transform(self, Y):
        """Map unit-cube points through the adapted grid; returns ``x``."""
        check_is_fitted(self, "grid_")
        return map_point(self.grid_, np.asarray(Y, dtype=float))[0]

    def jacobian(self, Y):
        check_is_fitted(self, "grid_")
        return map_point(self.grid_, np.asarray(Y, dtype=float))[1]
