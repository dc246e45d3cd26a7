"""Quantum adaptive importance sampling, simulated classically."""

from .estimator import (EstimateResult, MixtureConfig, SampleBatch, allocate_samples,
                        plain_mc_estimate, qais_estimate, repeat_runs, sobol_points)
from .estimators import QAISIntegrator, QCBMSampler, VegasIntegrator
from .grid import (GridSpec, HyperRect, cell_bounds, cell_widths, coords_to_linear,
                   linear_to_coords, rect_volume)
from .statevector import (AnsatzSpec, ShotCounts, apply_two_qubit_rotation, apply_u3,
                          init_uniform, probabilities, run_ansatz, sample)
from .target import (Integrand, PentagonKinematics, TargetPMF, build_target_pmf,
                     causal_pentagon_integrand, gauss2_integrand, multipeak_integrand,
                     p11_kinematics, pentagon_ltd_integrand, ring_integrand)
from .tiling import (TileCoverage, classify_regions, full_coverage, gap_tiles,
                     greedy_expand)
from .train import TrainConfig, TrainReport, kl_divergence, oracle_proposal, train_qcbm
from .vegas import (VegasConfig, VegasGrid, VegasResult, map_point, phantom_diagnostic,
                    vegas_integrate)

__version__ = "0.1.0"
