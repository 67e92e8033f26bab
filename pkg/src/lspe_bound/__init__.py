"""Concentration-bound tooling for LSPE(lambda) policy evaluation on finite Markov chains."""

from .chain import (MarkovRewardChain, MixingProfile, StationaryInfo, Trajectory, load_chain,
                    mixing, mixing_profile, sample_path, stationary_distribution, tau_min,
                    time_marginals, trajectory_seed, tv_distance)
from .experiment import (ExperimentConfig, ExperimentReport, check_theorem, emit_report,
                         load_config, paulin_domination, run_monte_carlo)
from .ledger import (ConstantLedger, TheoremEnvelope, TheoremInputs, TheoremResult,
                     build_ledger, derived_constants, estimate_cited_constants,
                     exact_expectations, k_constants, lemma_tail_bounds, paulin_tail,
                     schedule_functions, theorem_evaluate)
from .model import (ExactModel, FeatureBasis, HGeometry, build_model, h_norm, h_opnorm,
                    load_basis, solve_lyapunov)
from .runner import (BatchRunner, RunnerState, StepSchedule, build_schedule, chi_weights,
                     decay_products, diagnostics, run_reference, run_trajectory, step)

__version__ = "0.1.0"
