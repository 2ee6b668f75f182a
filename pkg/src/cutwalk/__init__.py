"""Cut structures, escape probabilities and Lyapunov drifts of near-critical random walks."""

__version__ = "0.1.0"

from .cuts import (CANDIDATE, CONFIRMED, CutAnnulus, CutInterval, CutReport, SeparatingSet,
                   count_disjoint_cut_intervals, detect_Ax_events, detect_cut_annuli,
                   detect_cut_intervals, detect_cut_times, detect_cutpoints,
                   detect_separating_set, is_cut_interval)
from .estimators import CutFeatureTransformer, IncrementMomentEstimator, LogGrowthRegressor
from .experiments import (ExperimentConfig, ExperimentResult, fit_log_growth,
                          run_Ax_frequency, run_annuli_experiment, run_cutpoint_growth,
                          run_dyadic_block_stats)
from .generators import (birth_death_lamperti, constant_step, elliptic_walk, make_spec,
                         plus_one_minus_two, ssrw_norm, ssrw_vector)
from .hitting import (EscapeEstimate, bd_exact_race, first_passage, mc_escape_forever,
                      mc_race, targeted_entry_probability)
from .ladder import LadderSampler
from .lyapunov import (LyapunovFunction, exact_one_step_drift, f_gamma, g_nu,
                       predicted_drift)
from .process import (MomentProfile, ProcessSpec, classify_profile,
                      empirical_increment_moments, simulate, verify_ellipticity)
from .trajectory import ScalarTrajectory, VectorTrajectory, load_trajectory, save_trajectory
