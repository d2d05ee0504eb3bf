"""Reconstruction of interior and boundary potentials of a 1-D Schrodinger
equation with a dynamic boundary condition, from one boundary flux
measurement, via Carleman-weighted functional minimization."""

__version__ = "0.1.0"

from .carleman import (DecompositionResiduals, RatioResult,
                       admissible_ensemble, apply_P1, apply_P2, apply_Q1,
                       apply_Q2, apply_R_gamma, carleman_ratio,
                       conjugated_decomposition_check, implied_psi_convexity,
                       localized_member, t0_trace_ratio, time_bump)
from .cbrec import (IterationRecord, ReconstructionReport, StepDiagnostics,
                    cbrec_step, run_cbrec, true_potentials, truncate_potential,
                    weighted_t0_error)
from .config import (config_from_dict, config_to_dict, load_config,
                     sample_on_t, sample_on_x, sample_on_xt, save_config)
from .core import (Grid1D, Potentials, RunConfig, Trajectory, build_grid,
                   validate_config)
from .extension import extend_conjugate_even, extend_odd_conjugate, \
    time_derivative
from .forward import (Measurement, SourceData, drift_sign_report,
                      flux_at_right, mass_series, solve_forward,
                      synthesize_measurement)
from .functional import (CGOptions, JData, MinimizerResult, apply_N,
                         apply_N_gamma, assemble_normal_system, eval_J,
                         j_gradient, minimize_J, observation_series)
from .runio import (read_measurement, read_report, read_series_csv,
                    write_manifest, write_measurement, write_report,
                    write_series_csv, write_table_csv)
from .stability import (EnsembleSpec, LipschitzTable, RatioRow, h1_norm,
                        lipschitz_experiment, pair_ratio,
                        perturbation_ensemble)
from .weights import (CarlemanParams, ConvexBody, classify_gamma_star,
                      default_alpha, grad_psi_nd, minkowski_mu,
                      normal_derivative_psi, psi_1d, theta, theta_table,
                      varphi, weight_e2sphi, weight_table)

__all__ = [name for name in dir() if not name.startswith("_")]
