"""Numerical laboratory for stochastic Ricci flow on the flat torus."""

from .lattice import (GeometryMismatch, ScalarField, TorusGeometry, grad_inner,
                      integrate, laplacian)
from .gff import (HEAT, CIRCLE, SIGMA_L1, SIGMA_L2, GffSampler, Mollifier,
                  cm_log_weight, cm_shift, mollify)
from .gmc import (GmcMeasure, background_charge, build_gmc, gamma_of_sigma,
                  invert_gmc, mass_moment, shift_check)
from .srf import (BlowUpError, Insertion, SrfConfig, TrajectoryRecord,
                  insertion_decompose, run_srf)
from .totalmass import (MassSdeConfig, TotalMassParams, classify_boundary,
                        delta_index, hitting_cdf, laplace_transform,
                        seiberg_check, simulate_mass, simulate_paths)
from .verify import (Bump1d, IbpReport, TestFunctional, frechet, ibp_residual,
                     qv_regression, drift_regression, covariation_regression,
                     reference_catalog)
from .expansion import (ExpansionConfig, decay_horizon, solve_phi0, solve_phi1)

__version__ = "0.1.0"
