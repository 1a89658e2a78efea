/** Registry of known table schemas and their required columns. */

export const REQUIRED_COLUMNS: Record<string, string[]> = {
  "srflab.gff_summary": ["replica", "min", "max", "l2_norm"],
  "srflab.gmc_summary": ["replica", "total_mass", "max_cell_mass"],
  "srflab.gmc_moment": ["p", "estimate", "ci_low", "ci_high"],
  "srflab.gmc_eps_convergence": ["eps_coarse", "eps_fine", "abs_diff"],
  "srflab.srf_mass": ["replica", "time", "total_mass", "blew_up"],
  "srflab.mass_paths": ["replica", "time", "mass"],
  "srflab.hitting_times": ["replica", "hit_time", "hit"],
  "srflab.mass_oracle": ["time", "mean_mass"],
  "srflab.delta_scan": ["delta", "hit_fraction", "boundary_class"],
  "srflab.hitting_oracle": ["time", "cdf"],
  "srflab.laplace_compare": ["u", "empirical", "oracle"],
  "srflab.ibp_residuals": ["functional", "direction", "lhs", "rhs", "z", "n_samples"],
  "srflab.qv_regression": ["observable", "slope", "slope_stderr", "intercept", "n_windows"],
  "srflab.qv_scatter": ["predicted", "realized"],
  "srflab.expansion_energy": ["time", "dirichlet_energy", "max_abs"],
};
