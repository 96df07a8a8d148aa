"""Exact and asymptotic computations for renewal processes with index-0 heavy tails."""
from .sv_func import (BelowMonotoneThreshold, Const, ConjugateSV, LogLogPow, LogPow, Power, Product,
                      SVFunc, karamata_ratios, sv_conjugate_eval, sv_eval)
from .interarrival import (HorizonExceeded, InterArrival, LaplacePair, NotNormalizable, PeriodicDistribution,
                           TailDominates, build_defective, build_explicit, build_interleaved, build_regvar,
                           d0, delta_one, laplace, ssrw_z2, tail, truncated_moment, uniform_12)
from .renewal_exact import (InvalidTruncation, KStepTable, NegativePmfWarning, RenewalTable, ZeroDenominator,
                            big_jump_conditional, gf_identity_check, intersect_renewals, invert_renewal,
                            k_step_cdf, k_step_table, log_cdf, renewal_mass)
from .asymptotics import (Regime, RegimeUnknown, darling_cdf, extdarling_lower_const, fuk_nagaev_bound,
                          ld_rate, predict_local_pmf, predict_renewal_mass, resolve_regime, reverse_avg_pair,
                          slow_variation_check_U)
from .rare_event import (MCEstimate, TiltSolution, darling_empirical, is_estimate_cdf, plain_estimate_cdf,
                         sample_paths, solve_tilt, tilted_variance_check)

__version__ = "0.1.0"
