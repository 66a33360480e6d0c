"""Precision bounds for estimating several parameters of noisy quantum channels."""
from .bounds import (BoundResult, finite_n_bound_eval, markovian_sql_bound, parallel_bound_eval,
                     rld_bound, single_use_bound, sql_bound, sum_of_singles)
from .channels import HeisenbergPossible, LindbladModel, ParamChannel, hks_check
from .discrimination import (Ensemble, SpeedLimitQuery, grover_runtime_bound, helstrom_binary,
                             helstrom_multi, pairwise_error_lower_bound, speed_limit_queries)
from .incompat import IncompatReport, incompat_asymptotic, incompat_single_use, naturalness_check
from .recovery import RecoveryResult, check_holevo_saturation, recover_optimal_state
from .zoo import zoo_build

__version__ = "0.1.0"
