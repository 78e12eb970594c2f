"""Uniform pattern-avoiding permutations, their regenerative limits, and checks."""

__version__ = "0.1.0"

from .catalan import (CatalanTable, NuPmfs, SplitLaw, catalan, nu_limit, nu_n, nu_pmfs,
                      pmf_X, sample_hat_X, sample_split_position, sample_X, sample_X_array,
                      sample_X_inversion, sample_Y, split_weights)
from .limits import (INF, ExtPrefix, Segment, SegmentTrace, limit_prefix, limit_prefix_213,
                     limit_prefix_231, limit_prefix_312, limit_prefix_321_partial, replay)
from .patterns import (ALL_PATTERNS, Pattern, Permutation, contains, contains_bruteforce,
                       count_birr_321, enumerate_avoiders, first_irreducible_block,
                       is_block_irreducible)
from .rng import RNG_NAME, RngStream
from .samplers import (avoider_prefix, sample_avoider, sample_avoider_image,
                       sample_birr_321)
from .verify import (CFPoint, EmpiricalDist, check_positional_law, convergence_report,
                     coordinate_pmf_limit, empirical_coordinate_pmf, escape_scan,
                     stable_cf_check, tv_distance)
