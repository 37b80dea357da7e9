"""Pattern counts, cluster tails and maximal clusters for random fields on Z^d."""

from .clusters import (ClusterLabeling, SizeCensus, cluster_at, extract_clusters,
                       max_cluster_size, size_census)
from .estimators import (CensusAccumulator, ConcentrationReport, RatioLimitReport, TailReport,
                         conditional_pattern_stats, estimate_mu, fit_stretched,
                         pattern_theorem_report, ratio_limit_report)
from .exact import (enumerate_animals, exact_cn, exact_cstar, exact_joint_counts, exact_tail,
                    verify_supermulti, verify_swap_identity)
from .gumbel import GumbelReport, MaxClusterSample, choose_un, gumbel_compare, simulate_max_clusters
from .harvest import PatternRecords, harvest_patterns
from .lattice import Configuration, Window, cube_geometry, grid_v_sites
from .patterns import Pattern, box_probability, cluster_contribution, count_NP, gamma
from .sampler import (MarkovConditionalSpec, ProductMeasureSpec, RngPolicy, sample_markov,
                      sample_product)

__version__ = "0.1.0"
