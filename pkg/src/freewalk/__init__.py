"""freewalk: stationary measures for random walks on free-group boundaries.

Exact-rational computation of conformal (Patterson-Sullivan) measures on the
boundary of a weighted free group, the spike family of Radon-Nikodym
derivatives, the greedy positive-basis decomposition producing a group
measure mu with mu * nu = nu', and audits of stationarity, moments, entropy
and the shadow/decay inequalities on cylinder partitions.
"""

from .words import WeightedFreeGroup, InputError, reduce_word, invert, multiply
from .geometry import (Cylinder, VisualParams, LogScale, default_params,
                       gromov_product, busemann, locally_constant_cells,
                       locally_constant_depth, visual_quasimetric, shadow,
                       sup_product, plus_direction, translate_cylinder,
                       merge_cylinders, IdenticalBoundaryPointsError,
                       OverlappingCylindersError, AmbiguousCylinderError)
from .partitions import (CylinderPartition, LocallyConstantFunction,
                         PartitionError, ValueNotConstantError,
                         refine_leaves, trie_closure, validate_partition)
from .measures import (BoundaryMeasure, GroupMeasure, uniform_ps_measure,
                       critical_exponent, conformal_exponent, poincare_series,
                       weighted_shell_counts, radon_nikodym, pushforward,
                       convolve, integrate, l1_distance, ps_series_audit,
                       DivergentNormalizationError, ConformalityError,
                       RefinementRuleError)
from .spikes import (Spike, SpikeReport, make_spike, verify_spike,
                     verify_q_spike, decay_check, shadow_lemma_audit,
                     lipschitz_scale, local_doubling_sup, ball_cells,
                     DegenerateSpikeError, DecayReport, ShadowAuditReport)
from .decomposition import (GreedyParams, DecompositionResult, AuditConstants,
                            measure_constants, greedy_subfunction,
                            basis_decompose, moment_decompose,
                            sequence_decay_bound, sequence_decay_iterate,
                            audit_case_envelope, GreedyParameterError,
                            InternalInvariantError)
from .stationarity import (StationarityReport, verify_stationarity,
                           sphere_uniform, mix, functionals, symmetrize,
                           UnsupportedClosedFormError)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
