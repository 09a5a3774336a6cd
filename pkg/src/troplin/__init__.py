"""Combinatorial linear series on metric graphs.

Exact rational arithmetic throughout. The layers, bottom up: rank functions
on finite box lattices (hypercube), permutation arrays (permarray), local
matroid data (matroidcomplex), metric graphs and piecewise affine functions
(metricgraph), slope structures with rank verification (slopes), and
finitely generated tropical semimodules with the rank-one classification
(series).
"""

from .hypercube import (
    RankFunction,
    RankFunctionError,
    jumps,
    partition_top_jumps,
    standard_rank_function,
    validate_rank_function,
)
from .permarray import (
    DotArray,
    array_from_rank_function,
    is_permutation_array,
    rank_function_from_array,
)
from .matroidcomplex import (
    LocalMatroid,
    MatroidComplex,
    coherent_complex_from_rank,
    export_local_matroids,
    rank_function_from_complex,
)
from .metricgraph import (
    Divisor,
    Edge,
    GraphPoint,
    MetricGraph,
    PLFunction,
    Refinement,
    V,
    divisor_of,
    linear_equivalent,
    refine_model,
    tropical_min,
    tropical_min_many,
)
from .slopes import (
    RankVerdict,
    SlopeStructure,
    check_nonincreasing_slopes,
    crude_rank_check,
    enumerate_rank_functions,
    enumerate_slope_structures,
    in_rat_D_S,
    is_compatible,
    refine_structure,
    translate_structure,
    validate_slope_structure,
)
from .series import (
    Cut,
    HarmonicMorphism,
    QuotientTree,
    TropModule,
    check_linear_series,
    classify_g1d,
    extremals,
    f_v,
    find_unsaturated_cut,
    local_reduced_step,
    membership,
    pullback_from_tree,
    realize_jump,
    reduced_divisor,
    tropical_dependence,
    tropical_rank,
)

__version__ = "0.1.0"
