"""Design criteria, design regions and the design search."""

from .criteria import (
    CriterionKind,
    CriterionValue,
    EfficiencyMode,
    EfficiencyReport,
    augment,
    d_criterion,
    d_efficiency,
    dp_criterion,
    log_det_gram,
    ptp_element,
    ptp_terms,
)
from .planner import (
    DesignOutcome,
    design_criterion,
    design_efficiency,
    design_initial,
    design_sequential,
)
from .region import DesignRegion
from .search import (
    CandidateResult,
    OptimizerResult,
    RecheckResult,
    SearchTrace,
    candidate_search,
    grid_local_maxima,
    grid_search,
    interior_recheck,
    optimize_design,
    refine_starts,
    search_design,
)

__all__ = [
    'CandidateResult',
    'CriterionKind',
    'CriterionValue',
    'DesignOutcome',
    'DesignRegion',
    'EfficiencyMode',
    'EfficiencyReport',
    'OptimizerResult',
    'RecheckResult',
    'SearchTrace',
    'augment',
    'candidate_search',
    'd_criterion',
    'd_efficiency',
    'design_criterion',
    'design_efficiency',
    'design_initial',
    'design_sequential',
    'dp_criterion',
    'grid_local_maxima',
    'grid_search',
    'interior_recheck',
    'log_det_gram',
    'optimize_design',
    'ptp_element',
    'ptp_terms',
    'refine_starts',
    'search_design',
]
