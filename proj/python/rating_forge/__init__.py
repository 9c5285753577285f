"""Python access to the rating-forge core."""

from ._core import (
    BoundResult,
    ConditionReport,
    DeltaBound,
    EngineError,
    GameParams,
    Geometry,
    InfeasibleError,
    PayoffPair,
    Plan,
    RatingDistribution,
    RatingUpdateRule,
    SearchResult,
    ValidationError,
    Z3Source,
    build_geometry,
    check_conditions,
    decompose,
    delta_lower_bound,
    distribution_transition,
    ic_margin,
    membership,
    search_stationary,
    stage_payoff,
    whitewash_benefit,
    x0_plus,
    x1_plus,
    zeta,
)

__all__ = [name for name in dir() if not name.startswith("_")]
