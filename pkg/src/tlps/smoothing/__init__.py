from .dag import (
    DegenerateGradientWarning,
    SmoothingParams,
    SoftDag,
    build_dag,
    error_bound,
    exact_subgradient,
    hard_robustness,
    smooth_gradient,
    smooth_robustness,
)
