"""Numerical laboratory for circle maps with infinitely many critical points."""

__version__ = "0.1.0"

from .mapcore import (  # noqa: F401
    MapParams,
    make_params,
    reference_params,
    load_config,
    save_config,
    eval_map,
    eval_fhat,
    eval_derivative,
    eval_second_derivative,
    critical_point,
    critical_value,
    nearest_critical_point,
    truncated_distance,
)
