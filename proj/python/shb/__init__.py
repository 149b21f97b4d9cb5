"""Stochastic heavy ball solvers for consistent linear systems."""

from ._core import (
    L2Rate,
    Problem,
    ShbError,
    analyze,
    beta_upper_bound,
    cesaro_bound,
    gen_problem,
    l1_params,
    l2_rate,
    load_problem,
    parse_libsvm,
    read_bundle,
    solve,
    spectrum,
    verify,
    write_bundle,
)

__all__ = [
    "L2Rate",
    "Problem",
    "ShbError",
    "analyze",
    "beta_upper_bound",
    "cesaro_bound",
    "gen_problem",
    "l1_params",
    "l2_rate",
    "load_problem",
    "parse_libsvm",
    "read_bundle",
    "solve",
    "spectrum",
    "verify",
    "write_bundle",
]
