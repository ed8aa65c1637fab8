"""Variable-length coding under unequal symbol costs: cost capacity, the
cost-aware interval coder, overflow probabilities and information spectra."""

from ._core import (
    BoundViolation,
    BracketNotFound,
    CapacityNotUniform,
    ConstructionBug,
    CostCapacity,
    CostFunction,
    DecodeFailure,
    DegenerateSource,
    DomainError,
    EnumerationTooLarge,
    IntervalEncoder,
    InvalidInput,
    OvcostError,
    SourceModel,
    UnencodableInput,
    __version__,
    capacity_residual,
    gaussian_cdf,
    gaussian_quantile,
    lemma1_rhs,
    lemma2_rhs,
    make_grid,
    overflow_exact,
    overflow_mc,
    pack_bits,
    run_cli,
    solve_cost_capacity,
    spectrum,
    threshold,
    threshold_second_order_iid,
    unpack_bits,
    verify_bounds,
)
