"""Spectral pricing engine for realized-variance and volatility derivatives.

A regime-switching jump-diffusion for the forward price is built as a
finite-state continuous-time Markov chain; its generator is extended
with a periodic variance counter, block-diagonalized semi-analytically,
and the resulting joint law of (price, realized variance) prices
variance and volatility swaps, swaptions, forward-starting options, the
log contract and volatility-index portfolios.  A daily-sampled Monte
Carlo oracle cross-validates the spectral values.
"""

from .errors import (
    ConfigError,
    DegenerateRateError,
    DiagonalizationError,
    DomainError,
    InversionError,
    KernelError,
    LeakageError,
    NumericalError,
    VolspecError,
)
from .lift import (
    BlockFamily,
    JointDistribution,
    VarianceGrid,
    alpha_schedule,
    build_blocks,
    instantaneous_variance,
    joint_distribution,
    leakage_probability,
    marginal_variance_pdf,
)
from .mc import MCResult, PathConfig, SigmaSample, daily_kernel, mc_price, simulate
from .model import (
    DiscountCurve,
    MarkovGenerator,
    Model,
    RegimeParams,
    StateGrid,
    SwitchGenerator,
    TimeChange,
    assemble_regime_generator,
    build_cev_generator,
    build_elliptical_grid,
    build_regime_generator,
    bundled_config,
    financial_time,
    load_model,
    partition_of_unity,
    subordinate,
)
from .pricing import (
    ForwardStartSpec,
    GreeksProfile,
    LiftParams,
    VanillaSpec,
    VariancePayoff,
    VixSpec,
    forward_implied_vol,
    forward_smile,
    greeks_profile,
    implied_vol,
    log_contract,
    model_greeks,
    model_vix_portfolio,
    price_european,
    price_forward_start,
    price_vanilla,
    price_variance_derivative,
    vix_pdf,
    vix_portfolio,
    vol_points,
)
from .spectral import (
    CirculantRow,
    SpectralDecomposition,
    apply_function,
    block_diagonalize,
    circulant_eigenvectors,
    circulant_spectrum,
    diagonalize,
    partial_circulant_apply,
    transition_kernel,
)

__version__ = "0.1.0"
