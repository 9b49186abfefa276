"""Pricing: Europeans, Greeks, forward-starts, variance payoffs, VIX.

All prices are expectations against kernels of the underlying chain or
against the variance marginal of the lift, discounted with the model's
deterministic curve.  Variance-unit quantities are quoted in volatility
terms as ``100 * sqrt(value)`` percent wherever a report calls for it.

Payoffs are evaluated at the terminal node levels directly; strikes live
on the continuum and are never snapped to the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from . import lift
from .errors import DomainError, InversionError

#: Optional moneyness band for the volatility-index strip; the default
#: strip uses every lattice level, which a long-maturity strip needs to
#: capture the down-jump mass far below spot.
VIX_STRIKE_BAND = (0.4, 2.5)
#: Default tenor of the volatility index, in years.
VIX_TENOR = 1.0 / 12.0


def vol_points(variance_value: float) -> float:
    """Quote a variance-unit value in volatility terms (percent)."""
    return 100.0 * math.sqrt(max(variance_value, 0.0))


@dataclass(frozen=True)
class VanillaSpec:
    """A European call or put on the relative price scale."""

    kind: str
    strike: float
    maturity: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise DomainError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if self.strike <= 0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class ForwardStartSpec:
    """Call with strike set at ``t_prime`` as ``forward_strike * S_{t'}``."""

    t_prime: float
    maturity: float
    forward_strike: float

    def __post_init__(self):
        if not 0 < self.t_prime < self.maturity:
            raise DomainError(
                f"need 0 < t_prime < maturity, got {self.t_prime}, {self.maturity}"
            )
        if self.forward_strike < 0:
            raise DomainError("forward strike must be nonnegative")


@dataclass(frozen=True)
class VariancePayoff:
    """A payoff of annualized realized variance ``h(Sigma)``.

    ``var_swap`` and ``vol_swap`` price the fair strikes ``E[Sigma]`` and
    ``E[sqrt(Sigma)]``; swaptions are calls on variance or volatility,
    and ``capped_vol_swap`` caps realized volatility at ``cap`` before
    netting the strike.  ``custom`` takes any vectorized ``h``.
    """

    kind: str
    strike: float = 0.0
    cap: float = 0.0
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    _KINDS = (
        "var_swap",
        "vol_swap",
        "var_swaption",
        "vol_swaption",
        "capped_vol_swap",
        "custom",
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise DomainError(f"unknown variance payoff kind {self.kind!r}")
        if self.strike < 0:
            raise DomainError("strike must be nonnegative")
        if self.kind == "capped_vol_swap" and self.cap <= 0:
            raise DomainError("volatility cap must be positive")
        if self.kind == "custom" and self.fn is None:
            raise DomainError("custom payoff needs a function")

    @classmethod
    def var_swap(cls):
        return cls("var_swap")

    @classmethod
    def vol_swap(cls):
        return cls("vol_swap")

    @classmethod
    def var_swaption(cls, strike: float):
        return cls("var_swaption", strike=strike)

    @classmethod
    def vol_swaption(cls, strike: float):
        return cls("vol_swaption", strike=strike)

    @classmethod
    def capped_vol_swap(cls, strike: float, cap: float):
        return cls("capped_vol_swap", strike=strike, cap=cap)

    @classmethod
    def custom(cls, fn):
        return cls("custom", fn=fn)

    def values(self, sigma: np.ndarray) -> np.ndarray:
        """Evaluate on an array of annualized realized-variance levels."""
        sigma = np.asarray(sigma, dtype=float)
        if self.kind == "var_swap":
            return sigma
        if self.kind == "vol_swap":
            return np.sqrt(sigma)
        if self.kind == "var_swaption":
            return np.maximum(sigma - self.strike, 0.0)
        if self.kind == "vol_swaption":
            return np.maximum(np.sqrt(sigma) - self.strike, 0.0)
        if self.kind == "capped_vol_swap":
            return np.minimum(np.sqrt(sigma), self.cap) - self.strike
        return np.asarray(self.fn(sigma), dtype=float)


@dataclass(frozen=True)
class VixSpec:
    """Strike strip defining the volatility-index replication.

    ``strikes=None`` selects every lattice level as a strike (the strip
    must reach far below spot to capture down-jump mass at long
    maturities); ``band=(lo, hi)`` restricts to lattice levels between
    ``lo * forward`` and ``hi * forward`` instead.  The at-the-money
    pivot is the largest strike not above the forward, where the strip
    switches from puts to calls.
    """

    tenor: float = VIX_TENOR
    strikes: np.ndarray | None = None
    band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.tenor <= 0:
            raise DomainError("tenor must be positive")
        if self.strikes is not None:
            strikes = np.asarray(self.strikes, dtype=float)
            if strikes.size == 0:
                raise DomainError("strike grid is empty")
            if strikes.min() <= 0 or np.any(np.diff(strikes) <= 0):
                raise DomainError("strikes must be positive and increasing")
            object.__setattr__(self, "strikes", strikes)
        if self.band is not None and not 0 < self.band[0] < self.band[1]:
            raise DomainError("band must satisfy 0 < lo < hi")

    def strike_grid(self, levels: np.ndarray, forward: float) -> np.ndarray:
        if self.strikes is not None:
            return self.strikes
        unique = np.unique(levels)
        if self.band is None:
            return unique
        lo, hi = self.band
        band = unique[(unique >= lo * forward) & (unique <= hi * forward)]
        if band.size == 0:
            raise DomainError("no lattice strikes inside the band")
        return band


@dataclass(frozen=True)
class LiftParams:
    """How to run the variance lift for a pricing call."""

    c_max: int = 100
    alpha: float | None = None
    threads: int | None = None
    tail_buckets: int = lift.LEAKAGE_TAIL_BUCKETS
    leakage_limit: float = lift.LEAKAGE_ERROR


def price_european(kernel_row, payoff_values, t: float, T: float, curve) -> float:
    """Discounted expectation of per-terminal-state payoff values."""
    kernel_row = np.asarray(kernel_row, dtype=float)
    mass = float(kernel_row.sum())
    if abs(mass - 1.0) > 1e-6:
        raise DomainError(f"kernel row mass {mass:.8f} outside 1 +- 1e-6")
    return curve.discount(t, T) * float(kernel_row @ np.asarray(payoff_values))


def vanilla_payoff_values(spec: VanillaSpec, levels, curve) -> np.ndarray:
    """Per-terminal-state payoff using spot ``S = growth(T) * F(y)``."""
    s = curve.spot_growth(spec.maturity) * np.asarray(levels, dtype=float)
    if spec.kind == "call":
        return np.maximum(s - spec.strike, 0.0)
    return np.maximum(spec.strike - s, 0.0)


def price_vanilla(model, spec: VanillaSpec) -> float:
    row = model.kernel_row(0.0, spec.maturity)
    payoff = vanilla_payoff_values(spec, model.levels_product, model.discount)
    return price_european(row, payoff, 0.0, spec.maturity, model.discount)


@dataclass(frozen=True)
class GreeksProfile:
    """Symmetric-difference Greeks per start state, boundaries omitted.

    Arrays are indexed ``[regime, i]`` with ``i`` running over interior
    spot nodes ``spot_indices``.
    """

    spot_indices: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    vega: np.ndarray


def greeks_profile(kernel, payoff_values, grid, sigmas, curve=None, t=0.0, T=None) -> GreeksProfile:
    """Delta/gamma/vega profiles from one full kernel.

    Delta and gamma use symmetric differences of the value profile in
    the spot dimension; vega differences the value across the regime
    pair ``(alpha, alpha+1)`` (or ``(alpha-1, alpha)`` at the top) scaled
    by the regime volatility gap.
    """
    kernel = np.asarray(kernel, dtype=float)
    n = grid.n
    m = kernel.shape[0] // n
    if n - 2 < 3:
        raise DomainError("need at least three interior spot states for profiles")
    values = kernel @ np.asarray(payoff_values, dtype=float)
    if curve is not None and T is not None:
        values = values * curve.discount(t, T)
    c0 = values.reshape(m, n)
    levels = grid.levels
    interior = np.arange(1, n - 1)
    span = levels[interior + 1] - levels[interior - 1]
    delta = (c0[:, interior + 1] - c0[:, interior - 1]) / span
    gamma = 4.0 * (c0[:, interior + 1] + c0[:, interior - 1] - 2.0 * c0[:, interior]) / span**2
    sigmas = np.asarray(sigmas, dtype=float)
    vega = np.empty((m, interior.size))
    for alpha in range(m):
        other = alpha + 1 if alpha + 1 < m else alpha - 1
        if other < 0:
            vega[alpha] = 0.0
            continue
        vega[alpha] = (c0[other, interior] - c0[alpha, interior]) / (
            sigmas[other] - sigmas[alpha]
        )
    return GreeksProfile(interior, delta, gamma, vega)


def model_greeks(model, spec: VanillaSpec) -> GreeksProfile:
    kernel = model.kernel(0.0, spec.maturity)
    payoff = vanilla_payoff_values(spec, model.levels_product, model.discount)
    return greeks_profile(
        kernel,
        payoff,
        model.grid,
        [p.sigma for p in model.regimes],
        curve=model.discount,
        T=spec.maturity,
    )


def price_forward_start(spec: ForwardStartSpec, model) -> float:
    """Value of ``(S_T - a S_{T'})^+`` today.

    The value at ``T'`` is a per-state portfolio of calls struck at
    ``a S_{T'}``: one kernel-matrix product against the payoff matrix,
    of which only the diagonal in the start state survives.  That value
    function is then priced as a European payoff at ``T'``.
    """
    curve = model.discount
    levels = model.levels_product
    k2 = model.kernel(spec.t_prime, spec.maturity)
    s_end = curve.spot_growth(spec.maturity) * levels
    s_set = curve.spot_growth(spec.t_prime) * levels
    payoff_matrix = np.maximum(s_end[None, :] - spec.forward_strike * s_set[:, None], 0.0)
    value_at_set = (k2 * payoff_matrix).sum(axis=1)
    row = model.kernel_row(0.0, spec.t_prime)
    return curve.discount(0.0, spec.maturity) * float(row @ value_at_set)


def bs_price(kind: str, spot: float, strike: float, tau: float, r: float, q: float, sigma: float) -> float:
    """Black-Scholes price with continuous rate and dividend yield."""
    if tau <= 0 or sigma <= 0:
        forward = spot * math.exp((r - q) * tau)
        intrinsic = forward - strike if kind == "call" else strike - forward
        return math.exp(-r * tau) * max(intrinsic, 0.0)
    forward = spot * math.exp((r - q) * tau)
    vol = sigma * math.sqrt(tau)
    d1 = (math.log(forward / strike) + 0.5 * vol * vol) / vol
    d2 = d1 - vol
    df = math.exp(-r * tau)
    if kind == "call":
        return df * (forward * norm.cdf(d1) - strike * norm.cdf(d2))
    return df * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))


def _invert_bs(price: float, kind: str, spot: float, strike: float, tau: float, r: float, q: float) -> float:
    df = math.exp(-r * tau)
    forward = spot * math.exp((r - q) * tau)
    intrinsic = df * max(
        (forward - strike) if kind == "call" else (strike - forward), 0.0
    )
    upper = df * forward if kind == "call" else df * strike
    slack = 1e-12 * max(1.0, spot)
    if price < intrinsic - slack or price > upper + slack:
        raise InversionError(
            f"price {price:.6g} outside no-arbitrage bounds "
            f"[{intrinsic:.6g}, {upper:.6g}]"
        )
    if price <= intrinsic + slack:
        return 0.0
    hi = 1.0
    while bs_price(kind, spot, strike, tau, r, q, hi) < price and hi < 64.0:
        hi *= 2.0
    return float(
        brentq(
            lambda s: bs_price(kind, spot, strike, tau, r, q, s) - price,
            1e-12,
            hi,
            xtol=1e-12,
            rtol=8.9e-16,
        )
    )


def implied_vol(price: float, spec: VanillaSpec, spot: float, curve) -> float:
    """Black-Scholes volatility reproducing a vanilla price, to 1e-10."""
    return _invert_bs(price, spec.kind, spot, spec.strike, spec.maturity, curve.r, curve.q)


def forward_implied_vol(price: float, spec: ForwardStartSpec, spot: float, r_fwd: float = 0.0) -> float:
    """Forward volatility from ``V_FS(0) = S_0 BS(1, T - T', a, r', sigma')``."""
    tau = spec.maturity - spec.t_prime
    return _invert_bs(price / spot, "call", 1.0, spec.forward_strike, tau, r_fwd, 0.0)


def forward_smile(model, t_prime: float, maturity: float, forward_strikes) -> np.ndarray:
    """Implied forward volatilities for a row of forward strikes."""
    spot = model.grid.spot
    vols = []
    for a in np.asarray(forward_strikes, dtype=float):
        spec = ForwardStartSpec(t_prime, maturity, a)
        vols.append(forward_implied_vol(price_forward_start(spec, model), spec, spot))
    return np.asarray(vols)


def variance_distribution(model, t: float, T: float, params: LiftParams):
    """Joint law and its variance marginal, with the wrap guard applied."""
    jd = model.joint(T, t=t, c_max=params.c_max, alpha=params.alpha, threads=params.threads)
    lift.check_leakage(jd, params.tail_buckets, error_at=params.leakage_limit)
    return jd


def price_variance_derivative(
    payoff: VariancePayoff, t: float, T: float, model, params: LiftParams | None = None
) -> float:
    """Discounted expectation of ``h(Sigma)`` under the lift's marginal.

    For ``var_swap`` and ``vol_swap`` this is the fair strike
    (``E[Sigma]`` resp. ``E[sqrt(Sigma)]``); option kinds price the
    payoff itself.
    """
    params = params or LiftParams()
    jd = variance_distribution(model, t, T, params)
    sigma, weights = lift.marginal_variance_pdf(jd)
    return model.discount.discount(t, T) * float(weights @ payoff.values(sigma))


def log_contract(T: float, model) -> float:
    """Variance-units value ``-(2/T) E[log(S_T / S_0)]`` of the log payoff."""
    curve = model.discount
    row = model.kernel_row(0.0, T)
    s = curve.spot_growth(T) * model.levels_product
    s0 = model.grid.spot
    payoff = -np.log(s / s0)
    return (2.0 / T) * price_european(row, payoff, 0.0, T, curve)


def vix_portfolio(spec: VixSpec, kernel_row, forward: float, levels, curve, horizon: float | None = None) -> float:
    """Discretized out-of-the-money strip value ``sigma_vix^2``.

    ``(2/T) sum_i dK_i / K_i^2 e^{rT} Q(K_i) - (1/T) (F/K_0 - 1)^2`` with
    puts below the pivot ``K_0`` (largest strike <= forward), calls
    above, and their average at the pivot.  ``horizon`` defaults to the
    spec tenor.
    """
    tenor = spec.tenor if horizon is None else horizon
    kernel_row = np.asarray(kernel_row, dtype=float)
    levels = np.asarray(levels, dtype=float)
    strikes = spec.strike_grid(levels, forward)
    below = strikes[strikes <= forward]
    if below.size == 0:
        raise DomainError("strike grid has no strike at or below the forward")
    k0 = float(below[-1])
    s = curve.spot_growth(tenor) * levels
    # Undiscounted option values: the e^{rT} factor in the strip cancels
    # the discount exactly.
    puts = kernel_row @ np.maximum(strikes[None, :] - s[:, None], 0.0)
    calls = kernel_row @ np.maximum(s[:, None] - strikes[None, :], 0.0)
    otm = np.where(strikes < k0, puts, calls)
    pivot = int(np.searchsorted(strikes, k0))
    otm[pivot] = 0.5 * (puts[pivot] + calls[pivot])
    dk = np.empty_like(strikes)
    dk[1:-1] = 0.5 * (strikes[2:] - strikes[:-2])
    dk[0] = strikes[1] - strikes[0]
    dk[-1] = strikes[-1] - strikes[-2]
    strip = float(np.sum(dk / strikes**2 * otm))
    return (2.0 / tenor) * strip - (1.0 / tenor) * (forward / k0 - 1.0) ** 2


def model_vix_portfolio(model, maturity: float, spec: VixSpec | None = None) -> float:
    """Strip value from time zero at the model's start state."""
    spec = spec or VixSpec(tenor=maturity)
    row = model.kernel_row(0.0, maturity)
    forward = model.grid.spot
    return vix_portfolio(
        spec, row, forward, model.levels_product, model.discount, horizon=maturity
    )


@dataclass(frozen=True)
class VixDistribution:
    """Binned law of the volatility index at a horizon."""

    bin_edges: np.ndarray
    probabilities: np.ndarray
    state_values: np.ndarray
    state_weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.probabilities.sum())

    def mean(self) -> float:
        return float(self.state_weights @ self.state_values)


def vix_pdf(t: float, spec: VixSpec, model, bucket_width: float) -> VixDistribution:
    """Law of the index at ``t``: strip value per attainable state, binned.

    Each state reachable at ``t`` contributes its kernel probability at
    the index level implied by the strip over ``[t, t + tenor]``
    conditional on that state; values are then histogrammed into bins of
    width ``bucket_width``.
    """
    if t <= 0:
        raise DomainError(f"horizon must be positive, got {t}")
    if bucket_width <= 0:
        raise DomainError("bucket width must be positive")
    weights = model.kernel_row(0.0, t)
    cond = model.kernel(t, t + spec.tenor)
    levels = model.levels_product
    values = np.empty(levels.size)
    for j in range(levels.size):
        var = vix_portfolio(spec, cond[j], levels[j], levels, model.discount)
        values[j] = 100.0 * math.sqrt(max(var, 0.0))
    top = float(values.max())
    edges = np.arange(0.0, top + 2 * bucket_width, bucket_width)
    idx = np.clip(np.digitize(values, edges) - 1, 0, edges.size - 2)
    probs = np.zeros(edges.size - 1)
    np.add.at(probs, idx, weights)
    return VixDistribution(edges, probs, values, weights)
