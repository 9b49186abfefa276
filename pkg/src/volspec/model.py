"""Lattice domains and the regime-switching jump-diffusion generator.

The underlying is a continuous-time Markov chain for the forward price,
built in stages per volatility regime:

1. a tridiagonal generator on the price lattice matching the first two
   instantaneous moments of a capped CEV diffusion,
2. asymmetric jumps through Bochner subordination with separate up and
   down variance rates, followed by a martingale repair and a variance
   rescale,
3. regime coupling through level-dependent switch generators blended by
   a partition of unity,
4. an optional deterministic change from calendar to financial time.

Product states on the regime lattice are ordered regime-major:
``index = regime * N + x``.  Construction is pure and deterministic and
every output is an immutable value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np

from . import lift, spectral
from .errors import ConfigError, DegenerateRateError, DomainError, NumericalError

#: Sharpness of the sinh node placement; larger packs more nodes at spot.
GRID_SINH_SHARPNESS = 4.0
#: Off-diagonal entries in (floor, 0) are clamped; below floor is an error.
NEGATIVE_RATE_FLOOR = -1e-10
#: Allowed imaginary part in a subordinated generator before truncation.
SUBORDINATION_RESIDUE_LIMIT = 1e-9


@dataclass(frozen=True)
class StateGrid:
    """Ordered forward-price levels with the spot pinned to a node."""

    levels: np.ndarray
    spot_index: int

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "levels", levels)
        if levels.ndim != 1 or levels.size < 3:
            raise DomainError("grid needs at least three levels")
        if levels[0] <= 0:
            raise DomainError("grid levels must be strictly positive")
        if np.any(np.diff(levels) <= 0):
            raise DomainError("grid levels must be strictly increasing")
        if not 0 <= self.spot_index < levels.size:
            raise DomainError(f"spot index {self.spot_index} out of range")

    @property
    def n(self) -> int:
        return self.levels.size

    @property
    def spot(self) -> float:
        return float(self.levels[self.spot_index])


#: Log half-width of the level-uniform core around spot.
GRID_CORE_HALF_WIDTH = 0.35
#: Fraction of grid segments spent inside the core.
GRID_CORE_BUDGET = 0.5


def _wing_ratio(edge_gap: float, k: int, span: float) -> float:
    """Growth ratio of k geometric log-gaps starting at ``edge_gap``
    whose sum is ``span``."""
    from scipy.optimize import brentq

    def total(rho):
        if abs(rho - 1.0) < 1e-12:
            return edge_gap * k
        return edge_gap * rho * (rho**k - 1.0) / (rho - 1.0)

    lo, hi = 1e-6, 2.0
    while total(hi) < span:
        hi *= 2.0
    return float(brentq(lambda r: total(r) - span, lo, hi, xtol=1e-14))


def build_elliptical_grid(
    n_points: int, spot: float, top: float, bottom: float
) -> StateGrid:
    """Price lattice dense and uniformly spaced at spot, sparse far away.

    Three zones: a core of uniform level spacing covering roughly
    ``exp(+-GRID_CORE_HALF_WIDTH)`` around spot, and two wings of
    geometrically growing log-gaps that start from the core's edge gap
    and land exactly on ``bottom`` and ``top``.  The spot is a node by
    construction and spacing varies smoothly through it; both matter
    because Greeks take symmetric differences across neighboring nodes.
    """
    if n_points < 5:
        raise DomainError(f"need at least 5 grid points, got {n_points}")
    if not (0 < bottom < spot < top):
        raise DomainError(
            f"bounds must satisfy 0 < bottom < spot < top, got "
            f"bottom={bottom}, spot={spot}, top={top}"
        )
    segments = n_points - 1
    range_down = np.log(spot / bottom)
    range_up = np.log(top / spot)
    half = min(GRID_CORE_HALF_WIDTH, 0.45 * range_down, 0.45 * range_up)
    width = spot * (np.exp(half) - np.exp(-half))
    h = width / max(GRID_CORE_BUDGET * segments, 2.0)
    m_down = max(1, int(round(spot * (1.0 - np.exp(-half)) / h)))
    m_up = max(1, int(round(spot * (np.exp(half) - 1.0) / h)))
    while m_down + m_up > segments - 2:
        if m_down >= m_up:
            m_down -= 1
        else:
            m_up -= 1
    core_bottom = spot - m_down * h
    core_top = spot + m_up * h
    span_down = np.log(core_bottom / bottom)
    span_up = np.log(top / core_top)
    k_wings = segments - m_down - m_up
    k_down = int(round(k_wings * span_down / (span_down + span_up)))
    k_down = min(max(k_down, 1), k_wings - 1)
    k_up = k_wings - k_down

    core = spot + h * np.arange(-m_down, m_up + 1)
    rho_down = _wing_ratio(h / core_bottom, k_down, span_down)
    gaps_down = (h / core_bottom) * rho_down ** np.arange(1, k_down + 1)
    wing_down = core_bottom * np.exp(-np.cumsum(gaps_down))[::-1]
    rho_up = _wing_ratio(h / core_top, k_up, span_up)
    gaps_up = (h / core_top) * rho_up ** np.arange(1, k_up + 1)
    wing_up = core_top * np.exp(np.cumsum(gaps_up))

    levels = np.concatenate([wing_down, core, wing_up])
    levels[0] = bottom
    levels[-1] = top
    return StateGrid(levels, k_down + m_down)


@dataclass(frozen=True)
class RegimeParams:
    """One local-volatility regime: capped CEV plus jump intensities.

    ``sigma`` is the at-the-money volatility of the regime, ``beta`` the
    CEV exponent, ``sigma_bar`` the cap on local volatility, ``nu_minus``
    and ``nu_plus`` the variance rates of the down- and up-jump
    subordinators, and ``level`` the forward level at which this regime
    anchors the regime blend.
    """

    sigma: float
    beta: float
    sigma_bar: float
    nu_minus: float
    nu_plus: float
    level: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.sigma_bar <= 0:
            raise DomainError(f"sigma_bar must be positive, got {self.sigma_bar}")
        if self.nu_minus < 0 or self.nu_plus < 0:
            raise DomainError("jump variance rates must be nonnegative")

    def local_vol(self, levels: np.ndarray, ref_level: float) -> np.ndarray:
        """Absolute diffusion coefficient ``F min(sigma (F/ref)^(beta-1), cap)``.

        The CEV power acts on the level relative to the spot quotation
        ``ref_level`` so that ``sigma`` is the lognormal volatility at
        spot regardless of the quotation scale.
        """
        rel = np.asarray(levels, dtype=float) / ref_level
        return levels * np.minimum(self.sigma * rel ** (self.beta - 1.0), self.sigma_bar)


@dataclass(frozen=True)
class SwitchGenerator:
    """Markov generator driving regime switches for one anchor level."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"switch generator must be square, got {m.shape}")
        off = m - np.diag(np.diag(m))
        if off.min() < -1e-12:
            raise ConfigError("switch generator has a negative off-diagonal rate")
        if np.max(np.abs(m.sum(axis=1))) > 1e-10 * max(1.0, np.abs(m).max()):
            raise ConfigError("switch generator rows must sum to zero")

    @property
    def n_regimes(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MarkovGenerator:
    """Dense generator matrix together with its state labeling.

    ``levels`` maps each (product) state to its forward-price level;
    regime switches leave the level unchanged.  Rows sum to zero and
    off-diagonal entries are nonnegative up to rounding noise.
    """

    entries: np.ndarray
    levels: np.ndarray
    labels: tuple[str, ...] = ("spot",)
    n_regimes: int = 1

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "levels", levels)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ConfigError(f"generator must be square, got {entries.shape}")
        if levels.shape != (entries.shape[0],):
            raise ConfigError("level map must have one entry per state")
        scale = max(1.0, float(np.abs(entries).max()))
        if np.max(np.abs(entries.sum(axis=1))) > 1e-10 * scale:
            raise ConfigError("generator rows must sum to zero")
        off = entries - np.diag(np.diag(entries))
        if off.min() < -1e-12:
            raise ConfigError(
                f"generator has off-diagonal entry {off.min():.3e} < -1e-12"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_spot(self) -> int:
        return self.dim // self.n_regimes


@dataclass(frozen=True)
class TimeChange:
    """Piecewise-linear map from calendar time to financial time.

    Evaluation interpolates linearly between knots and extrapolates
    linearly beyond the last one.  ``f(0) = 0`` and both coordinates are
    strictly increasing.
    """

    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 2 or knots.shape[1] != 2 or knots.shape[0] < 2:
            raise ConfigError("time change needs at least two (t, f) knots")
        if knots[0, 0] != 0.0 or knots[0, 1] != 0.0:
            raise ConfigError("time change must start at (0, 0)")
        if np.any(np.diff(knots[:, 0]) <= 0) or np.any(np.diff(knots[:, 1]) <= 0):
            raise ConfigError("time change knots must be strictly increasing")

    @classmethod
    def identity(cls) -> "TimeChange":
        return cls(np.array([[0.0, 0.0], [1.0, 1.0]]))

    @property
    def is_identity(self) -> bool:
        t, f = self.knots[:, 0], self.knots[:, 1]
        return bool(np.allclose(t, f, rtol=0.0, atol=0.0))

    def __call__(self, t: float) -> float:
        if t < 0:
            raise DomainError(f"calendar time must be nonnegative, got {t}")
        times, values = self.knots[:, 0], self.knots[:, 1]
        if t <= times[-1]:
            return float(np.interp(t, times, values))
        slope = (values[-1] - values[-2]) / (times[-1] - times[-2])
        return float(values[-1] + slope * (t - times[-1]))


def financial_time(tc: TimeChange, t: float) -> float:
    """Financial time corresponding to calendar time ``t``."""
    return tc(t)


@dataclass(frozen=True)
class DiscountCurve:
    """Constant annualized interest rate and dividend yield."""

    r: float = 0.0
    q: float = 0.0

    def discount(self, t: float, T: float) -> float:
        return float(np.exp(-(self.r * T - self.r * t)))

    def spot_growth(self, T: float) -> float:
        """Factor turning the forward level into spot at horizon ``T``."""
        return float(np.exp(-(self.r - self.q) * T))


def build_cev_generator(grid: StateGrid, p: RegimeParams) -> MarkovGenerator:
    """Tridiagonal generator matching the capped CEV moments on the grid.

    For each interior node the up/down rates solve the 2x2 system that
    zeroes the instantaneous drift and matches the instantaneous variance
    ``v(F)^2``; the end rows are identically zero (absorbing).
    """
    levels = grid.levels
    n = grid.n
    v2 = p.local_vol(levels, grid.spot) ** 2
    entries = np.zeros((n, n))
    for x in range(1, n - 1):
        d_down = levels[x] - levels[x - 1]
        d_up = levels[x + 1] - levels[x]
        span = d_down + d_up
        down = v2[x] / (d_down * span)
        up = v2[x] / (d_up * span)
        if down < 0 or up < 0:
            raise ConfigError(
                f"moment matching gave a negative rate at node {x} "
                f"(level {levels[x]:.6g}); grid too coarse for the variance"
            )
        entries[x, x - 1] = down
        entries[x, x + 1] = up
        entries[x, x] = -(down + up)
    return MarkovGenerator(entries, levels)


def _clamp_rates(entries: np.ndarray) -> None:
    off_mask = ~np.eye(entries.shape[0], dtype=bool)
    low = float(entries[off_mask].min())
    if low < NEGATIVE_RATE_FLOOR:
        row = int(np.where((entries == low) & off_mask)[0][0])
        raise DegenerateRateError(
            f"rate {low:.3e} in row {row} below floor {NEGATIVE_RATE_FLOOR:.0e}"
        )
    entries[off_mask & (entries < 0)] = 0.0


def subordinate(
    gen: MarkovGenerator,
    grid: StateGrid,
    nu_plus: float,
    nu_minus: float,
    v_target: np.ndarray,
) -> MarkovGenerator:
    """Add asymmetric jumps to a diffusion generator by subordination.

    Two Bernstein functions ``phi(x) = log(1 + nu x) / nu`` act on the
    generator through functional calculus; the strict upper triangle of
    the result comes from the up-jump transform and the strict lower
    triangle from the down-jump transform.  The combined matrix then gets

    1. a martingale repair: per interior row, rate is added to the
       immediate down-neighbor (positive residual drift) or up-neighbor
       (negative) so the first moment is exactly zero,
    2. a variance rescale: each interior row is multiplied by the scalar
       restoring the second moment to ``v_target``,
    3. a diagonal making every row sum to zero.

    ``nu_plus = nu_minus = 0`` returns ``gen`` unchanged (the Bernstein
    function degenerates to the identity).
    """
    if nu_plus < 0 or nu_minus < 0:
        raise DomainError("jump variance rates must be nonnegative")
    if nu_plus == 0 and nu_minus == 0:
        return gen
    v_target = np.asarray(v_target, dtype=float)
    levels = gen.levels
    n = gen.dim
    dec = spectral.diagonalize(gen.entries)

    def transformed(nu: float) -> np.ndarray:
        if nu == 0:
            return gen.entries.astype(complex)
        # -phi(-L) with phi the Bernstein function of rate nu.
        values = -np.log(1.0 - dec.eigenvalues * nu) / nu
        return spectral.apply_function(dec, values)

    upper_src = transformed(nu_plus)
    lower_src = transformed(nu_minus)
    residue = max(
        float(np.abs(upper_src.imag).max()), float(np.abs(lower_src.imag).max())
    )
    if residue > SUBORDINATION_RESIDUE_LIMIT:
        raise NumericalError(
            f"subordinated generator has imaginary residue {residue:.3e} "
            f"above {SUBORDINATION_RESIDUE_LIMIT:.0e}"
        )
    entries = np.triu(upper_src.real, 1) + np.tril(lower_src.real, -1)
    entries[0, :] = 0.0
    entries[-1, :] = 0.0
    _clamp_rates(entries)

    displacement = levels[None, :] - levels[:, None]
    for x in range(1, n - 1):
        drift = float(entries[x] @ displacement[x])
        if drift > 0:
            entries[x, x - 1] += drift / (levels[x] - levels[x - 1])
        elif drift < 0:
            entries[x, x + 1] += -drift / (levels[x + 1] - levels[x])
        second = float(entries[x] @ displacement[x] ** 2)
        if v_target[x] == 0.0:
            entries[x, :] = 0.0
            continue
        if second <= 0:
            raise DegenerateRateError(
                f"row {x} lost its variance under subordination; cannot rescale"
            )
        entries[x] *= v_target[x] / second
    np.fill_diagonal(entries, 0.0)
    np.fill_diagonal(entries, -entries.sum(axis=1))
    return MarkovGenerator(entries, levels, gen.labels, gen.n_regimes)


def build_regime_generator(grid: StateGrid, p: RegimeParams) -> MarkovGenerator:
    """CEV generator with jumps for one regime (build + subordinate)."""
    cev = build_cev_generator(grid, p)
    v_target = p.local_vol(grid.levels, grid.spot) ** 2
    v_target[0] = 0.0
    v_target[-1] = 0.0
    return subordinate(cev, grid, p.nu_plus, p.nu_minus, v_target)


def partition_of_unity(anchors, level: float) -> np.ndarray:
    """Piecewise-linear hat weights over the regime anchors at ``level``.

    Flat extensions apply beyond the first and last anchor.  Exactly one
    or two weights are nonzero and they sum to one exactly (the active
    pair is ``(1 - w, w)``).
    """
    anchors = np.asarray(anchors, dtype=float)
    if anchors.ndim != 1 or anchors.size == 0:
        raise DomainError("need at least one anchor")
    if np.any(np.diff(anchors) <= 0):
        raise DomainError("anchors must be strictly increasing")
    weights = np.zeros(anchors.size)
    if level <= anchors[0]:
        weights[0] = 1.0
    elif level >= anchors[-1]:
        weights[-1] = 1.0
    else:
        hi = int(np.searchsorted(anchors, level, side="right"))
        lo = hi - 1
        w = (level - anchors[lo]) / (anchors[hi] - anchors[lo])
        weights[lo] = 1.0 - w
        weights[hi] = w
    return weights


def assemble_regime_generator(
    per_regime, switches, anchors, grid: StateGrid
) -> MarkovGenerator:
    """Couple per-regime spot generators with level-blended switching.

    The product generator acts on regime-major states ``(alpha, x)``:
    spot moves keep the regime (block diagonal), regime switches keep the
    spot level (diagonal in ``x``) and therefore add nothing to the first
    spot moment.
    """
    m = len(per_regime)
    if m == 0:
        raise ConfigError("need at least one regime")
    if len(switches) != m:
        raise ConfigError(
            f"got {len(switches)} switch generators for {m} regimes"
        )
    n = grid.n
    for g in per_regime:
        if g.dim != n or not np.array_equal(g.levels, grid.levels):
            raise ConfigError("per-regime generators must share the grid")
    for s in switches:
        if s.n_regimes != m:
            raise ConfigError(
                f"switch generator is {s.n_regimes}x{s.n_regimes}, expected {m}x{m}"
            )
    entries = np.zeros((m * n, m * n))
    for alpha in range(m):
        block = slice(alpha * n, (alpha + 1) * n)
        entries[block, block] = per_regime[alpha].entries
    for x in range(n):
        weights = partition_of_unity(anchors, grid.levels[x])
        local = sum(w * s.matrix for w, s in zip(weights, switches))
        idx = x + n * np.arange(m)
        entries[np.ix_(idx, idx)] += local
    levels = np.tile(grid.levels, m)
    return MarkovGenerator(entries, levels, ("regime", "spot"), m)


class Model:
    """A calibrated underlying: grid, regimes, switching, clocks, rates.

    Heavy artifacts (the assembled generator, its decomposition, the
    per-state instantaneous variance, block families for the variance
    lift) are built on first use and cached; everything cached is
    immutable, so sharing a model across threads is safe.
    """

    def __init__(
        self,
        grid: StateGrid,
        regimes,
        switches,
        time_change: TimeChange | None = None,
        discount: DiscountCurve | None = None,
        start_regime: int = 0,
        config: dict | None = None,
    ):
        regimes = list(regimes)
        switches = list(switches)
        if not regimes:
            raise ConfigError("need at least one regime")
        anchors = [p.level for p in regimes]
        if any(b <= a for a, b in zip(anchors, anchors[1:])):
            raise ConfigError("regime anchor levels must be strictly increasing")
        if not 0 <= start_regime < len(regimes):
            raise ConfigError(f"start regime {start_regime} out of range")
        self.grid = grid
        self.regimes = regimes
        self.switches = switches
        self.anchors = np.asarray(anchors, dtype=float)
        self.time_change = time_change or TimeChange.identity()
        self.discount = discount or DiscountCurve()
        self.start_regime = start_regime
        self.config = config
        self._block_cache: dict = {}

    @property
    def n_regimes(self) -> int:
        return len(self.regimes)

    @property
    def n_spot(self) -> int:
        return self.grid.n

    @property
    def start_index(self) -> int:
        return self.start_regime * self.grid.n + self.grid.spot_index

    @cached_property
    def generator(self) -> MarkovGenerator:
        per_regime = [build_regime_generator(self.grid, p) for p in self.regimes]
        if self.n_regimes == 1:
            return per_regime[0]
        return assemble_regime_generator(
            per_regime, self.switches, self.anchors, self.grid
        )

    @cached_property
    def decomposition(self) -> spectral.SpectralDecomposition:
        return spectral.diagonalize(self.generator.entries)

    @cached_property
    def q_vector(self) -> np.ndarray:
        return lift.instantaneous_variance(self.generator)

    @property
    def levels_product(self) -> np.ndarray:
        return self.generator.levels

    def financial_dt(self, t: float, T: float) -> float:
        return self.time_change(T) - self.time_change(t)

    def kernel(self, t: float, T: float) -> np.ndarray:
        """Full transition kernel between calendar times ``t`` and ``T``."""
        return spectral.transition_kernel(self.decomposition, self.financial_dt(t, T))

    def kernel_row(self, t: float, T: float, start: int | None = None) -> np.ndarray:
        """One row of the kernel; defaults to the model's start state."""
        start = self.start_index if start is None else start
        dec = self.decomposition
        row = (dec.right_vectors[start] * np.exp(dec.eigenvalues * self.financial_dt(t, T))) @ dec.inverse_rows
        kernel_row = row.real.copy()
        np.clip(kernel_row, 0.0, None, out=kernel_row)
        return kernel_row

    def block_family(
        self, c_max: int, alpha: float, threads: int | None = None
    ) -> "lift.BlockFamily":
        key = (c_max, float(alpha))
        family = self._block_cache.get(key)
        if family is None:
            family = lift.build_blocks(
                self.generator, self.q_vector, alpha, c_max, threads=threads
            )
            self._block_cache[key] = family
        return family

    def joint(
        self,
        T: float,
        t: float = 0.0,
        c_max: int = 100,
        alpha: float | None = None,
        threads: int | None = None,
        start: int | None = None,
    ) -> "lift.JointDistribution":
        """Joint law of (spot state, regime, accrued variance) at ``T``.

        ``alpha=None`` uses the maturity-linked spacing schedule, raised
        to the containment floor whenever the schedule's lattice ceiling
        could not hold the maximal attainable accrual (which happens for
        models whose volatility cap binds somewhere on the lattice).
        """
        if alpha is None:
            alpha = max(
                lift.alpha_schedule(T, c_max, self.time_change),
                lift.containment_spacing(
                    self.time_change(T), float(self.q_vector.max()), c_max
                ),
            )
        family = self.block_family(c_max, alpha, threads=threads)
        start = self.start_index if start is None else start
        return lift.joint_distribution(family, start, t, T, self.time_change)


def _parse_config(cfg: dict) -> Model:
    try:
        g = cfg["grid"]
        grid = build_elliptical_grid(
            int(g["n"]), float(g["spot"]), float(g["top"]), float(g["bottom"])
        )
        regimes = [
            RegimeParams(
                sigma=float(r["sigma"]),
                beta=float(r["beta"]),
                sigma_bar=float(r["sigma_bar"]),
                nu_minus=float(r["nu_minus"]),
                nu_plus=float(r["nu_plus"]),
                level=float(r["level"]),
            )
            for r in cfg["regimes"]
        ]
        switches = [SwitchGenerator(np.asarray(m)) for m in cfg["switch_generators"]]
        tc_cfg = cfg.get("time_change")
        time_change = TimeChange(np.asarray(tc_cfg)) if tc_cfg else TimeChange.identity()
        d = cfg.get("discount") or {}
        discount = DiscountCurve(r=float(d.get("r", 0.0)), q=float(d.get("q", 0.0)))
        start_regime = int(cfg.get("start_regime", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model config: {exc}") from exc
    return Model(
        grid,
        regimes,
        switches,
        time_change=time_change,
        discount=discount,
        start_regime=start_regime,
        config=cfg,
    )


def bundled_config(name: str) -> dict:
    """Load one of the packaged model configs by bare name."""
    path = resources.files("volspec.configs").joinpath(f"{name}.json")
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc


def load_model(source) -> Model:
    """Build a :class:`Model` from a dict, a JSON file path, or a bundled name.

    ``None`` loads the packaged Table-1 calibration.
    """
    if source is None:
        return _parse_config(bundled_config("table1_calibrated"))
    if isinstance(source, dict):
        return _parse_config(source)
    text = None
    try:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        try:
            return _parse_config(bundled_config(str(source)))
        except ConfigError:
            raise ConfigError(f"model config not found: {source}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {source} at line {exc.lineno}: {exc.msg}"
        ) from exc
    return _parse_config(cfg)
