"""The realized-variance lift of the underlying chain.

Accrued variance is tracked by a counting process ``I_t = alpha * m_t``
where ``m_t`` is a Poisson counter on the periodic bucket lattice
``{0, .., 2C}`` whose intensity equals the state's instantaneous
variance over the spacing, ``Q(x) / alpha``.  The counter's generator is
circulant, so the extended generator on (spot, regime, bucket) splits
under a partial DFT into ``2C + 1`` shifted copies of the underlying
generator

    ``L_k = L + diag((exp(-i p_k) - 1) * Q / alpha)``,   ``p_k = 2 pi k / (2C+1)``.

Kernels of the lift are then inverse DFTs across the block index; only
blocks ``k <= C`` need diagonalizing because ``L_{2C+1-k}`` is the
conjugate of ``L_k``.  Nothing of size ``(dim * (2C+1))^2`` is ever
materialized.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import spectral
from .errors import DomainError, KernelError, LeakageError, NumericalError

#: Hard error when the joint law's total mass falls short by more than this.
MASS_DEFICIT_LIMIT = 1e-4
#: Total mass must otherwise stay within this of one.
MASS_TOL = 1e-6
#: Imaginary residue allowed in the joint law before it is an error.
JOINT_RESIDUE_LIMIT = 1e-6
#: Joint probabilities below this floor are an error, above it noise.
JOINT_NEGATIVE_FLOOR = -1e-8
#: Wrap-around guard: error above, warning above the softer threshold.
LEAKAGE_ERROR = 1e-4
LEAKAGE_WARN = 1e-5
#: Buckets counted by the wrap-around guard.
LEAKAGE_TAIL_BUCKETS = 5


def instantaneous_variance(gen) -> np.ndarray:
    """Per-state instantaneous variance of relative forward moves.

    ``Q(x) = sum_y ((F(y) - F(x)) / F(x))^2 L(x, y)``.  Regime switches
    keep the level, so only spot moves contribute; absorbing rows give
    exactly zero.
    """
    levels = gen.levels
    rel = (levels[None, :] - levels[:, None]) / levels[:, None]
    q = np.einsum("xy,xy->x", gen.entries, rel**2)
    low = float(q.min())
    if low < -1e-12:
        raise NumericalError(
            f"instantaneous variance {low:.3e} below zero; generator corrupt"
        )
    np.clip(q, 0.0, None, out=q)
    return q


def alpha_schedule(t: float, c_max: int, tc) -> float:
    """Maturity-linked bucket spacing ``0.42^2 * f(t) / C``.

    The attainable realized variance grows linearly in financial time,
    so scaling the spacing the same way keeps the counter away from the
    periodic boundary with a fixed number of buckets.
    """
    if t <= 0:
        raise DomainError(f"maturity must be positive, got {t}")
    return 0.42**2 * tc(t) / c_max


def containment_spacing(f_horizon: float, q_max: float, c_max: int) -> float:
    """Smallest spacing whose lattice provably contains the accrual.

    Accrued variance over a financial-time span ``f`` is at most
    ``f * max(Q)``; a lattice ceiling 25% above that leaves the counter's
    own noise clear of the periodic boundary.  Models whose volatility
    cap binds on part of the lattice need this floor at long maturities,
    where the plain maturity-linked schedule would let mass wrap.
    """
    if f_horizon <= 0:
        raise DomainError(f"financial horizon must be positive, got {f_horizon}")
    return 1.25 * f_horizon * q_max / (2 * c_max)


@dataclass(frozen=True)
class VarianceGrid:
    """Bucket lattice for accrued variance: ``2 c_max + 1`` points."""

    c_max: int
    spacing: float

    def __post_init__(self):
        if self.c_max < 1:
            raise DomainError(f"c_max must be at least 1, got {self.c_max}")
        if self.spacing <= 0:
            raise DomainError(f"spacing must be positive, got {self.spacing}")

    @property
    def n_buckets(self) -> int:
        return 2 * self.c_max + 1

    @property
    def totals(self) -> np.ndarray:
        """Accrued (non-annualized) variance represented by each bucket."""
        return self.spacing * np.arange(self.n_buckets)


class BlockFamily:
    """The shifted generators ``L_k`` with their decompositions.

    Only ``k = 0 .. C`` are diagonalized; the remaining blocks follow by
    conjugation.  ``L_0`` equals the underlying generator exactly.
    """

    def __init__(self, gen, q: np.ndarray, var_grid: VarianceGrid, threads=None):
        self.gen = gen
        self.q = np.asarray(q, dtype=float)
        if self.q.shape != (gen.dim,):
            raise DomainError("need one variance entry per generator state")
        self.var_grid = var_grid
        n = var_grid.n_buckets
        self.phases = 2.0 * np.pi * np.arange(n) / n
        shifts = (np.exp(-1j * self.phases) - 1.0)[: var_grid.c_max + 1]
        base = gen.entries.astype(complex)
        rate = self.q / var_grid.spacing
        self._decomps = spectral.parallel_map(
            lambda s: spectral.diagonalize(base + np.diag(s * rate)),
            shifts,
            threads=threads,
        )

    @property
    def n_blocks(self) -> int:
        return self.var_grid.n_buckets

    @property
    def dim(self) -> int:
        return self.gen.dim

    def block(self, k: int) -> np.ndarray:
        """Materialize ``L_k`` (mainly for inspection and tests).

        Blocks past ``C`` are the exact conjugates of their mirror
        images, matching how kernels treat them.
        """
        if k > self.var_grid.c_max:
            return np.conj(self.block(self.n_blocks - k))
        shift = np.exp(-1j * self.phases[k]) - 1.0
        return self.gen.entries + np.diag(shift * self.q / self.var_grid.spacing)

    def decomposition(self, k: int) -> spectral.SpectralDecomposition:
        if not 0 <= k <= self.var_grid.c_max:
            raise DomainError(
                f"only blocks 0..{self.var_grid.c_max} are decomposed, got {k}"
            )
        return self._decomps[k]

    def kernel_rows(self, dt_financial: float, start: int) -> np.ndarray:
        """Row ``start`` of ``exp(dt L_k)`` for every block, shape (2C+1, dim)."""
        n = self.n_blocks
        rows = np.empty((n, self.dim), dtype=complex)
        for k, dec in enumerate(self._decomps):
            weights = dec.right_vectors[start] * np.exp(dec.eigenvalues * dt_financial)
            rows[k] = weights @ dec.inverse_rows
        for k in range(self.var_grid.c_max + 1, n):
            rows[k] = np.conj(rows[n - k])
        return rows

    def kernel_row_sums(self, dt_financial: float) -> np.ndarray:
        """``exp(dt L_k) @ 1`` for every block and start state, shape (2C+1, dim).

        This is all the full kernels contribute to variance marginals, so
        per-start-state profiles (Greeks) never need the full matrices.
        """
        n = self.n_blocks
        sums = np.empty((n, self.dim), dtype=complex)
        ones = np.ones(self.dim, dtype=complex)
        for k, dec in enumerate(self._decomps):
            inner = dec.inverse_rows @ ones
            sums[k] = dec.right_vectors @ (np.exp(dec.eigenvalues * dt_financial) * inner)
        for k in range(self.var_grid.c_max + 1, n):
            sums[k] = np.conj(sums[n - k])
        return sums


def build_blocks(gen, q, alpha: float, c_max: int, threads=None) -> BlockFamily:
    """Construct and diagonalize the block family for spacing ``alpha``."""
    return BlockFamily(gen, q, VarianceGrid(c_max, alpha), threads=threads)


@dataclass(frozen=True)
class JointDistribution:
    """Joint law over (terminal product state, variance bucket).

    ``probabilities[d, j]`` is the probability of product state ``j``
    with accrued variance ``spacing * d`` over ``[t, T]``.  Annualized
    realized variance for bucket ``d`` is ``spacing * d / (T - t)``
    (calendar time in the denominator; the dynamics themselves ran in
    financial time).
    """

    probabilities: np.ndarray
    start: int
    t: float
    T: float
    var_grid: VarianceGrid
    levels: np.ndarray
    n_regimes: int
    residue: float
    mass: float

    @property
    def sigma_values(self) -> np.ndarray:
        """Annualized realized-variance level of each bucket."""
        return self.var_grid.totals / (self.T - self.t)

    def variance_weights(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    def spot_weights(self) -> np.ndarray:
        return self.probabilities.sum(axis=0)

    def to_csv(self, path) -> None:
        n_spot = self.levels.size // self.n_regimes
        sig = self.sigma_values
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["spot_level", "regime", "sigma_annualized", "probability"])
            for d in range(self.var_grid.n_buckets):
                for j in range(self.levels.size):
                    writer.writerow(
                        [
                            f"{self.levels[j]:.6g}",
                            j // n_spot,
                            f"{sig[d]:.6g}",
                            f"{self.probabilities[d, j]:.6g}",
                        ]
                    )

    def to_json(self, path) -> None:
        payload = {
            "start": self.start,
            "t": self.t,
            "T": self.T,
            "spacing": self.var_grid.spacing,
            "c_max": self.var_grid.c_max,
            "mass": self.mass,
            "residue": self.residue,
            "sigma_values": self.sigma_values.tolist(),
            "levels": self.levels.tolist(),
            "n_regimes": self.n_regimes,
            "probabilities": self.probabilities.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)


def joint_distribution(
    blocks: BlockFamily, start, t: float, T: float, tc
) -> JointDistribution:
    """Joint law of the lifted process started from ``(start, bucket 0)``.

    The variance counter always starts at zero at contract inception.
    The inverse DFT across blocks pairs conjugate terms, so the result
    is real up to rounding; the residue is recorded and guarded.
    """
    if not T > t >= 0:
        raise DomainError(f"need T > t >= 0, got t={t}, T={T}")
    if not isinstance(start, (int, np.integer)):
        x, beta = start
        start = beta * blocks.gen.n_spot + x
    dt = tc(T) - tc(t)
    rows = blocks.kernel_rows(dt, int(start))
    # ifft supplies exp(+i p_k d) / (2C+1): the d-th Fourier coefficient
    # of the block rows, i.e. the bucket-d slice of the joint law.
    joint = np.fft.ifft(rows, axis=0)
    residue = float(np.abs(joint.imag).max())
    if residue > JOINT_RESIDUE_LIMIT:
        raise KernelError(
            f"joint law imaginary residue {residue:.3e} above "
            f"{JOINT_RESIDUE_LIMIT:.0e}"
        )
    probs = joint.real.copy()
    low = float(probs.min())
    if low < JOINT_NEGATIVE_FLOOR:
        raise KernelError(
            f"joint probability {low:.3e} below floor {JOINT_NEGATIVE_FLOOR:.0e}"
        )
    np.clip(probs, 0.0, None, out=probs)
    mass = float(probs.sum())
    if 1.0 - mass > MASS_DEFICIT_LIMIT:
        raise LeakageError(
            f"joint law mass {mass:.8f} is short of one by more than "
            f"{MASS_DEFICIT_LIMIT:.0e}"
        )
    if abs(mass - 1.0) > MASS_TOL:
        raise KernelError(
            f"joint law mass {mass:.10f} outside 1 +- {MASS_TOL:.0e}"
        )
    return JointDistribution(
        probabilities=probs,
        start=int(start),
        t=t,
        T=T,
        var_grid=blocks.var_grid,
        levels=blocks.gen.levels,
        n_regimes=blocks.gen.n_regimes,
        residue=residue,
        mass=mass,
    )


def marginal_variance_pdf(jd: JointDistribution):
    """Marginal law of annualized realized variance.

    Returns ``(sigma_values, weights)``: the annualized variance level
    of each bucket and its probability.
    """
    return jd.sigma_values, jd.variance_weights()


def leakage_probability(jd: JointDistribution, tail_buckets: int = LEAKAGE_TAIL_BUCKETS) -> float:
    """Mass sitting in the highest ``tail_buckets`` buckets (wrap guard)."""
    if not 0 < tail_buckets < jd.var_grid.n_buckets:
        raise DomainError(
            f"tail_buckets must be in 1..{jd.var_grid.n_buckets - 1}, "
            f"got {tail_buckets}"
        )
    return float(jd.variance_weights()[-tail_buckets:].sum())


def check_leakage(
    jd: JointDistribution,
    tail_buckets: int = LEAKAGE_TAIL_BUCKETS,
    error_at: float = LEAKAGE_ERROR,
    warn_at: float = LEAKAGE_WARN,
) -> float:
    """Run the wrap-around guard; returns the tail mass it saw."""
    tail = leakage_probability(jd, tail_buckets)
    if tail > error_at:
        raise LeakageError(
            f"top-{tail_buckets} bucket mass {tail:.3e} exceeds {error_at:.0e}; "
            "increase c_max or the spacing"
        )
    if tail > warn_at:
        warnings.warn(
            f"top-{tail_buckets} bucket mass {tail:.3e} above {warn_at:.0e}",
            stacklevel=2,
        )
    return tail
