"""Eigendecomposition-based functional calculus and the circulant toolkit.

Everything downstream rests on two facts:

* a diagonalizable matrix ``A = U diag(lambda) U^-1`` supports arbitrary
  entire functions through ``phi(A) = U diag(phi(lambda)) U^-1``;
* a family of circulant matrices shares the DFT eigenvector basis, so a
  block matrix that is scalar off the block diagonal and circulant on it
  splits into small independent blocks under a partial DFT.

All operations here are pure; decomposing independent matrices from
multiple threads is safe.
"""

from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DiagonalizationError, DomainError, KernelError

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    def threadpool_limits(*args, **kwargs):
        return nullcontext()

#: Relative residual allowed for ``A U - U diag(lambda)`` and ``U U^-1 - I``.
DECOMP_RTOL = 1e-9
#: Condition-number ceiling for the eigenvector matrix.
MAX_CONDITION = 1e12
#: Imaginary part allowed in a reconstructed kernel before it is an error.
KERNEL_RESIDUE_LIMIT = 1e-6
#: Kernel entries below this are an error; entries in (floor, 0) are clamped.
KERNEL_NEGATIVE_FLOOR = -1e-10
#: Row sums of a kernel must be within this of one.
KERNEL_ROW_SUM_TOL = 1e-8

_RETRY_RNG_SEED = 0x5EED


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues and (right/inverse) eigenvector matrices of one matrix.

    ``right_vectors`` holds the eigenvectors as columns; ``inverse_rows``
    is its inverse, whose rows are the dual (left) eigenvectors.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    inverse_rows: np.ndarray
    condition: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _try_decompose(a: np.ndarray) -> SpectralDecomposition | None:
    w, v = scipy.linalg.eig(a, check_finite=False)
    try:
        vinv = scipy.linalg.inv(v, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None
    # 1-norm condition estimate; a full SVD would triple the cost here.
    condition = float(np.linalg.norm(v, 1) * np.linalg.norm(vinv, 1))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        return None
    scale = max(np.linalg.norm(a, np.inf), np.finfo(float).tiny)
    if np.linalg.norm(a @ v - v * w, np.inf) > DECOMP_RTOL * scale:
        return None
    if np.linalg.norm(v @ vinv - np.eye(a.shape[0]), np.inf) > DECOMP_RTOL:
        return None
    return SpectralDecomposition(w, v, vinv, condition)


def diagonalize(a: np.ndarray) -> SpectralDecomposition:
    """Diagonalize a dense square matrix, real or complex.

    If the eigenvector matrix is numerically singular (condition estimate
    above ``MAX_CONDITION``) the decomposition is retried once on a copy
    whose off-diagonal entries carry an i.i.d. perturbation of magnitude
    ``1e-12 * ||a||_inf``.  Matrices specified non-parametrically have
    simple spectra except on a null set, so one retry is enough in
    practice; a second failure raises.

    Raises
    ------
    DiagonalizationError
        If the decomposition stays ill-conditioned after the retry.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    dec = _try_decompose(a)
    if dec is not None:
        return dec
    scale = 1e-12 * max(np.linalg.norm(a, np.inf), 1.0)
    rng = np.random.default_rng(_RETRY_RNG_SEED)
    noise = rng.standard_normal(a.shape) * scale
    np.fill_diagonal(noise, 0.0)
    dec = _try_decompose(a + noise)
    if dec is not None:
        return dec
    v = scipy.linalg.eig(a)[1]
    try:
        condition = float(np.linalg.norm(v, 1) * np.linalg.norm(scipy.linalg.inv(v), 1))
    except scipy.linalg.LinAlgError:
        condition = float("inf")
    raise DiagonalizationError(
        f"eigenvector matrix ill-conditioned (estimate {condition:.3e}) "
        "even after perturbation retry",
        condition,
    )


def apply_function(dec: SpectralDecomposition, values: np.ndarray) -> np.ndarray:
    """Assemble ``U diag(values) U^-1`` for per-eigenvalue function values."""
    values = np.asarray(values)
    if values.shape != (dec.dim,):
        raise DomainError(
            f"expected {dec.dim} function values, got shape {values.shape}"
        )
    return (dec.right_vectors * values) @ dec.inverse_rows


def transition_kernel(
    dec: SpectralDecomposition,
    dt_financial: float,
    *,
    return_residue: bool = False,
):
    """Transition probabilities of a generator over a financial-time span.

    The matrix exponential is reconstructed in complex arithmetic and
    truncated to its real part once the imaginary residue passes the
    guard.  Entries in ``(KERNEL_NEGATIVE_FLOOR, 0)`` are rounding noise
    and are clamped to zero.

    Parameters
    ----------
    dec : SpectralDecomposition
        Decomposition of a Markov generator.
    dt_financial : float
        Nonnegative time span, in financial years.
    return_residue : bool
        Also return the maximal absolute imaginary part seen before
        truncation.

    Raises
    ------
    KernelError
        On residue above ``KERNEL_RESIDUE_LIMIT``, entries below the
        negative floor, or row sums off one by more than the tolerance.
    """
    if dt_financial < 0:
        raise DomainError(f"time span must be nonnegative, got {dt_financial}")
    raw = apply_function(dec, np.exp(dec.eigenvalues * dt_financial))
    residue = float(np.max(np.abs(raw.imag)))
    if residue > KERNEL_RESIDUE_LIMIT:
        raise KernelError(
            f"kernel imaginary residue {residue:.3e} exceeds "
            f"{KERNEL_RESIDUE_LIMIT:.0e}"
        )
    kernel = raw.real.copy()
    low = float(kernel.min())
    if low < KERNEL_NEGATIVE_FLOOR:
        raise KernelError(
            f"kernel entry {low:.3e} below floor {KERNEL_NEGATIVE_FLOOR:.0e}"
        )
    np.clip(kernel, 0.0, None, out=kernel)
    row_err = float(np.max(np.abs(kernel.sum(axis=1) - 1.0)))
    if row_err > KERNEL_ROW_SUM_TOL:
        raise KernelError(
            f"kernel row sums off one by {row_err:.3e} "
            f"(> {KERNEL_ROW_SUM_TOL:.0e})"
        )
    if return_residue:
        return kernel, residue
    return kernel


@dataclass(frozen=True)
class CirculantRow:
    """A circulant matrix, stored as its first row ``(c_0 .. c_{n-1})``.

    Row ``i`` of the materialized matrix is the first row rotated right
    ``i`` places: ``C[i, j] = c[(j - i) mod n]``.
    """

    first_row: np.ndarray

    def __post_init__(self):
        row = np.atleast_1d(np.asarray(self.first_row))
        if row.ndim != 1 or row.size == 0:
            raise DomainError("circulant row must be a nonempty vector")
        object.__setattr__(self, "first_row", row)

    @property
    def n(self) -> int:
        return self.first_row.shape[0]

    def materialize(self) -> np.ndarray:
        n = self.n
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        return self.first_row[idx]

    def spectrum(self) -> np.ndarray:
        return circulant_spectrum(self)


def circulant_spectrum(row: CirculantRow) -> np.ndarray:
    """Eigenvalues of a circulant: the DFT of its first row.

    ``lambda_r = sum_k c_k exp(-2 pi i r k / n)``, with the eigenvector
    for ``lambda_r`` given by column ``r`` of
    :func:`circulant_eigenvectors`.
    """
    return np.fft.fft(row.first_row.astype(complex))


def circulant_eigenvectors(n: int) -> np.ndarray:
    """Common orthonormal eigenbasis of all n x n circulants.

    Column ``r`` has entries ``exp(-2 pi i r j / n) / sqrt(n)``; the
    matrix is unitary.
    """
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def _circulant_family_spectra(b_family) -> np.ndarray:
    rows = [b if isinstance(b, CirculantRow) else CirculantRow(b) for b in b_family]
    n = rows[0].n
    if any(r.n != n for r in rows):
        raise DomainError("all circulant blocks must share one size")
    return np.stack([r.spectrum() for r in rows])  # (m, n)


def block_diagonalize(a: np.ndarray, b_family) -> list[np.ndarray]:
    """Blocks of the lifted operator built from ``a`` and circulant blocks.

    The implicit operator of size ``m*n`` has block ``(i, j)`` equal to
    ``a[i, j] * I`` off the diagonal and ``B(i) + a[i, i] * I`` on it.
    Under the partial DFT it splits into ``n`` independent blocks

        ``D_j = a + diag(lambda_j(B(0)), ..., lambda_j(B(m-1)))``,

    returned here in order ``j = 0 .. n-1``.  The basis change is never
    materialized.
    """
    a = np.asarray(a)
    m = a.shape[0]
    spectra = _circulant_family_spectra(b_family)
    if spectra.shape[0] != m:
        raise DomainError(
            f"need one circulant per base row: got {spectra.shape[0]} for m={m}"
        )
    n = spectra.shape[1]
    return [a + np.diag(spectra[:, j]) for j in range(n)]


def partial_circulant_apply(a: np.ndarray, b_family, scalar_fn) -> np.ndarray:
    """Apply an entire function to the implicit lifted operator, blockwise.

    ``scalar_fn`` maps an eigenvalue vector to function values, e.g.
    ``lambda lam: np.exp(lam * t)`` for the kernel at horizon ``t``.  The
    result is the full ``(m n) x (m n)`` matrix

        ``phi(A~)[(i, c), (j, d)]
            = (1/n) sum_k exp(-i p_k (c - d)) phi(D_k)[i, j]``

    with ``p_k = 2 pi k / n``, assembled through one FFT across the
    block index instead of ever forming the lifted operator.
    """
    a = np.asarray(a)
    m = a.shape[0]
    blocks = block_diagonalize(a, b_family)
    n = len(blocks)
    phis = np.empty((n, m, m), dtype=complex)
    for k, block in enumerate(blocks):
        dec = diagonalize(block)
        phis[k] = apply_function(dec, scalar_fn(dec.eigenvalues))
    # g[l] = (1/n) sum_k phis[k] exp(-2 pi i k l / n); entry (c, d) uses
    # l = (c - d) mod n.
    g = np.fft.fft(phis, axis=0) / n
    shift = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    out = g[shift]                      # (n, n, m, m)
    out = out.transpose(2, 0, 3, 1)     # (m, n, m, n)
    return out.reshape(m * n, m * n)


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Order-preserving map, optionally fanned out over worker processes.

    Matrices of the sizes used here run LAPACK fastest single-threaded,
    so BLAS pools are pinned to one thread inside the map either way and
    parallelism comes from independent workers.  Results return in input
    order regardless of completion order, keeping downstream reductions
    bit-stable across worker counts.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        with threadpool_limits(limits=1):
            return [fn(item) for item in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=threads, backend="loky", inner_max_num_threads=1)(
        delayed(fn)(item) for item in items
    )
