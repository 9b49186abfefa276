import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import volspec.spectral as sp
from oracles import (
    expm_series,
    materialize_circulant,
    materialize_partial_circulant,
    multiset_distance,
    random_generator,
)
from volspec.errors import DiagonalizationError, DomainError, KernelError


def sorted_complex(values):
    values = np.asarray(values)
    return values[np.lexsort((values.imag, values.real))]


class TestDiagonalize:
    def test_diagonal_matrix(self):
        dec = sp.diagonalize(np.diag([1.0, 2.0, 3.0]))
        assert np.allclose(sorted_complex(dec.eigenvalues), [1, 2, 3])
        # eigenvectors of a diagonal matrix are the standard basis
        assert np.allclose(np.abs(dec.right_vectors).max(axis=0), 1.0)
        assert np.allclose((np.abs(dec.right_vectors) > 0.5).sum(axis=0), 1)

    def test_two_state_generator(self):
        a, b = 0.7, 1.9
        dec = sp.diagonalize(np.array([[-a, a], [b, -b]]))
        assert np.allclose(sorted_complex(dec.eigenvalues), [-(a + b), 0.0])

    def test_generator_spectrum_nonpositive(self, table1_model):
        dec = table1_model.decomposition
        assert dec.eigenvalues.real.max() <= 1e-10

    def test_residual_invariants(self):
        rng = np.random.default_rng(3)
        a = random_generator(rng, 20)
        dec = sp.diagonalize(a)
        scale = np.linalg.norm(a, np.inf)
        resid = np.linalg.norm(a @ dec.right_vectors - dec.right_vectors * dec.eigenvalues, np.inf)
        assert resid <= 1e-9 * scale
        identity = dec.right_vectors @ dec.inverse_rows
        assert np.linalg.norm(identity - np.eye(20), np.inf) <= 1e-9

    def test_defective_matrix_recovered_by_retry(self):
        # A Jordan block has no eigenbasis; the perturbation retry must
        # still deliver a decomposition that meets the residual bounds.
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        dec = sp.diagonalize(a)
        resid = np.linalg.norm(a @ dec.right_vectors - dec.right_vectors * dec.eigenvalues, np.inf)
        assert resid <= 1e-9 * np.linalg.norm(a, np.inf)

    def test_persistent_ill_conditioning_raises(self, monkeypatch):
        monkeypatch.setattr(sp, "MAX_CONDITION", 1e-3)
        with pytest.raises(DiagonalizationError) as err:
            sp.diagonalize(random_generator(np.random.default_rng(0), 6))
        assert err.value.condition > 1e-3

    def test_rejects_nonsquare(self):
        with pytest.raises(DomainError):
            sp.diagonalize(np.zeros((2, 3)))


class TestApplyFunction:
    def test_identity_function_reconstructs(self):
        a = random_generator(np.random.default_rng(1), 12)
        dec = sp.diagonalize(a)
        back = sp.apply_function(dec, dec.eigenvalues)
        assert np.abs(back - a).max() <= 1e-9 * np.linalg.norm(a, np.inf)

    def test_constant_one_gives_identity(self):
        a = random_generator(np.random.default_rng(2), 9)
        dec = sp.diagonalize(a)
        assert np.abs(sp.apply_function(dec, np.ones(9)) - np.eye(9)).max() <= 1e-9

    def test_exponential_matches_series_oracle(self):
        a = random_generator(np.random.default_rng(4), 4)
        dec = sp.diagonalize(a)
        ours = sp.apply_function(dec, np.exp(dec.eigenvalues * 0.5))
        assert np.abs(ours - expm_series(a * 0.5)).max() <= 1e-9

    def test_dimension_mismatch(self):
        dec = sp.diagonalize(np.eye(3))
        with pytest.raises(DomainError):
            sp.apply_function(dec, np.ones(4))

    def test_exp_log_round_trip(self):
        # positive-spectrum, well-conditioned test matrix
        rng = np.random.default_rng(5)
        base = rng.random((6, 6)) * 0.1 + np.diag(np.linspace(1.0, 2.0, 6))
        dec = sp.diagonalize(base)
        exp = sp.apply_function(dec, np.exp(dec.eigenvalues))
        dec2 = sp.diagonalize(exp)
        back = sp.apply_function(dec2, np.log(dec2.eigenvalues))
        assert np.abs(back - base).max() <= 1e-8


class TestTransitionKernel:
    def test_zero_time_is_identity(self):
        a = random_generator(np.random.default_rng(6), 8)
        kernel = sp.transition_kernel(sp.diagonalize(a), 0.0)
        assert np.abs(kernel - np.eye(8)).max() <= 1e-8

    def test_two_state_closed_form(self):
        a, b, t = 0.4, 1.1, 0.8
        dec = sp.diagonalize(np.array([[-a, a], [b, -b]]))
        kernel = sp.transition_kernel(dec, t)
        expected = (b + a * np.exp(-(a + b) * t)) / (a + b)
        assert kernel[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_table1_row_sums(self, table1_model):
        kernel, residue = sp.transition_kernel(
            table1_model.decomposition, 1.0, return_residue=True
        )
        assert np.abs(kernel.sum(axis=1) - 1.0).max() <= 1e-8
        assert residue <= 1e-8
        assert kernel.min() >= 0.0

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            sp.transition_kernel(sp.diagonalize(np.eye(2)), -0.1)

    def test_residue_guard(self):
        dec = sp.SpectralDecomposition(
            eigenvalues=np.array([1j * 600.0, 0.0]),
            right_vectors=np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex),
            inverse_rows=np.array([[1.0, -1.0], [0.0, 1.0]], dtype=complex),
            condition=1.0,
        )
        with pytest.raises(KernelError):
            sp.transition_kernel(dec, 1.0)


class TestCirculants:
    def test_scalar_matrix(self):
        row = sp.CirculantRow(np.array([2.5, 0.0, 0.0, 0.0]))
        assert np.allclose(row.spectrum(), 2.5)

    def test_counting_shift_block(self):
        q = 0.37
        row = sp.CirculantRow(np.array([-q, q, 0.0, 0.0, 0.0]))
        expected = q * (np.exp(-2j * np.pi * np.arange(5) / 5) - 1.0)
        assert np.abs(row.spectrum() - expected).max() <= 1e-12

    def test_spectrum_matches_dense_eigensolver(self):
        rng = np.random.default_rng(7)
        c = rng.standard_normal(6)
        ours = sp.circulant_spectrum(sp.CirculantRow(c))
        dense = np.linalg.eigvals(materialize_circulant(c))
        assert multiset_distance(ours, dense) <= 1e-10

    def test_materialize_layout(self):
        row = sp.CirculantRow(np.array([0.0, 1.0, 2.0]))
        expected = np.array([[0, 1, 2], [2, 0, 1], [1, 2, 0]], dtype=float)
        assert np.array_equal(row.materialize(), expected)

    def test_eigenvector_relation_and_orthonormality(self):
        rng = np.random.default_rng(8)
        c = rng.standard_normal(9)
        dense = materialize_circulant(c)
        y = sp.circulant_eigenvectors(9)
        lam = sp.circulant_spectrum(sp.CirculantRow(c))
        assert np.abs(dense @ y - y * lam).max() <= 1e-12
        assert np.abs(y.conj().T @ y - np.eye(9)).max() <= 1e-12

    @given(st.integers(2, 16), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_dft_inversion_property(self, n, seed):
        c = np.random.default_rng(seed).standard_normal(n)
        lam = sp.circulant_spectrum(sp.CirculantRow(c))
        back = np.array(
            [lam @ np.exp(2j * np.pi * np.arange(n) * l / n) / n for l in range(n)]
        )
        assert np.abs(back - c).max() <= 1e-12


class TestBlockDiagonalize:
    def test_zero_circulants_give_base(self):
        a = random_generator(np.random.default_rng(9), 4)
        blocks = sp.block_diagonalize(a, [np.zeros(5)] * 4)
        assert len(blocks) == 5
        for block in blocks:
            assert np.abs(block - a).max() == 0.0

    def test_scalar_base(self):
        c = np.array([1.0, -2.0, 0.5])
        blocks = sp.block_diagonalize(np.array([[3.0]]), [c])
        lam = sp.circulant_spectrum(sp.CirculantRow(c))
        for j, block in enumerate(blocks):
            assert block.shape == (1, 1)
            assert block[0, 0] == pytest.approx(3.0 + lam[j], abs=1e-12)

    def test_spectrum_union_matches_dense(self):
        rng = np.random.default_rng(10)
        m, n = 3, 4
        a = rng.standard_normal((m, m))
        rows = [rng.standard_normal(n) for _ in range(m)]
        blocks = sp.block_diagonalize(a, rows)
        ours = np.concatenate([np.linalg.eigvals(b) for b in blocks])
        dense = np.linalg.eigvals(materialize_partial_circulant(a, rows))
        assert multiset_distance(ours, dense) <= 1e-9

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_block_spectra_completeness_property(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 5))
        n = int(rng.integers(2, max(3, 64 // max(m, 1) + 1)))
        if m * n > 64:
            n = 64 // m
        a = rng.standard_normal((m, m))
        rows = [rng.standard_normal(n) for _ in range(m)]
        blocks = sp.block_diagonalize(a, rows)
        assert sum(b.shape[0] for b in blocks) == m * n
        ours = np.concatenate([np.linalg.eigvals(b) for b in blocks])
        dense = np.linalg.eigvals(materialize_partial_circulant(a, rows))
        assert multiset_distance(ours, dense) <= 1e-8

    def test_mismatched_family_rejected(self):
        with pytest.raises(DomainError):
            sp.block_diagonalize(np.eye(2), [np.zeros(3)])
        with pytest.raises(DomainError):
            sp.block_diagonalize(np.eye(2), [np.zeros(3), np.zeros(4)])


class TestPartialCirculantApply:
    def test_exponential_matches_dense_series(self):
        rng = np.random.default_rng(11)
        m, n, t = 3, 5, 0.7
        a = rng.standard_normal((m, m)) * 0.6
        rows = [rng.standard_normal(n) * 0.6 for _ in range(m)]
        ours = sp.partial_circulant_apply(a, rows, lambda lam: np.exp(lam * t))
        dense = expm_series(materialize_partial_circulant(a, rows) * t)
        assert np.abs(ours - dense).max() <= 1e-9

    def test_identity_function_reproduces_lift(self):
        rng = np.random.default_rng(12)
        m, n = 2, 4
        a = rng.standard_normal((m, m))
        rows = [rng.standard_normal(n) for _ in range(m)]
        ours = sp.partial_circulant_apply(a, rows, lambda lam: lam)
        dense = materialize_partial_circulant(a, rows)
        assert np.abs(ours - dense).max() <= 1e-10


def test_parallel_map_preserves_order_and_bits():
    items = [np.full((3, 3), float(i)) for i in range(8)]
    serial = sp.parallel_map(np.trace, items)
    parallel = sp.parallel_map(np.trace, items, threads=2)
    assert serial == parallel == [3.0 * i for i in range(8)]
