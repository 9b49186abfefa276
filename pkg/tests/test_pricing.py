import numpy as np
import pytest

import volspec.model as vm
import volspec.pricing as vp
from volspec.errors import DomainError, InversionError


@pytest.fixture(scope="module")
def flat_model():
    """Near-degenerate chain: volatility small enough to price like cash."""
    cfg = {
        "grid": {"n": 24, "spot": 100.0, "top": 400.0, "bottom": 25.0},
        "regimes": [
            {"sigma": 1e-7, "beta": 1.0, "sigma_bar": 1.0,
             "nu_minus": 0.0, "nu_plus": 0.0, "level": 100.0}
        ],
        "switch_generators": [[[0.0]]],
        "time_change": None,
        "discount": {"r": 0.0, "q": 0.0},
        "start_regime": 0,
    }
    return vm.load_model(cfg)


class TestPriceEuropean:
    def test_unit_payoff(self, nojump_model):
        row = nojump_model.kernel_row(0.0, 1.0)
        price = vp.price_european(row, np.ones(row.size), 0.0, 1.0, nojump_model.discount)
        assert price == pytest.approx(1.0, abs=1e-6)

    def test_forward_payoff_is_martingale(self, nojump_model):
        row = nojump_model.kernel_row(0.0, 1.0)
        price = vp.price_european(
            row, nojump_model.levels_product, 0.0, 1.0, nojump_model.discount
        )
        assert price == pytest.approx(nojump_model.grid.spot, abs=1e-6 * 100)

    def test_zero_strike_call_equals_forward(self, nojump_model):
        price = vp.price_vanilla(nojump_model, vp.VanillaSpec("call", 1e-12, 1.0))
        assert price == pytest.approx(nojump_model.grid.spot, abs=1e-6 * 100)

    def test_bad_mass_rejected(self, nojump_model):
        with pytest.raises(DomainError):
            vp.price_european(
                np.full(4, 0.3), np.ones(4), 0.0, 1.0, nojump_model.discount
            )


class TestParityAndMonotonicity:
    def test_put_call_parity(self, table1_model):
        spot = table1_model.grid.spot
        for T in (0.5, 2.0):
            row = table1_model.kernel_row(0.0, T)
            mass = row.sum()
            for strike in (70.0, 100.0, 130.0):
                call = vp.price_european(
                    row,
                    vp.vanilla_payoff_values(
                        vp.VanillaSpec("call", strike, T),
                        table1_model.levels_product,
                        table1_model.discount,
                    ),
                    0.0, T, table1_model.discount,
                )
                put = vp.price_european(
                    row,
                    vp.vanilla_payoff_values(
                        vp.VanillaSpec("put", strike, T),
                        table1_model.levels_product,
                        table1_model.discount,
                    ),
                    0.0, T, table1_model.discount,
                )
                assert call - put == pytest.approx(spot - strike * mass, abs=1e-8 * spot)

    def test_calls_nonincreasing_in_strike(self, table1_model):
        strikes = np.linspace(40.0, 180.0, 15)
        prices = [
            vp.price_vanilla(table1_model, vp.VanillaSpec("call", k, 1.0))
            for k in strikes
        ]
        assert np.all(np.diff(prices) <= 1e-12)


class TestGreeks:
    @pytest.fixture(scope="class")
    def uniform_model(self):
        # the symmetric second difference is exact on uniform spacing only
        grid = vm.StateGrid(np.linspace(60.0, 140.0, 41), 20)
        p = vm.RegimeParams(0.12, 1.0, 5.0, 0.0, 0.0, 100.0)
        return vm.Model(grid, [p], [vm.SwitchGenerator(np.zeros((1, 1)))])

    def test_linear_payoff(self, uniform_model):
        kernel = uniform_model.kernel(0.0, 1.0)
        profile = vp.greeks_profile(
            kernel,
            uniform_model.levels_product,
            uniform_model.grid,
            [p.sigma for p in uniform_model.regimes],
        )
        assert np.abs(profile.delta - 1.0).max() <= 1e-6
        assert np.abs(profile.gamma).max() <= 1e-6

    def test_constant_payoff(self, uniform_model):
        kernel = uniform_model.kernel(0.0, 1.0)
        profile = vp.greeks_profile(
            kernel,
            np.ones(kernel.shape[0]),
            uniform_model.grid,
            [p.sigma for p in uniform_model.regimes],
        )
        assert np.abs(profile.delta).max() <= 1e-10
        assert np.abs(profile.gamma).max() <= 1e-8
        assert np.abs(profile.vega).max() <= 1e-10

    def test_atm_call_profiles(self, table1_model):
        profile = vp.model_greeks(table1_model, vp.VanillaSpec("call", 100.0, 0.5))
        alpha = table1_model.start_regime
        spot_pos = int(
            np.where(profile.spot_indices == table1_model.grid.spot_index)[0][0]
        )
        assert profile.gamma[alpha, spot_pos] > 0
        assert profile.vega[alpha, spot_pos] > 0
        # largest gamma and vega sit at the money
        assert abs(int(np.argmax(profile.gamma[alpha])) - spot_pos) <= 2
        assert abs(int(np.argmax(profile.vega[alpha])) - spot_pos) <= 2

    def test_too_few_interior_states(self):
        grid = vm.StateGrid(np.array([90.0, 100.0, 110.0, 120.0]), 1)
        with pytest.raises(DomainError):
            vp.greeks_profile(np.eye(4), np.ones(4), grid, [0.1])


class TestForwardStart:
    def test_zero_forward_strike_pays_stock(self, nojump_model):
        spec = vp.ForwardStartSpec(0.5, 1.0, 0.0)
        price = vp.price_forward_start(spec, nojump_model)
        assert price == pytest.approx(nojump_model.grid.spot, abs=1e-6 * 100)

    def test_huge_forward_strike_worthless(self, nojump_model):
        spec = vp.ForwardStartSpec(0.5, 1.0, 50.0)
        assert vp.price_forward_start(spec, nojump_model) <= 1e-8

    def test_short_set_date_converges_to_vanilla(self, nojump_model):
        a = 1.1
        spec = vp.ForwardStartSpec(1e-4, 1.0, a)
        fwd = vp.price_forward_start(spec, nojump_model)
        vanilla = vp.price_vanilla(
            nojump_model, vp.VanillaSpec("call", a * nojump_model.grid.spot, 1.0)
        )
        assert fwd == pytest.approx(vanilla, abs=1e-6 * 100)

    def test_convex_nonincreasing_in_strike(self, table1_model):
        strikes = np.linspace(0.5, 1.6, 12)
        prices = np.array([
            vp.price_forward_start(vp.ForwardStartSpec(0.25, 1.0, a), table1_model)
            for a in strikes
        ])
        diffs = np.diff(prices)
        assert np.all(diffs <= 1e-10)
        assert np.all(np.diff(diffs) >= -1e-8)

    def test_validation(self):
        with pytest.raises(DomainError):
            vp.ForwardStartSpec(1.0, 0.5, 1.0)


class TestImpliedVol:
    def test_round_trip(self):
        curve = vm.DiscountCurve()
        spec = vp.VanillaSpec("call", 110.0, 0.75)
        price = vp.bs_price("call", 100.0, 110.0, 0.75, 0.0, 0.0, 0.2)
        assert vp.implied_vol(price, spec, 100.0, curve) == pytest.approx(0.2, abs=1e-8)

    def test_intrinsic_gives_zero(self):
        curve = vm.DiscountCurve()
        spec = vp.VanillaSpec("call", 80.0, 1.0)
        assert vp.implied_vol(20.0, spec, 100.0, curve) == 0.0

    def test_out_of_bounds_rejected(self):
        curve = vm.DiscountCurve()
        with pytest.raises(InversionError):
            vp.implied_vol(150.0, vp.VanillaSpec("call", 100.0, 1.0), 100.0, curve)
        with pytest.raises(InversionError):
            vp.implied_vol(-0.5, vp.VanillaSpec("put", 100.0, 1.0), 100.0, curve)

    def test_forward_smile_has_negative_skew(self, table1_model):
        vols = vp.forward_smile(table1_model, 0.25, 1.25, [0.9, 1.0, 1.1])
        assert vols[0] > vols[1] > vols[2]


class TestVariancePayoffs:
    def test_jensen_ordering(self, nojump_model):
        params = vp.LiftParams(c_max=60)
        k_var = vp.price_variance_derivative(
            vp.VariancePayoff.var_swap(), 0.0, 1.0, nojump_model, params
        )
        k_vol = vp.price_variance_derivative(
            vp.VariancePayoff.vol_swap(), 0.0, 1.0, nojump_model, params
        )
        assert k_vol < np.sqrt(k_var)

    def test_zero_strike_swaption_is_forward(self, nojump_model):
        params = vp.LiftParams(c_max=60)
        swaption = vp.price_variance_derivative(
            vp.VariancePayoff.var_swaption(0.0), 0.0, 1.0, nojump_model, params
        )
        k_var = vp.price_variance_derivative(
            vp.VariancePayoff.var_swap(), 0.0, 1.0, nojump_model, params
        )
        assert swaption == pytest.approx(k_var, rel=1e-12)

    def test_swaption_nonincreasing_in_strike(self, nojump_model):
        params = vp.LiftParams(c_max=60)
        prices = [
            vp.price_variance_derivative(
                vp.VariancePayoff.var_swaption(k), 0.0, 1.0, nojump_model, params
            )
            for k in (0.005, 0.01, 0.02, 0.04)
        ]
        assert np.all(np.diff(prices) < 0)

    def test_capped_vol_swap_below_uncapped(self, nojump_model):
        params = vp.LiftParams(c_max=60)
        capped = vp.price_variance_derivative(
            vp.VariancePayoff.capped_vol_swap(0.0, 0.105), 0.0, 1.0, nojump_model, params
        )
        full = vp.price_variance_derivative(
            vp.VariancePayoff.vol_swap(), 0.0, 1.0, nojump_model, params
        )
        assert capped < full

    def test_custom_payoff(self, nojump_model):
        params = vp.LiftParams(c_max=60)
        doubled = vp.price_variance_derivative(
            vp.VariancePayoff.custom(lambda s: 2.0 * s), 0.0, 1.0, nojump_model, params
        )
        k_var = vp.price_variance_derivative(
            vp.VariancePayoff.var_swap(), 0.0, 1.0, nojump_model, params
        )
        assert doubled == pytest.approx(2.0 * k_var, rel=1e-12)

    def test_payoff_validation(self):
        with pytest.raises(DomainError):
            vp.VariancePayoff("nonsense")
        with pytest.raises(DomainError):
            vp.VariancePayoff.capped_vol_swap(0.1, 0.0)
        with pytest.raises(DomainError):
            vp.VariancePayoff("custom")


class TestLogContract:
    def test_degenerate_chain_is_zero(self, flat_model):
        assert abs(vp.log_contract(1.0, flat_model)) <= 1e-10

    def test_nojump_log_close_to_var_swap(self, nojump_model):
        lc = vp.log_contract(1.0, nojump_model)
        k_var = vp.price_variance_derivative(
            vp.VariancePayoff.var_swap(), 0.0, 1.0, nojump_model, vp.LiftParams(c_max=100)
        )
        assert abs(vp.vol_points(lc) - vp.vol_points(k_var)) < 1.0


class TestVixPortfolio:
    def test_close_to_log_contract(self, nojump_model):
        lc = vp.vol_points(vp.log_contract(1.0, nojump_model))
        strip = vp.vol_points(vp.model_vix_portfolio(nojump_model, 1.0))
        assert abs(strip - lc) <= 0.05

    def test_flat_underlying_near_zero(self, flat_model):
        assert vp.model_vix_portfolio(flat_model, 0.5) == pytest.approx(0.0, abs=1e-6)

    def test_refining_strikes_reduces_error(self, nojump_model):
        lc = vp.log_contract(1.0, nojump_model)
        row = nojump_model.kernel_row(0.0, 1.0)
        levels = nojump_model.levels_product
        coarse = np.unique(levels)
        fine = np.unique(np.concatenate([coarse, 0.5 * (coarse[1:] + coarse[:-1])]))
        errs = []
        for strikes in (coarse, fine):
            spec = vp.VixSpec(tenor=1.0, strikes=strikes)
            value = vp.vix_portfolio(
                spec, row, 100.0, levels, nojump_model.discount, horizon=1.0
            )
            errs.append(abs(value - lc))
        assert errs[1] < errs[0]

    def test_band_spec(self, nojump_model):
        spec = vp.VixSpec(tenor=1.0, band=(0.4, 2.5))
        strikes = spec.strike_grid(nojump_model.levels_product, 100.0)
        assert strikes.min() >= 40.0
        assert strikes.max() <= 250.0

    def test_empty_grid_rejected(self, nojump_model):
        with pytest.raises(DomainError):
            vp.VixSpec(tenor=1.0, strikes=np.array([]))
        spec = vp.VixSpec(tenor=1.0, strikes=np.array([150.0, 200.0]))
        with pytest.raises(DomainError):
            vp.vix_portfolio(
                spec,
                nojump_model.kernel_row(0.0, 1.0),
                100.0,
                nojump_model.levels_product,
                nojump_model.discount,
            )


class TestVixPdf:
    def test_mass_conservation(self, nojump_model):
        dist = vp.vix_pdf(0.5, vp.VixSpec(), nojump_model, 0.5)
        assert dist.mass == pytest.approx(1.0, abs=1e-6)

    def test_degenerate_chain_point_mass(self, flat_model):
        dist = vp.vix_pdf(0.5, vp.VixSpec(), flat_model, 0.5)
        assert (dist.probabilities > 1e-12).sum() == 1

    def test_calibrated_shape_unimodal_right_skewed(self, table1_model):
        dist = vp.vix_pdf(1.0, vp.VixSpec(), table1_model, 0.5)
        probs = dist.probabilities
        meaningful = probs > 1e-6 * probs.max()
        peaks = 0
        for i in range(probs.size):
            if not meaningful[i]:
                continue
            left = probs[i - 1] if i > 0 else -1.0
            right = probs[i + 1] if i + 1 < probs.size else -1.0
            if probs[i] >= left and probs[i] > right:
                peaks += 1
        assert peaks == 1
        mean = float(dist.state_weights @ dist.state_values)
        var = float(dist.state_weights @ (dist.state_values - mean) ** 2)
        skew = float(dist.state_weights @ (dist.state_values - mean) ** 3) / var**1.5
        assert skew > 0

    def test_validation(self, nojump_model):
        with pytest.raises(DomainError):
            vp.vix_pdf(0.0, vp.VixSpec(), nojump_model, 0.5)
        with pytest.raises(DomainError):
            vp.vix_pdf(1.0, vp.VixSpec(), nojump_model, 0.0)
