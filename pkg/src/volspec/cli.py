"""Batch command-line front end.

Loads a model config, runs one pricing/lift/Monte-Carlo command, and
writes CSV + JSON reports, a rendered figure, and a diagnostics sidecar
into the output directory.  Outputs are deterministic: the same config
and flags (including the seed) produce byte-identical CSV/JSON.

Exit codes: 0 ok, 2 config error, 3 numerical guard trip.
"""

from __future__ import annotations

import functools
import sys
import time

import click
import numpy as np

from . import lift, mc, pricing, reports, spectral
from .errors import ConfigError, NumericalError
from .model import load_model
from .pricing import (
    ForwardStartSpec,
    LiftParams,
    VanillaSpec,
    VariancePayoff,
    VixSpec,
    forward_implied_vol,
    implied_vol,
    log_contract,
    model_greeks,
    model_vix_portfolio,
    price_european,
    price_forward_start,
    price_variance_derivative,
    vanilla_payoff_values,
    vol_points,
)

_DEFAULT_MATURITIES = "0.5,1,2,3,4,5"


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from exc


def _parse_alpha_rule(rule: str) -> float | None:
    if rule == "schedule":
        return None
    if rule.startswith("fixed:"):
        try:
            value = float(rule.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad alpha rule {rule!r}") from exc
        if value <= 0:
            raise ConfigError("fixed alpha must be positive")
        return value
    raise ConfigError(f"alpha rule must be 'schedule' or 'fixed:<v>', got {rule!r}")


def guarded(fn):
    """Map package errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical guard: {exc}", err=True)
            sys.exit(3)

    return wrapper


class Runtime:
    def __init__(self, model_source, out_dir, threads):
        self.model = load_model(model_source)
        self.out_dir = out_dir
        self.threads = threads
        self.config_hash = reports.config_hash(self.model.config or {})
        self.started = time.perf_counter()

    def finish(self, name, header, rows, payload, diagnostics, figure):
        paths = reports.report_paths(self.out_dir, name)
        diagnostics = {"config_hash": self.config_hash, **diagnostics}
        payload = {
            "command": name,
            "config_hash": self.config_hash,
            "diagnostics": diagnostics,
            "columns": list(header),
            "rows": [
                [x if isinstance(x, str) else float(x) for x in row] for row in rows
            ],
            **payload,
        }
        reports.write_csv(paths["csv"], header, rows, diagnostics)
        reports.write_json(paths["json"], payload)
        if figure is not None:
            figure(paths["png"])
        wall = time.perf_counter() - self.started
        reports.write_diagnostics(paths["diag"], {**diagnostics, "wall_time_s": wall})
        click.echo(f"wrote {paths['csv']} (+json, png, diag) in {wall:.1f}s")


_model_option = click.option(
    "--model", "model_source", default=None,
    help="Model config: JSON path or bundled name (default table1_calibrated).",
)
_out_option = click.option(
    "--out", "out_dir", default="reports", show_default=True,
    help="Output directory for report files.",
)
_threads_option = click.option(
    "--threads", type=int, default=None, envvar="VOLSPEC_THREADS",
    help="Workers for the per-block map (env VOLSPEC_THREADS).",
)
_c_option = click.option(
    "--C", "c_max", type=int, default=100, show_default=True,
    help="Variance buckets parameter C (lattice has 2C+1 buckets).",
)
_alpha_option = click.option(
    "--alpha-rule", default="schedule", show_default=True,
    help="Bucket spacing: 'schedule' or 'fixed:<value>'.",
)


@click.group()
def main():
    """Spectral pricing of variance and volatility derivatives."""


def _kernel_diag(model, maturities):
    worst_mass, worst_residue = 0.0, 0.0
    for T in maturities:
        kernel, residue = spectral.transition_kernel(
            model.decomposition, model.financial_dt(0.0, T), return_residue=True
        )
        worst_mass = max(worst_mass, float(np.abs(kernel.sum(1) - 1).max()))
        worst_residue = max(worst_residue, residue)
    return {"kernel_mass_error": worst_mass, "kernel_residue": worst_residue}


@main.command("vanilla-smile")
@_model_option
@_out_option
@_threads_option
@click.option("--T", "maturities", default="0.5,1,2", show_default=True,
              help="Comma-separated maturities in years.")
@click.option("--strikes", default=None,
              help="Comma-separated strikes (default: lattice levels in [0.5, 2] x spot).")
@guarded
def vanilla_smile(model_source, out_dir, threads, maturities, strikes):
    """European option prices and implied volatilities per strike."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    mats = _floats(maturities)
    if strikes is None:
        levels = np.unique(model.grid.levels)
        spot = model.grid.spot
        ks = levels[(levels >= 0.5 * spot) & (levels <= 2.0 * spot)]
    else:
        ks = np.asarray(_floats(strikes))
    rows = []
    series = {}
    for T in mats:
        krow = model.kernel_row(0.0, T)
        vols = []
        for k in ks:
            kind = "put" if k < model.grid.spot else "call"
            spec = VanillaSpec(kind, float(k), T)
            payoff = vanilla_payoff_values(spec, model.levels_product, model.discount)
            price = price_european(krow, payoff, 0.0, T, model.discount)
            vol = implied_vol(price, spec, model.grid.spot, model.discount)
            rows.append([T, k, price, vol])
            vols.append(100 * vol)
        series[f"T={T}"] = (ks, np.array(vols))
    diag = _kernel_diag(model, mats)
    rt.finish(
        "vanilla-smile",
        ["maturity", "strike", "price", "implied_vol"],
        rows,
        {},
        diag,
        lambda p: reports.line_figure(
            p, "strike", "implied vol (%)", "vanilla smile", series
        ),
    )


@main.command("greeks")
@_model_option
@_out_option
@_threads_option
@click.option("--T", "maturities", default="0.5,1,2", show_default=True)
@click.option("--strike", type=float, default=100.0, show_default=True)
@guarded
def greeks(model_source, out_dir, threads, maturities, strike):
    """Delta, gamma and vega profiles of a call across start states."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    mats = _floats(maturities)
    alpha = model.start_regime
    rows = []
    panels = {"delta": {}, "gamma": {}, "vega": {}}
    interior = None
    for T in mats:
        profile = model_greeks(model, VanillaSpec("call", strike, T))
        interior = profile.spot_indices
        levels = model.grid.levels[interior]
        label = f"T={T}"
        panels["delta"][label] = profile.delta[alpha]
        panels["gamma"][label] = profile.gamma[alpha]
        panels["vega"][label] = profile.vega[alpha]
        for i, x in enumerate(interior):
            rows.append(
                [T, levels[i], profile.delta[alpha, i], profile.gamma[alpha, i], profile.vega[alpha, i]]
            )
    diag = _kernel_diag(model, mats)
    levels = model.grid.levels[interior]
    rt.finish(
        "greeks",
        ["maturity", "level", "delta", "gamma", "vega"],
        rows,
        {"strike": strike, "regime": alpha},
        diag,
        lambda p: reports.greeks_figure(
            p, levels, panels, f"call struck {strike:g}: profiles (regime {alpha})"
        ),
    )


@main.command("forward-smile")
@_model_option
@_out_option
@_threads_option
@click.option("--t-prime", type=float, default=0.25, show_default=True,
              help="Strike-set date in years.")
@click.option("--T", "maturity", type=float, default=1.25, show_default=True)
@click.option("--strikes", default="0.6,0.7,0.8,0.9,1.0,1.1,1.2,1.3,1.4",
              show_default=True, help="Forward strikes (moneyness).")
@guarded
def forward_smile_cmd(model_source, out_dir, threads, t_prime, maturity, strikes):
    """Forward-start prices and the implied forward volatility smile."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    ks = _floats(strikes)
    rows = []
    vols = []
    for a in ks:
        spec = ForwardStartSpec(t_prime, maturity, a)
        price = price_forward_start(spec, model)
        vol = forward_implied_vol(price, spec, model.grid.spot)
        rows.append([t_prime, maturity, a, price, vol])
        vols.append(100 * vol)
    diag = _kernel_diag(model, [t_prime, maturity])
    rt.finish(
        "forward-smile",
        ["t_prime", "maturity", "forward_strike", "price", "forward_vol"],
        rows,
        {},
        diag,
        lambda p: reports.line_figure(
            p, "forward strike", "implied forward vol (%)",
            f"forward smile {t_prime}y into {maturity}y",
            {"forward smile": (np.array(ks), np.array(vols))},
        ),
    )


def _joint_diag(jd, params):
    return {
        "mass": jd.mass,
        "residue": jd.residue,
        "leakage": lift.leakage_probability(jd, params.tail_buckets),
    }


@main.command("var-derivs")
@_model_option
@_out_option
@_threads_option
@_c_option
@_alpha_option
@click.option("--T", "maturity", type=float, default=1.0, show_default=True)
@guarded
def var_derivs(model_source, out_dir, threads, c_max, alpha_rule, maturity):
    """Fair variance/volatility strikes and swaption prices at one maturity."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    params = LiftParams(c_max=c_max, alpha=_parse_alpha_rule(alpha_rule), threads=threads)
    jd = pricing.variance_distribution(model, 0.0, maturity, params)
    sigma, weights = lift.marginal_variance_pdf(jd)
    k_var = float(weights @ sigma)
    k_vol = float(weights @ np.sqrt(sigma))
    rows = [
        ["var_swap_fair_strike", "", k_var, vol_points(k_var)],
        ["vol_swap_fair_strike", "", k_vol**2, 100 * k_vol],
    ]
    for a in (0.8, 1.0, 1.2):
        strike = a**2 * k_var
        price = float(weights @ VariancePayoff.var_swaption(strike).values(sigma))
        rows.append([f"var_swaption", f"a={a:g}", price, 100 * np.sqrt(max(price, 0))])
    diag = _joint_diag(jd, params)
    sig_vol = 100 * np.sqrt(sigma)
    rt.finish(
        "var-derivs",
        ["product", "parameter", "value_variance_units", "value_vol_terms"],
        rows,
        {"maturity": maturity, "c_max": c_max, "spacing": jd.var_grid.spacing},
        diag,
        lambda p: reports.pdf_figure(
            p, sig_vol, weights, "realized volatility (%)",
            f"realized-variance marginal at T={maturity:g}",
        ),
    )


@main.command("var-term-structure")
@_model_option
@_out_option
@_threads_option
@_c_option
@_alpha_option
@click.option("--T", "maturities", default=_DEFAULT_MATURITIES, show_default=True)
@guarded
def var_term_structure(model_source, out_dir, threads, c_max, alpha_rule, maturities):
    """Log contract, replication strip, variance and volatility swaps per maturity."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    mats = _floats(maturities)
    params = LiftParams(c_max=c_max, alpha=_parse_alpha_rule(alpha_rule), threads=threads)
    rows = []
    diag = {"mass": 1.0, "residue": 0.0, "leakage": 0.0}
    for T in mats:
        jd = pricing.variance_distribution(model, 0.0, T, params)
        sigma, weights = lift.marginal_variance_pdf(jd)
        row = [
            T,
            vol_points(log_contract(T, model)),
            vol_points(model_vix_portfolio(model, T)),
            vol_points(float(weights @ sigma)),
            100 * float(weights @ np.sqrt(sigma)),
        ]
        rows.append(row)
        d = _joint_diag(jd, params)
        diag["mass"] = min(diag["mass"], d["mass"])
        diag["residue"] = max(diag["residue"], d["residue"])
        diag["leakage"] = max(diag["leakage"], d["leakage"])
    header = ["maturity", "log_contract", "portfolio", "var_swap", "vol_swap"]
    ts = np.array(mats)
    series = {
        name: (ts, np.array([r[i + 1] for r in rows]))
        for i, name in enumerate(header[1:])
    }
    rt.finish(
        "var-term-structure", header, rows,
        {"c_max": c_max},
        diag,
        lambda p: reports.line_figure(
            p, "maturity (years)", "volatility terms (%)",
            "variance term structure", series,
        ),
    )


@main.command("vix-pdf")
@_model_option
@_out_option
@_threads_option
@click.option("--t", "horizon", type=float, default=1.0, show_default=True,
              help="Horizon at which the index is observed.")
@click.option("--tenor", type=float, default=pricing.VIX_TENOR, show_default=True)
@click.option("--delta", "bucket_width", type=float, default=0.5, show_default=True,
              help="Width of the index-level bins, in vol points.")
@guarded
def vix_pdf_cmd(model_source, out_dir, threads, horizon, tenor, bucket_width):
    """Distribution of the volatility index at a future horizon."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    spec = VixSpec(tenor=tenor)
    dist = pricing.vix_pdf(horizon, spec, model, bucket_width)
    rows = [
        [dist.bin_edges[i], dist.probabilities[i]]
        for i in range(dist.probabilities.size)
    ]
    diag = {**_kernel_diag(model, [horizon]), "mass": dist.mass}
    rt.finish(
        "vix-pdf",
        ["vix_level", "probability"],
        rows,
        {"horizon": horizon, "tenor": tenor, "delta": bucket_width},
        diag,
        lambda p: reports.pdf_figure(
            p, dist.bin_edges[:-1], dist.probabilities, "index level",
            f"volatility index distribution at t={horizon:g}", width=bucket_width,
        ),
    )


@main.command("joint-pdf")
@_model_option
@_out_option
@_threads_option
@_c_option
@_alpha_option
@click.option("--T", "maturity", type=float, default=1.0, show_default=True)
@guarded
def joint_pdf(model_source, out_dir, threads, c_max, alpha_rule, maturity):
    """Joint density of terminal spot and annualized realized variance."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    params = LiftParams(c_max=c_max, alpha=_parse_alpha_rule(alpha_rule), threads=threads)
    jd = pricing.variance_distribution(model, 0.0, maturity, params)
    n_spot = model.n_spot
    sig = jd.sigma_values
    rows = []
    for d in range(jd.var_grid.n_buckets):
        for j in range(jd.levels.size):
            rows.append([jd.levels[j], j // n_spot, sig[d], jd.probabilities[d, j]])
    density = jd.probabilities.reshape(jd.var_grid.n_buckets, model.n_regimes, n_spot).sum(axis=1)
    rt.finish(
        "joint-pdf",
        ["spot_level", "regime", "sigma_annualized", "probability"],
        rows,
        {"maturity": maturity, "c_max": c_max, "spacing": jd.var_grid.spacing},
        _joint_diag(jd, params),
        lambda p: reports.joint_figure(
            p, model.grid.levels, 100 * np.sqrt(sig), density,
            f"joint law of spot and realized variance at T={maturity:g}",
        ),
    )


@main.command("mc-compare")
@_model_option
@_out_option
@_threads_option
@_c_option
@click.option("--T", "maturities", default="1,3,5", show_default=True)
@click.option("--paths", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@guarded
def mc_compare(model_source, out_dir, threads, c_max, maturities, paths, seed):
    """Monte Carlo versus spectral prices for realized-variance payoffs."""
    rt = Runtime(model_source, out_dir, threads)
    model = rt.model
    mats = sorted(_floats(maturities))
    horizon = mats[-1]
    result = mc.simulate(
        mc.PathConfig(n_paths=paths, horizon=horizon, seed=seed),
        model,
        checkpoints=mats,
    )
    params = LiftParams(c_max=c_max, threads=threads)
    rows = []
    worst = {"mass": 1.0, "residue": 0.0, "leakage": 0.0}
    for T in mats:
        jd = pricing.variance_distribution(model, 0.0, T, params)
        sigma, weights = lift.marginal_variance_pdf(jd)
        k_var = float(weights @ sigma)
        strikes = [(a, a**2 * k_var) for a in (0.8, 1.0, 1.2)]
        spec_row = [
            "spectral", T,
            vol_points(k_var),
            100 * float(weights @ np.sqrt(sigma)),
        ] + [
            float(weights @ VariancePayoff.var_swaption(k).values(sigma)) * 100
            for _, k in strikes
        ]
        sample = result.samples[T]
        mc_row = [
            f"mc:{paths}", T,
            vol_points(mc.mc_price(sample, VariancePayoff.var_swap())[0]),
            100 * mc.mc_price(sample, VariancePayoff.vol_swap())[0],
        ] + [
            100 * mc.mc_price(sample, VariancePayoff.var_swaption(k))[0]
            for _, k in strikes
        ]
        rows.extend([mc_row, spec_row])
        d = _joint_diag(jd, params)
        worst["mass"] = min(worst["mass"], d["mass"])
        worst["residue"] = max(worst["residue"], d["residue"])
        worst["leakage"] = max(worst["leakage"], d["leakage"])
    header = ["method", "maturity", "var_swap", "vol_swap",
              "option_a80", "option_a100", "option_a120"]
    groups = [f"T={T}" for T in mats]
    series = {
        "mc var swap": [r[2] for r in rows if r[0].startswith("mc")],
        "spectral var swap": [r[2] for r in rows if r[0] == "spectral"],
        "mc vol swap": [r[3] for r in rows if r[0].startswith("mc")],
        "spectral vol swap": [r[3] for r in rows if r[0] == "spectral"],
    }
    rt.finish(
        "mc-compare", header, rows,
        {"paths": paths, "seed": seed, "c_max": c_max},
        worst,
        lambda p: reports.bars_figure(
            p, groups, series, "volatility terms (%)",
            "Monte Carlo vs spectral",
        ),
    )


if __name__ == "__main__":
    main()
