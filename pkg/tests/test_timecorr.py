"""Time-correlation models, synthetic histograms, jitter convolution, fits."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from biphoton.timecorr import (
    DEFAULT_DELTA,
    FIGURE_PRESETS,
    BeatModelParams,
    CoincidenceHistogram,
    FitDegenerateError,
    HistogramFileError,
    SinglePathParams,
    _bin_means,
    beat_contrast,
    convolve_jitter,
    estimate_single_init,
    fit_beats,
    fit_single,
    g2_beats,
    g2_beats_from_amplitudes,
    g2_single,
    read_histogram_csv,
    simulate_histogram,
    slice_histogram,
    write_histogram_csv,
)


def random_beat_params(rng: np.random.Generator) -> BeatModelParams:
    return BeatModelParams(
        g0=rng.uniform(0.1, 3.0),
        tau_x=rng.uniform(1.0, 20.0),
        tau_y=rng.uniform(1.0, 20.0),
        r=rng.uniform(0.0, 3.0),
        phi=rng.uniform(-math.pi, math.pi),
        delta=rng.uniform(0.1, 5.0),
        background=rng.uniform(0.0, 20.0),
    )


class TestSinglePathModel:
    def test_peak_value(self):
        p = SinglePathParams(g0=100.0, tau_rise=3.1, tau_decay=5.6, background=7.0)
        assert g2_single(0.0, p) == pytest.approx(107.0, abs=1e-12)

    def test_rise_and_decay_constants(self):
        p = SinglePathParams(g0=100.0, tau_rise=3.1, tau_decay=5.6)
        assert g2_single(-3.1, p) == pytest.approx(100.0 / math.e, abs=1e-10)
        assert g2_single(5.6, p) == pytest.approx(100.0 / math.e, abs=1e-10)

    def test_continuous_at_zero(self):
        p = SinglePathParams(g0=50.0, tau_rise=2.0, tau_decay=9.0, background=1.0)
        assert g2_single(-1e-12, p) == pytest.approx(g2_single(0.0, p), abs=1e-9)

    def test_vectorized(self):
        p = SinglePathParams(g0=10.0, tau_rise=1.0, tau_decay=2.0)
        t = np.array([-2.0, 0.0, 4.0])
        out = g2_single(t, p)
        assert out.shape == (3,)
        assert out[1] == pytest.approx(10.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            SinglePathParams(g0=0.0, tau_rise=1.0, tau_decay=1.0)
        with pytest.raises(ValueError):
            SinglePathParams(g0=1.0, tau_rise=-1.0, tau_decay=1.0)


class TestBeatModel:
    def test_single_path_limit(self):
        p = BeatModelParams(g0=5.0, tau_x=5.6, tau_y=13.1, r=0.0, phi=0.0,
                            background=2.0)
        for dt in (0.0, 1.0, 7.3, 20.0):
            expected = 25.0 * math.exp(-dt / 5.6) + 2.0
            assert g2_beats(dt, p) == pytest.approx(expected, rel=1e-12)

    def test_background_only_before_zero(self):
        p = BeatModelParams(g0=5.0, tau_x=5.6, tau_y=13.1, r=1.0, phi=0.3,
                            background=4.5)
        assert g2_beats(-0.001, p) == 4.5
        assert g2_beats(-30.0, p) == 4.5

    def test_minima_spacing_equals_beat_period(self):
        model = FIGURE_PRESETS["fig3"].model
        f = lambda t: g2_beats(t, model)
        t = np.linspace(0.5, 28.0, 28000)
        v = f(t)
        minima = []
        for i in range(1, len(t) - 1):
            if v[i] < v[i - 1] and v[i] < v[i + 1]:
                res = minimize_scalar(f, bracket=(t[i - 1], t[i], t[i + 1]))
                minima.append(res.x)
        spacings = np.diff(minima)
        assert len(spacings) >= 4
        assert np.max(np.abs(spacings - 2 * math.pi / model.delta)) < 0.05

    def test_damped_regime_contrast(self):
        model = FIGURE_PRESETS["fig4a"].model
        contrast = beat_contrast(model)
        assert contrast == pytest.approx(2 * model.r / (1 + model.r**2), abs=1e-15)
        assert contrast <= 0.06

    def test_antiphase_regimes(self):
        b = FIGURE_PRESETS["fig4b"].model
        c = FIGURE_PRESETS["fig4c"].model
        assert math.cos(b.phi) > 0 and math.cos(c.phi) < 0
        # cosine terms at dt = 0+ have opposite sign
        cos_b = g2_beats(0.0, b) - b.g0**2 * (1 + b.r**2) - b.background
        cos_c = g2_beats(0.0, c) - c.g0**2 * (1 + c.r**2) - c.background
        assert cos_b > 0 > cos_c


class TestAmplitudeOracle:
    def test_identity_on_random_parameters(self):
        rng = np.random.default_rng(44)
        for _ in range(1000):
            p = random_beat_params(rng)
            dt = rng.uniform(-10.0, 40.0)
            omega = rng.uniform(0.0, 10.0)
            a = g2_beats(dt, p)
            b = g2_beats_from_amplitudes(dt, p, omega_idler=omega)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_background_before_zero(self):
        p = BeatModelParams(g0=2.0, tau_x=3.0, tau_y=7.0, r=0.5, phi=0.1,
                            background=3.3)
        assert g2_beats_from_amplitudes(-5.0, p) == 3.3

    def test_complete_destructive_interference(self):
        p = BeatModelParams(g0=3.0, tau_x=4.0, tau_y=4.0, r=1.0, phi=math.pi,
                            delta=1.0, background=0.7)
        assert g2_beats_from_amplitudes(0.0, p) == pytest.approx(0.7, abs=1e-12)
        assert g2_beats(0.0, p) == pytest.approx(0.7, abs=1e-12)


class TestSimulateHistogram:
    def test_vanishing_amplitude_gives_empty_histogram(self):
        model = SinglePathParams(g0=1e-12, tau_rise=3.0, tau_decay=5.0)
        hist = simulate_histogram(model, 1.0, (-10.0, 20.0), seed=1)
        assert np.all(hist.counts == 0)

    def test_bin_means_match_law_of_large_numbers(self):
        model = SinglePathParams(g0=200.0, tau_rise=3.1, tau_decay=5.6,
                                 background=4.0)
        mu = _bin_means(lambda t: g2_single(t, model), -10.0, 30, 1.0)
        acc = np.zeros_like(mu)
        n_seeds = 100
        for seed in range(n_seeds):
            acc += simulate_histogram(model, 1.0, (-10.0, 20.0), seed=seed).counts
        mean = acc / n_seeds
        tol = 5.0 * np.sqrt(mu / n_seeds) + 1e-9
        assert np.all(np.abs(mean - mu) <= tol)

    def test_seeded_determinism(self):
        model = FIGURE_PRESETS["fig3"].model
        a = simulate_histogram(model, 0.25, (-5.0, 30.0), seed=5)
        b = simulate_histogram(model, 0.25, (-5.0, 30.0), seed=5)
        assert np.array_equal(a.counts, b.counts)

    def test_requires_at_least_8_subsamples(self):
        model = FIGURE_PRESETS["fig2x"].model
        with pytest.raises(ValueError):
            simulate_histogram(model, 1.0, (-5.0, 5.0), seed=0, subsamples=4)

    def test_bin_averaging_differs_from_center_evaluation(self):
        # with 1 ns bins and a 5.6 ns decay, center evaluation is biased
        model = SinglePathParams(g0=1000.0, tau_rise=3.1, tau_decay=5.6)
        mu = _bin_means(lambda t: g2_single(t, model), 0.0, 10, 1.0)
        centers = np.arange(10) + 0.5
        center_vals = g2_single(centers, model)
        assert np.max(np.abs(mu - center_vals) / center_vals) > 1e-3


class TestConvolveJitter:
    def test_zero_sigma_is_identity(self):
        f = lambda t: g2_single(t, FIGURE_PRESETS["fig2x"].model)
        assert convolve_jitter(f, 0.0) is f

    def test_gaussian_bump_oracle(self):
        amp, center, width, sigma = 7.0, 5.0, 2.0, 1.3
        bump = lambda t: amp * np.exp(-((np.asarray(t, float) - center) ** 2)
                                      / (2 * width**2))
        conv = convolve_jitter(bump, sigma)
        t = np.linspace(-40.0, 60.0, 40001)
        widened = math.sqrt(width**2 + sigma**2)
        exact = amp * width / widened * np.exp(-((t - center) ** 2) / (2 * widened**2))
        assert np.max(np.abs(conv(t) - exact)) < 1e-7
        # total integral preserved
        mass = np.trapezoid(conv(t), t)
        assert mass == pytest.approx(amp * width * math.sqrt(2 * math.pi), rel=1e-6)

    def test_beat_contrast_attenuation(self):
        model = FIGURE_PRESETS["fig3"].model
        period = 2 * math.pi / model.delta
        f = lambda t: g2_beats(t, model)

        def envelope(t):
            t = np.asarray(t, float)
            pos = np.maximum(t, 0.0)
            shape = model.g0**2 * (
                np.exp(-pos / model.tau_x) + model.r**2 * np.exp(-pos / model.tau_y)
            )
            return np.where(t >= 0.0, shape, 0.0) + model.background

        def oscillation_amplitude(fn, env_fn):
            t = np.linspace(period, 3 * period, 4001)
            vals = np.asarray(fn(t)) - np.asarray(env_fn(t))
            return abs(np.trapezoid(vals * np.exp(-1j * model.delta * t), t))

        base = oscillation_amplitude(f, envelope)
        previous = math.inf
        for sigma in (0.04, 0.5, 1.0):
            conv = convolve_jitter(f, sigma)
            conv_env = convolve_jitter(envelope, sigma)
            amp = oscillation_amplitude(conv, conv_env)
            ratio = amp / base
            oracle = math.exp(-model.delta**2 * sigma**2 / 2)
            assert ratio == pytest.approx(oracle, rel=0.05)
            assert amp < previous
            previous = amp

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            convolve_jitter(lambda t: t, -0.1)


def noiseless_histogram(model, bin_width, t_range) -> CoincidenceHistogram:
    t_lo, t_hi = t_range
    n_bins = int(round((t_hi - t_lo) / bin_width))
    if isinstance(model, SinglePathParams):
        fn = lambda t: g2_single(t, model)
    else:
        fn = lambda t: g2_beats(t, model)
    mu = _bin_means(fn, t_lo, n_bins, bin_width)
    return CoincidenceHistogram(bin_width, t_lo, mu)


class TestFitSingle:
    def test_noiseless_exact_recovery(self):
        truth = SinglePathParams(g0=1500.0, tau_rise=3.1, tau_decay=5.6,
                                 background=8.0)
        hist = noiseless_histogram(truth, 1.0, (-25.0, 50.0))
        init = SinglePathParams(g0=1000.0, tau_rise=2.0, tau_decay=8.0,
                                background=2.0)
        fit = fit_single(hist, init)
        assert fit.params.g0 == pytest.approx(truth.g0, rel=1e-6)
        assert fit.params.tau_rise == pytest.approx(truth.tau_rise, rel=1e-6)
        assert fit.params.tau_decay == pytest.approx(truth.tau_decay, rel=1e-6)
        assert fit.params.background == pytest.approx(truth.background, rel=1e-6)
        assert fit.chi2_reduced < 1e-12

    @pytest.mark.parametrize(
        "tau_rise,tau_decay,t_max,reported_sigma",
        [(3.1, 5.6, 50.0, 0.1), (3.3, 13.1, 75.0, 0.2)],
    )
    def test_recovers_published_decay_constants(self, tau_rise, tau_decay, t_max,
                                                reported_sigma):
        truth = SinglePathParams(g0=2000.0, tau_rise=tau_rise, tau_decay=tau_decay,
                                 background=10.0)
        hist = simulate_histogram(truth, 1.0, (-25.0, t_max), seed=3)
        fit = fit_single(hist, estimate_single_init(hist))
        assert fit.params.tau_decay == pytest.approx(tau_decay, rel=0.02)
        assert fit.params.tau_rise == pytest.approx(tau_rise, rel=0.15)
        # reported 1-sigma is the same order as the published uncertainty
        assert reported_sigma / 10 <= fit.sigmas["tau_decay"] <= reported_sigma * 10

    def test_histogram_must_cover_zero(self):
        truth = SinglePathParams(g0=100.0, tau_rise=3.0, tau_decay=5.0)
        hist = noiseless_histogram(truth, 1.0, (5.0, 40.0))
        with pytest.raises(ValueError):
            fit_single(hist, truth)

    def test_flat_histogram_is_degenerate(self):
        rng = np.random.default_rng(5)
        flat = CoincidenceHistogram(1.0, -20.0, rng.poisson(50.0, size=50))
        init = SinglePathParams(g0=10.0, tau_rise=2.0, tau_decay=5.0,
                                background=40.0)
        with pytest.raises(FitDegenerateError):
            fit_single(flat, init)

    def test_fit_offset_recovers_shift(self):
        truth = SinglePathParams(g0=1500.0, tau_rise=3.1, tau_decay=5.6,
                                 background=8.0)
        shift = 0.7
        hist = noiseless_histogram(truth, 1.0, (-25.0, 50.0))
        shifted = CoincidenceHistogram(1.0, hist.t_start + shift, hist.counts)
        fit = fit_single(shifted, truth, fit_offset=True)
        assert fit.offset == pytest.approx(shift, abs=1e-6)
        assert fit.params.tau_decay == pytest.approx(5.6, rel=1e-6)

    def test_scale_equivariance(self):
        truth = SinglePathParams(g0=500.0, tau_rise=3.1, tau_decay=5.6,
                                 background=10.0)
        hist = simulate_histogram(truth, 1.0, (-25.0, 50.0), seed=21)
        scaled = CoincidenceHistogram(1.0, hist.t_start, hist.counts * 4)
        fit1 = fit_single(hist, truth)
        init4 = SinglePathParams(g0=2000.0, tau_rise=3.1, tau_decay=5.6,
                                 background=40.0)
        fit4 = fit_single(scaled, init4)
        assert fit4.params.g0 == pytest.approx(4 * fit1.params.g0, rel=1e-6)
        assert fit4.params.background == pytest.approx(
            4 * fit1.params.background, rel=1e-5
        )
        assert abs(fit4.params.tau_decay - fit1.params.tau_decay) <= fit1.sigmas[
            "tau_decay"
        ]


class TestFitBeats:
    def test_recovers_amplitude_scale(self):
        preset = FIGURE_PRESETS["fig3"]
        hist = simulate_histogram(preset.model, preset.bin_width, preset.t_range,
                                  seed=11)
        fit = fit_beats(hist, preset.model)
        assert fit.params.g0 == pytest.approx(preset.model.g0, rel=0.03)
        assert fit.converged

    def test_unlocked_delta_recovers_beat_frequency(self):
        preset = FIGURE_PRESETS["fig3"]
        hist = simulate_histogram(preset.model, preset.bin_width, preset.t_range,
                                  seed=11)
        fit = fit_beats(hist, preset.model, free=("g0", "background", "delta"))
        assert 2 * math.pi / fit.params.delta == pytest.approx(
            2 * math.pi / preset.model.delta, abs=preset.bin_width
        )

    def test_r_zero_consistent_with_single_path_fit(self):
        truth = SinglePathParams(g0=900.0, tau_rise=3.1, tau_decay=5.6,
                                 background=10.0)
        hist = simulate_histogram(truth, 0.5, (-20.0, 50.0), seed=17)
        single = fit_single(hist, estimate_single_init(hist))
        positive = slice_histogram(hist, 0.0, 50.0)
        base = BeatModelParams(g0=30.0, tau_x=6.0, tau_y=13.1, r=0.0, phi=0.0,
                               background=5.0)
        beats = fit_beats(positive, base, free=("g0", "background", "tau_x"))
        sigma = math.hypot(single.sigmas["tau_decay"], beats.sigmas["tau_x"])
        assert abs(beats.params.tau_x - single.params.tau_decay) <= sigma

    def test_null_signal_amplitude_consistent_with_zero(self):
        model = BeatModelParams(g0=1e-9, tau_x=5.6, tau_y=13.1, r=1.0, phi=0.0,
                                background=20.0)
        hist = simulate_histogram(model, 0.25, (-5.0, 30.0), seed=9)
        init = BeatModelParams(g0=3.0, tau_x=5.6, tau_y=13.1, r=1.0, phi=0.0,
                               background=15.0)
        fit = fit_beats(hist, init)
        assert fit.params.g0**2 <= 2 * fit.sigmas["g0_squared"]

    def test_requires_three_beat_periods(self):
        model = FIGURE_PRESETS["fig3"].model
        hist = simulate_histogram(model, 0.25, (-2.0, 8.0), seed=2)
        with pytest.raises(ValueError):
            fit_beats(hist, model)

    def test_scale_equivariance(self):
        preset = FIGURE_PRESETS["fig3"]
        hist = simulate_histogram(preset.model, preset.bin_width, preset.t_range,
                                  seed=23)
        scaled = CoincidenceHistogram(preset.bin_width, hist.t_start,
                                      hist.counts * 9)
        fit1 = fit_beats(hist, preset.model)
        from dataclasses import replace

        fit9 = fit_beats(scaled, replace(preset.model, g0=3 * preset.model.g0,
                                         background=9 * preset.model.background))
        assert fit9.params.g0**2 == pytest.approx(9 * fit1.params.g0**2, rel=1e-6)
        assert fit9.params.background == pytest.approx(
            9 * fit1.params.background, rel=1e-5
        )

    def test_unknown_free_parameter_rejected(self):
        model = FIGURE_PRESETS["fig3"].model
        hist = simulate_histogram(model, 0.25, (-5.0, 30.0), seed=2)
        with pytest.raises(ValueError):
            fit_beats(hist, model, free=("g0", "wavelength"))


class TestHistogramCsv:
    def test_round_trip(self, tmp_path):
        hist = simulate_histogram(FIGURE_PRESETS["fig2x"].model, 1.0, (-25.0, 50.0),
                                  seed=4)
        path = tmp_path / "hist.csv"
        write_histogram_csv(hist, path, comments=["seed: 4"])
        back = read_histogram_csv(path)
        assert back.bin_width == hist.bin_width
        assert back.t_start == hist.t_start
        assert np.array_equal(back.counts, hist.counts)

    def test_bad_value_names_line_and_field(self, tmp_path):
        path = tmp_path / "hist.csv"
        path.write_text("bin_start_ns,counts\n0.0,5\n1.0,oops\n")
        with pytest.raises(HistogramFileError) as err:
            read_histogram_csv(path)
        assert err.value.line == 3
        assert err.value.fieldname == "counts"

    def test_nonuniform_bins_rejected(self, tmp_path):
        path = tmp_path / "hist.csv"
        path.write_text("bin_start_ns,counts\n0.0,5\n1.0,6\n3.0,7\n")
        with pytest.raises(HistogramFileError):
            read_histogram_csv(path)


class TestSliceHistogram:
    def test_keeps_requested_window(self):
        hist = simulate_histogram(FIGURE_PRESETS["fig2x"].model, 1.0, (-10.0, 20.0),
                                  seed=1)
        part = slice_histogram(hist, 0.0, 10.0)
        assert part.t_start == pytest.approx(0.0)
        assert part.n_bins == 10

    def test_too_narrow_rejected(self):
        hist = simulate_histogram(FIGURE_PRESETS["fig2x"].model, 1.0, (-10.0, 20.0),
                                  seed=1)
        with pytest.raises(ValueError):
            slice_histogram(hist, 0.0, 0.5)


class TestPresets:
    def test_all_figures_present(self):
        assert set(FIGURE_PRESETS) == {"fig2x", "fig2y", "fig3", "fig4a", "fig4b",
                                       "fig4c"}

    def test_published_parameters(self):
        assert FIGURE_PRESETS["fig2x"].model.tau_decay == 5.6
        assert FIGURE_PRESETS["fig2x"].model.tau_rise == 3.1
        assert FIGURE_PRESETS["fig2y"].model.tau_decay == 13.1
        assert FIGURE_PRESETS["fig4a"].model.r == 2.86e-2
        assert FIGURE_PRESETS["fig4a"].model.phi == math.pi
        assert FIGURE_PRESETS["fig4b"].model.r == 1.43
        assert FIGURE_PRESETS["fig4b"].model.phi == 0.0
        assert FIGURE_PRESETS["fig4c"].model.r == 0.5
        assert FIGURE_PRESETS["fig4c"].model.phi == math.pi
        for preset in FIGURE_PRESETS.values():
            if isinstance(preset.model, BeatModelParams):
                assert preset.model.delta == DEFAULT_DELTA
                assert preset.model.tau_x == 5.6
                assert preset.model.tau_y == 13.1

    def test_beat_presets_span_three_periods(self):
        for name in ("fig3", "fig4a", "fig4b", "fig4c"):
            preset = FIGURE_PRESETS[name]
            span = preset.t_range[1] - max(preset.t_range[0], 0.0)
            assert span >= 3 * 2 * math.pi / preset.model.delta
