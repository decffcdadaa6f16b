"""
Time-correlation histograms of a single decay path
==================================================

Each decay path shows an asymmetric coincidence histogram: an exponential
rise set by the filter response and an exponential decay set by the path's
coherence time.  Simulate histograms at the published parameters and
recover the time constants by a Poisson-weighted fit.
"""

from biphoton import timecorr as tc

for name in ("fig2x", "fig2y"):
    preset = tc.FIGURE_PRESETS[name]
    model = preset.model
    print(f"preset {name}: tau_rise = {model.tau_rise} ns, "
          f"tau_decay = {model.tau_decay} ns")

    hist = tc.simulate_histogram(model, preset.bin_width, preset.t_range, seed=3)
    print(f"  simulated {hist.n_bins} bins of {hist.bin_width} ns, "
          f"peak {int(hist.counts.max())} counts")

    # initial values are estimated from the histogram moments
    init = tc.estimate_single_init(hist)
    fit = tc.fit_single(hist, init)
    p, s = fit.params, fit.sigmas
    print(f"  fitted tau_rise  = {p.tau_rise:6.2f} +- {s['tau_rise']:.2f} ns")
    print(f"  fitted tau_decay = {p.tau_decay:6.2f} +- {s['tau_decay']:.2f} ns")
    print(f"  reduced chi^2 = {fit.chi2_reduced:.2f} over {fit.n_dof} dof\n")

# The model evaluated at a few delays, for orientation: the curve peaks at
# zero delay and is continuous there.
model = tc.FIGURE_PRESETS["fig2x"].model
for dt in (-6.2, -3.1, 0.0, 5.6, 11.2):
    print(f"g2({dt:+5.1f} ns) = {tc.g2_single(dt, model):8.1f} counts/bin")
