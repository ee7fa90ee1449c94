"""
Soliton compression in a short fibre
====================================

A 130 fs sech pulse at 14.1 pJ carries more energy than the fundamental
soliton of the calibrated fibre, so it narrows over the first metre.
"""

import numpy as np

from fibresqueeze.nlse import calibrated_fibre, fundamental_soliton_energy, propagate
from fibresqueeze.pulse import PulseSpec, TimeGrid, autocorrelation, fwhm, make_pulse, spectrum

grid = TimeGrid(4096, 20.0)
fibre = calibrated_fibre()
spec = PulseSpec(energy=14.1)

print("fundamental soliton energy: %.2f pJ" % fundamental_soliton_energy(fibre, spec.t0))

pulse = make_pulse(spec, grid)
out = propagate(pulse, fibre)

# Intensity widths, then what an autocorrelator would report.
print("fwhm in : %.1f fs" % (1e3 * fwhm(grid.t, pulse.power)))
print("fwhm out: %.1f fs" % (1e3 * fwhm(grid.t, out.power)))
delay, trace_out = autocorrelation(out)
print("autocorrelation fwhm out: %.1f fs" % (1e3 * fwhm(delay, trace_out)))

# The spectrum broadens as the pulse compresses.
spec_in, spec_out = spectrum(pulse), spectrum(out)
for name, s in (("in", spec_in), ("out", spec_out)):
    print("spectral fwhm %-3s: %.2f rad/ps" % (name, fwhm(s.omega, np.abs(s.samples) ** 2)))
