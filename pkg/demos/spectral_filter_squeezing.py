"""
Amplitude squeezing by spectral filtering
=========================================

Linearized quantum noise rides along with the classical pulse. After the
fibre, a knife edge removes one side of the spectrum and we compare the
photon-number noise of what is left against shot noise.
"""

from fibresqueeze.detection import default_cutoffs, squeezing_scan
from fibresqueeze.nlse import SolverConfig, calibrated_fibre
from fibresqueeze.pulse import PulseSpec, TimeGrid, make_pulse
from fibresqueeze.quantum import output_covariance, propagate_with_noise

grid = TimeGrid(256, 4.0)
pulse = make_pulse(PulseSpec(energy=15.8), grid)
out, smap = propagate_with_noise(pulse, calibrated_fibre(), SolverConfig(1e-2))
cov = output_covariance(smap)
print("symplectic error of the fibre map: %.1e" % smap.symplectic_error())

curve = squeezing_scan(out, cov, default_cutoffs(grid), energy_pj=15.8)
cut, depth = curve.minimum
print("best cutoff %.2f rad/ps gives %.2f dB" % (cut, depth))
print("window below -1 dB:", curve.windows(-1.0))

# Keeping everything gives back shot noise exactly.
print("all-pass: %.1e dB" % curve.ratio_db[0])
