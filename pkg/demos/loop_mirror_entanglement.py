"""
Entanglement from two loop-mirror squeezers
===========================================

An unbalanced Sagnac loop squeezes the amplitude of its bright output.
Two such beams meeting on a 50:50 beamsplitter make an entangled pair;
the Duan sum drops below 4.
"""

from fibresqueeze.entanglement import combine_on_beamsplitter, duan_criterion, quadrature_correlations
from fibresqueeze.nlse import SolverConfig, calibrated_fibre
from fibresqueeze.nolm import NolmSpec, effective_single_mode, nolm_output
from fibresqueeze.pulse import PulseSpec, TimeGrid

grid = TimeGrid(256, 3.0)
cfg = SolverConfig(1e-2)

for energy, ratio in ((15.8, 0.95), (20.0, 0.9)):
    bright, cov = nolm_output(NolmSpec(calibrated_fibre(), PulseSpec(energy=energy), ratio), grid, cfg)
    mode = effective_single_mode(bright, cov)
    pair = combine_on_beamsplitter(mode, mode)
    corr = quadrature_correlations(pair)
    print("%.1f pJ, split %.2f: Var(X) %.3f, Duan %.3f, conditional variance %.3f"
          % (energy, ratio, mode.cov[0, 0], duan_criterion(pair).value, corr.cond_var_x))
