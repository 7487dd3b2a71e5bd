"""Vibronic spectra from a hybrid boson-sampling / classical-sampling pipeline.

Modules
-------
model       molecular model, units, Duschinsky relation
doktorov    dimensionless map and its SVD parameterization
focksim     truncated Fock-space simulator and boson-sampling draws
signs       closed-form 1-D overlaps and the product sign rule
anharmonic  per-mode eigensolver for the final potentials
sampling    classical (v_m, v_f) pair sampling and completeness
spectrum    line assembly and Gaussian broadening
oracle      brute-force references for small systems
cli         model files and the end-to-end pipeline
"""
__version__ = "0.1.0"
