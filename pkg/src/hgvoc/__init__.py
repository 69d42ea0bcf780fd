"""hgvoc: a source-filter neural vocoder.

Acoustic features (mel frames, F0 track, voicing flags) drive an additive
harmonic oscillator plus a shaped-noise generator; the resulting excitation
is filtered by a dilated convolution network and a learned output FIR.
Training uses multi-resolution spectral losses, optionally combined with
multi-scale adversarial and feature-matching losses.
"""

__version__ = "0.1.0"
