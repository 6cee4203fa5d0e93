"""
pitchopt
========

Tire pitch sequence noise optimization.

The package models one-track tire profiles as sequences of pitch types,
computes their Fourier spectra and searches for the sequence whose loudest
harmonic is quietest: exhaustively (exact or approximated noise), through a
MILP model exported as an LP file, or with a genetic algorithm.
"""
from pitchopt._app import *
from pitchopt._enums import *
from pitchopt._errors import *

__version__ = "0.1.0"
