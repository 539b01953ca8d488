"""Hitting times, recurrence and multifractal spectra for piecewise-linear Markov maps."""

__version__ = "0.1.0"

from .markov_map import Branch, Covering, Cylinder, InvalidMapError, MarkovMap, ValidationReport, validate
from .thermo import GibbsModel, Potential, SpectrumCurve, eta, alpha, extremes, normalize, pressure, spectrum

__all__ = [
    "Branch", "Covering", "Cylinder", "GibbsModel", "InvalidMapError", "MarkovMap", "Potential",
    "SpectrumCurve", "ValidationReport", "alpha", "eta", "extremes", "normalize", "pressure",
    "spectrum", "validate", "__version__",
]
