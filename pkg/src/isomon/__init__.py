"""Discrete isomonodromic deformations of Fuchsian systems.

Library layout:

* :mod:`isomon.linear_core` - dense complex LU / eigen utilities;
* :mod:`isomon.linear_systems` - systems, factored realizations, Riemann schemes;
* :mod:`isomon.spectral` - spectral-type combinatorics and degeneration graphs;
* :mod:`isomon.transforms` - additions, Moebius maps, Laplace transform, separation;
* :mod:`isomon.garnier` - the discrete two-variable Garnier dynamics;
* :mod:`isomon.monodromy` - numerical monodromy representations;
* :mod:`isomon.cli` - command-line frontend.
"""

from . import errors
from .linear_core import Normalization, eigen_sorted, lu_decompose
from .linear_systems import (
    FactoredSystem,
    RationalSystem,
    RiemannScheme,
    fuchs_check,
    realize_factored,
    riemann_scheme,
    spectral_type,
)
from .spectral import SpectralType, parse_spectral_type

__all__ = [
    "errors",
    "Normalization",
    "lu_decompose",
    "eigen_sorted",
    "RationalSystem",
    "FactoredSystem",
    "RiemannScheme",
    "realize_factored",
    "riemann_scheme",
    "spectral_type",
    "fuchs_check",
    "SpectralType",
    "parse_spectral_type",
]

__version__ = "0.1.0"
