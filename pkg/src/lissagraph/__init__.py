"""Quantum graphs with edge lengths moving on closed Lissajous curves.

Spectra, eigenstate moments, adiabatic geometric phases and direct
time-dependent propagation on the fixed scaled domain.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CFLWarning,
    ConfigError,
    DegenerateSpectrum,
    LissagraphError,
    NumericalError,
    TrackingLost,
)
from .graph import Edge, LissajousPath, MetricGraph, knot_polyline, sample_path, validate  # noqa: F401
from .phase import (  # noqa: F401
    allowed_orders,
    geometric_phase,
    ground_phase,
    leading_order_ground,
    recover_frequencies,
    third_order_ground,
)
from .spectral import find_roots, first_roots, track_levels  # noqa: F401
