"""Certified Hausdorff dimension of real Julia-type limit sets.

The pipeline: branch systems expose certified inverse branches; a
Chebyshev collocation of the weighted composition operator produces a
positive candidate eigenfunction; adaptive interval bisection certifies
the min-max inequalities; an outer bisection drives the certified
bounds below the requested width and emits a replayable certificate.
"""

__version__ = "1.0.0"

from .balls import Ball  # noqa: F401
from .errors import DimcertError  # noqa: F401
