"""Certified gluing of chart-wise germ data at finite jet order.

The package provides exact (rational) jet arithmetic, certified region
calculus over polydiscs and tube domains, cover-shrinking constructions that
produce a glued atlas with a Hausdorff certificate, gluing of sheaf data
given by transition matrices, checks for flat-connection structures with a
pairing, and a deterministic JSON command line front end.
"""

from __future__ import annotations

__version__ = "0.1.0"
