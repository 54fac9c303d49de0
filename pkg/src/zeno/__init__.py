"""Survival of a measured quantum state under randomly timed measurements.

Subpackages of interest: :mod:`zeno.liouville` (superoperators),
:mod:`zeno.renewal` (measurement statistics), :mod:`zeno.analytic`
(Laplace-domain engine), :mod:`zeno.montecarlo` (trajectory engine) and
:mod:`zeno.cli` (experiment runner).
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0+unknown"
