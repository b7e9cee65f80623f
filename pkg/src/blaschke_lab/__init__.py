"""Numerical laboratory for Blaschke product cocycles.

Submodules: ``blaschke`` (single products), ``cocycle`` (driving systems,
coefficient fields, stability), ``transfer`` (transfer-operator matrices and
Lyapunov spectra), ``geometry`` (phi map, metrics, perturbations),
``prevalence`` (unstable perturbation sets), ``presets`` and ``cli``.
"""

__version__ = "0.1.0"
