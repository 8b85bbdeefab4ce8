"""Travelling waves of a reaction-diffusion-mutation model with nonlocal competition.

Modules: ``grid`` (discretisations), ``spectral`` (minimal speed), ``slab``
(bounded travelling-wave problem), ``evolution`` (time-dependent model),
``analysis`` (diagnostics) and ``cli``.
"""

__version__ = "0.1.0"
