"""Fractional p-sub-Laplacian toolkit on Carnot groups.

Subpackages: ``groups``/``sphere``/``grid`` (geometry), ``nonlocal_ops``
(kernel, seminorm, operator), ``hardy`` and ``inequalities`` (functional
inequality checks), ``eigen`` (first eigenpair) and ``experiments``/``cli``.
"""

__version__ = "0.1.0"
