"""Numerical laboratory for rigid inclusions in thin Kirchhoff-Love plates.

Subpackages and modules:

``platelab.geometry``
    Outer boundaries, star-shaped inclusions, set distances, region masks.
``platelab.material``
    Isotropic plate tensors with variable Lamé coefficients.
``platelab.solver``
    Cut-cell B-spline Galerkin solver for the clamped-inclusion plate problem.
``platelab.boundary_data``
    Traces on the measurement arc and the affine-gauge misfit.
``platelab.inversion``
    Derivative-free reconstruction of the inclusion from traces.
``platelab.stability``
    Sweeps of inclusion pairs, the logarithmic-law fit and local field checks.
``platelab.cli``
    The ``platelab`` command.
"""

__version__ = "0.1.0"
