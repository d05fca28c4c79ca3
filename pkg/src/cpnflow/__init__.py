"""Symplectic singular values, the pinching quadratic form on symmetric 3-tensors,
pinching arithmetic, and an equivariant mean curvature flow on S^2 x S^2."""

__version__ = "0.1.0"
