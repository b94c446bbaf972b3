"""Numerical checks of gradient, Harnack and Hessian estimates for weighted
reaction-diffusion equations (L_f - q - ∂t) w = G(w) on flat tori."""

__version__ = "0.1.0"
