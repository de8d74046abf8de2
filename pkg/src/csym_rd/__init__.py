"""Q-conditional symmetries of reaction-diffusion systems: catalogue, certification, reductions, exact solutions and a finite-difference checker."""

__version__ = "0.1.0"
