"""Fractional Ostrogradski mechanics: GL operators, symbolic Lagrangians, solvers and Gaussian kernels."""

from fracostro._types import FracOrder, SampledPath, UniformGrid
from fracostro.lagrangian_dsl import LagrangianSpec, parse, to_text
from fracostro.systems import damped_oscillator, harmonic_oscillator, pais_uhlenbeck

__version__ = "0.1.0"
