"""Quantum Fisher information, optimal observables and estimation for the BCS/Ising fermion chain."""

from .model import ModelParams
from .qfi import QfiReport

__all__ = ["ModelParams", "QfiReport"]
__version__ = "0.1.0"
