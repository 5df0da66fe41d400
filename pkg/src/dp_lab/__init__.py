"""Numerical laboratory for peakon trains of the Degasperis-Procesi equation."""

from .grid import Grid, GridFunction, GridMismatchError, differentiate, integrate
from .peakons import Peakon, PeakonTrain

__all__ = ["Grid", "GridFunction", "GridMismatchError", "Peakon", "PeakonTrain", "differentiate", "integrate"]
