"""trapcav: desk-scale model of a planar ion-trap array coupled to a cavity."""

__version__ = "0.1.0"

from .constants import IonSpecies, Transition, YB172, YB174, get_species
from .axial import AxialPotentialModel

__all__ = [
    "AxialPotentialModel",
    "IonSpecies",
    "Transition",
    "YB172",
    "YB174",
    "get_species",
    "__version__",
]
