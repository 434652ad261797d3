"""Mixed-dimensional thermo-hydro-mechanical simulator for fractured porous
media, with multi-point finite volumes and semismooth-Newton fracture contact.
"""

from mdthm.constitutive import DilationModel, MaterialSet

__all__ = ["DilationModel", "MaterialSet"]
__version__ = "0.1.0"
