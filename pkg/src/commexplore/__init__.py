"""Communication-aware Scout/Specialist exploration on 2D grids."""

__version__ = "0.1.0"
