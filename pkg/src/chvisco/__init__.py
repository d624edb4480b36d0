"""Phase separation in viscoelastic solids: Cahn-Hilliard coupled to finite viscoelasticity.

Taylor-Hood velocity/pressure, P1 phase field, chemical potential, deformation
gradient and its dual stress variable, advanced in time by either an
implicit convex-splitting scheme or a linear decoupled scalar-auxiliary-variable
scheme. Both are energy stable for any time step.
"""

__version__ = "0.1.0"
