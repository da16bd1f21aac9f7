"""Physical constants (2018 CODATA), SI units."""

import math

ELEMENTARY_CHARGE = 1.602176634e-19  # C
ATOMIC_MASS = 1.66053906660e-27      # kg
EPSILON_0 = 8.8541878128e-12         # F/m

# Coulomb force constant 1/(4 pi eps0)
K_COULOMB = 1.0 / (4.0 * math.pi * EPSILON_0)
