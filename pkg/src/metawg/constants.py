"""Physical constants (SI, CODATA 2018 exact values where defined)."""

C_LIGHT = 2.99792458e8
PLANCK = 6.62607015e-34
HBAR = PLANCK / (2.0 * 3.141592653589793)
E_CHARGE = 1.602176634e-19
PHI0 = PLANCK / (2.0 * E_CHARGE)
