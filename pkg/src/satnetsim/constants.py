"""Physical constants shared across the simulator (SI units)."""

EARTH_RADIUS_M = 6_371_000.0
EARTH_MU_M3_S2 = 3.986004418e14
EARTH_ROTATION_RAD_S = 7.2921159e-5
SPEED_OF_LIGHT_M_S = 2.99792458e8
BOLTZMANN_J_K = 1.380649e-23
