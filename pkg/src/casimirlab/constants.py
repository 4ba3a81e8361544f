"""Physical constants (CODATA 2018 exact/recommended values)."""

from scipy import constants as _c

HBAR = _c.hbar                       # J s
HBAR_EV = _c.hbar / _c.e             # eV s, 6.582119569e-16
C = _c.c                             # m / s
K_B = _c.k                           # J / K
K_B_EV = _c.k / _c.e                 # eV / K

NM = 1e-9
MPA = 1e-3                           # millipascal in Pa


def ev_to_rad_per_s(energy_ev):
    """Photon energy in eV to angular frequency in rad/s."""
    return energy_ev / HBAR_EV
