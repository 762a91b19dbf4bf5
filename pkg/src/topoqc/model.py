"""Chiral p-wave BdG model on the square lattice.

Two-band Bloch Hamiltonian

    H(k) = delta sin(ky) sx + delta sin(kx) sy - [t (cos kx + cos ky) + mu] sz

with the Bloch-sphere angles and closed-form band states used by the
circuit builders, plus an analytic overlap oracle for ground truth.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

GAP_TOLERANCE = 1e-9

# sin(pi) evaluates to ~1.22e-16 in floats; below this both sine
# components are treated as exactly zero for the phi convention.
_SIN_ZERO = 1e-15


class GapClosed(ValueError):
    """The band gap vanishes at the requested momentum."""


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the Hamiltonian. t and delta must be positive."""

    t: float = 1.0
    delta: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if self.t <= 0 or self.delta <= 0:
            raise ValueError("t and delta must be positive")


class MomentumPoint(NamedTuple):
    kx: float
    ky: float


class BlochAngles(NamedTuple):
    theta: float  # polar angle in [0, pi]
    phi: float    # azimuthal angle in [0, 2 pi)


class Band(str, enum.Enum):
    PLUS = "plus"    # conduction band, energy +E
    MINUS = "minus"  # valence band, energy -E


# integer tags used in seed tuples and field array indexing
BAND_INDEX = {Band.PLUS: 0, Band.MINUS: 1}


def _mass(k, p: ModelParams) -> float:
    kx, ky = k
    return p.t * (np.cos(kx) + np.cos(ky)) + p.mu


def hamiltonian(k, p: ModelParams) -> np.ndarray:
    """2x2 Bloch Hamiltonian at momentum k. Hermitian and traceless."""
    kx, ky = k
    return (p.delta * np.sin(ky) * SX
            + p.delta * np.sin(kx) * SY
            - _mass(k, p) * SZ)


def spectrum(k, p: ModelParams) -> tuple[float, float]:
    """Band energies (E_plus, E_minus) with E_minus = -E_plus."""
    kx, ky = k
    e = np.sqrt(p.delta ** 2 * (np.sin(kx) ** 2 + np.sin(ky) ** 2)
                + _mass(k, p) ** 2)
    return float(e), float(-e)


def bloch_angles(k, p: ModelParams, gap_tolerance: float = GAP_TOLERANCE) -> BlochAngles:
    """Bloch-sphere angles (theta, phi) of the band doublet at k.

    theta = arccos(m / E_plus) with m the sz coefficient; phi is the
    phase of the off-diagonal element, phi = atan2(sin kx, sin ky),
    fixed to 0 when both sines vanish (the state is a sz eigenstate
    there and phi is pure gauge).

    Raises GapClosed when E_plus < gap_tolerance.
    """
    e_plus, _ = spectrum(k, p)
    if e_plus < gap_tolerance:
        raise GapClosed(f"gap closed at k={tuple(k)}: E_plus={e_plus:.3e}")
    theta = float(np.arccos(np.clip(_mass(k, p) / e_plus, -1.0, 1.0)))
    kx, ky = k
    sx, sy = np.sin(kx), np.sin(ky)
    if abs(sx) < _SIN_ZERO and abs(sy) < _SIN_ZERO:
        phi = 0.0
    else:
        phi = float(np.arctan2(sx, sy)) % (2 * np.pi)
    return BlochAngles(theta, phi)


def eigenstate(k, band, p: ModelParams) -> np.ndarray:
    """Unit 2-vector of the requested band at k.

    plus  -> (cos t/2, sin t/2 e^{-i phi})
    minus -> (-sin t/2 e^{i phi}, cos t/2)
    """
    th, ph = bloch_angles(k, p)
    c, s = np.cos(th / 2), np.sin(th / 2)
    if Band(band) is Band.PLUS:
        return np.array([c, s * np.exp(-1j * ph)])
    return np.array([-s * np.exp(1j * ph), c])


def exact_overlap(k, k2, band_bra, band_ket, p: ModelParams) -> complex:
    """Analytic inner product <Psi_bra(k)|Psi_ket(k2)>."""
    return complex(np.vdot(eigenstate(k, band_bra, p),
                           eigenstate(k2, band_ket, p)))
