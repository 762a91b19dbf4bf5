"""Topological diagnostics assembled from mesh link overlaps.

Plaquette-based lattice Chern number with its integer gauge field, Zak
phase profiles with winding extraction, and the ensemble geometric
phase for thermal link products. Overlap fields come from the analytic
oracle, from simulated circuits, or from a replayed CSV recording.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import Band, BAND_INDEX, MomentumPoint

DIRECTION_INDEX = {"x": 0, "y": 1}

DEFAULT_MODULUS_FLOOR = 0.05
INTEGER_TOLERANCE = 0.01
ADMISSIBILITY_MARGIN = 0.1
AMBIGUITY_MARGIN = 0.2


class DegenerateLink(ValueError):
    """Raw link magnitude below the modulus floor (phase unreliable)."""


class NotQuantized(ValueError):
    """Plaquette sum too far from an integer; data is corrupted."""


class AmbiguousWinding(ValueError):
    """A profile increment sits too close to the wrap boundary."""


@dataclass(frozen=True)
class MeshGrid:
    """Uniform Brillouin-zone torus mesh, k_i = -pi + 2 pi i / n."""

    n_kx: int = 8
    n_ky: int = 8

    def __post_init__(self):
        if self.n_kx < 2 or self.n_ky < 2:
            raise ValueError("mesh needs at least 2 points per direction")

    def kxs(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n_kx) / self.n_kx

    def kys(self) -> np.ndarray:
        return -np.pi + 2 * np.pi * np.arange(self.n_ky) / self.n_ky

    def point(self, i: int, j: int) -> MomentumPoint:
        return MomentumPoint(float(self.kxs()[i % self.n_kx]),
                             float(self.kys()[j % self.n_ky]))

    def neighbor(self, i: int, j: int, direction: int) -> tuple[int, int]:
        if direction == 0:
            return (i + 1) % self.n_kx, j
        return i, (j + 1) % self.n_ky


@dataclass
class OverlapField:
    """Per-link complex overlap estimates on the torus.

    raw[i, j, d, a, b] estimates <Psi_a(k_ij)|Psi_b(k_ij + delta_d)>
    with d in {0: x, 1: y} and band indices 0 = plus, 1 = minus.
    Entries never measured stay NaN. energies[i, j] optionally carries
    E_plus(k_ij) for thermal-weight constructions.
    """

    mesh: MeshGrid
    raw: np.ndarray
    modulus_floor: float = DEFAULT_MODULUS_FLOOR
    energies: Optional[np.ndarray] = None

    def __post_init__(self):
        expect = (self.mesh.n_kx, self.mesh.n_ky, 2, 2, 2)
        if self.raw.shape != expect:
            raise ValueError(f"raw field shape {self.raw.shape} != {expect}")

    def raw_link(self, i: int, j: int, direction: int,
                 band_bra=Band.MINUS, band_ket=Band.MINUS) -> complex:
        a, b = BAND_INDEX[Band(band_bra)], BAND_INDEX[Band(band_ket)]
        return complex(self.raw[i % self.mesh.n_kx, j % self.mesh.n_ky,
                                direction, a, b])

    def normalized(self, i: int, j: int, direction: int,
                   band_bra=Band.MINUS, band_ket=Band.MINUS) -> complex:
        u = self.raw_link(i, j, direction, band_bra, band_ket)
        mag = abs(u)
        if not (mag >= self.modulus_floor) or mag == 0.0:
            raise DegenerateLink(
                f"link ({i},{j},{'xy'[direction]}) magnitude {mag:.4g} "
                f"below floor {self.modulus_floor}")
        return u / mag


@dataclass
class ChernResult:
    C: int
    F: np.ndarray           # per-plaquette field values, purely imaginary
    n: np.ndarray           # per-plaquette integers
    admissible: bool
    residual: float


@dataclass
class ZakProfile:
    phi: np.ndarray          # one phase in (-pi, pi] per ky row
    winding: Optional[int] = None


@dataclass
class EGPProfile:
    phiE: np.ndarray
    beta: float
    n_L: int
    winding: Optional[int] = None


def _principal_angle(z: complex) -> float:
    a = float(np.angle(z))
    if a == -np.pi:  # tie at the branch cut maps to +pi
        a = np.pi
    return a


def wrap_angle(x: float) -> float:
    """Wrap into (-pi, pi]."""
    a = (-x + np.pi) % (2 * np.pi) - np.pi
    return -a


def _plaquette_links(U: OverlapField, i: int, j: int):
    ux0 = U.normalized(i, j, 0)
    uy1 = U.normalized(i + 1, j, 1)
    ux1 = U.normalized(i, j + 1, 0)
    uy0 = U.normalized(i, j, 1)
    return ux0, uy1, ux1, uy0


def plaquette_field(U: OverlapField, plaquette) -> complex:
    """Principal-branch log of the four-link plaquette holonomy at (i, j).

    Purely imaginary; Im in (-pi, pi].
    """
    i, j = plaquette
    ux0, uy1, ux1, uy0 = _plaquette_links(U, i, j)
    return 1j * _principal_angle(ux0 * uy1 / ux1 / uy0)


def _field_data(U: OverlapField, integer_tolerance: float):
    nx, ny = U.mesh.n_kx, U.mesh.n_ky
    F = np.zeros((nx, ny), dtype=complex)
    n = np.zeros((nx, ny), dtype=int)
    for i in range(nx):
        for j in range(ny):
            ux0, uy1, ux1, uy0 = _plaquette_links(U, i, j)
            f = _principal_angle(ux0 * uy1 / ux1 / uy0)
            F[i, j] = 1j * f
            nv = (f - _principal_angle(ux0) + _principal_angle(ux1)
                  - _principal_angle(uy1) + _principal_angle(uy0)) / (2 * np.pi)
            if abs(nv - round(nv)) >= integer_tolerance:
                raise NotQuantized(
                    f"plaquette ({i},{j}) branch count {nv:.4f} not integer")
            n[i, j] = int(round(nv))
    return F, n


def chern(U: OverlapField, mesh: Optional[MeshGrid] = None,
          integer_tolerance: float = INTEGER_TOLERANCE,
          admissibility_margin: float = ADMISSIBILITY_MARGIN) -> ChernResult:
    """Lattice Chern number of the minus band from the link field."""
    if mesh is not None and mesh != U.mesh:
        raise ValueError("mesh does not match the overlap field")
    F, n = _field_data(U, integer_tolerance)
    total = float(np.sum(F.imag)) / (2 * np.pi)
    c = int(round(total))
    residual = abs(total - c)
    if residual >= integer_tolerance:
        raise NotQuantized(f"plaquette sum {total:.6f} not an integer")
    admissible = bool(np.max(np.abs(F)) < np.pi - admissibility_margin)
    return ChernResult(C=c, F=F, n=n, admissible=admissible, residual=residual)


def integer_field(U: OverlapField, mesh: Optional[MeshGrid] = None,
                  integer_tolerance: float = INTEGER_TOLERANCE) -> np.ndarray:
    """Per-plaquette integer branch counts; sums to the Chern number."""
    if mesh is not None and mesh != U.mesh:
        raise ValueError("mesh does not match the overlap field")
    _, n = _field_data(U, integer_tolerance)
    return n


def zak_phase(U: OverlapField, ky: int) -> float:
    """Im log of the normalized link product around the kx loop at row ky."""
    prod = 1.0 + 0.0j
    for i in range(U.mesh.n_kx):
        prod *= U.normalized(i, ky, 0)
    return _principal_angle(prod)


def zak_winding(profile, ambiguity_margin: float = AMBIGUITY_MARGIN) -> int:
    """Integer winding of a closed phase profile over the ky loop.

    Increments are wrapped into (-pi, pi]; any increment within
    ambiguity_margin of the wrap boundary raises AmbiguousWinding.
    """
    phis = np.asarray(profile.phi if isinstance(profile, ZakProfile) else profile,
                      dtype=float)
    total = 0.0
    for j in range(len(phis)):
        inc = wrap_angle(phis[(j + 1) % len(phis)] - phis[j])
        if abs(inc) > np.pi - ambiguity_margin:
            raise AmbiguousWinding(
                f"increment {inc:.3f} at row {j} too close to the branch cut")
        total += inc
    return int(round(-total / (2 * np.pi)))


def egp(link_matrices: OverlapField, beta: float, ky: int) -> float:
    """Ensemble geometric phase of the thermal link product at row ky.

    Accumulates prod_i exp(-B_i) L_i over the kx loop, with
    B = diag(beta E_plus, beta E_minus) and L_i the full 2x2 band
    overlap matrix of link i, then returns Im log det(1 + M).
    Every factor is rescaled by exp(beta E_plus) with the log of the
    prefactor tracked separately, so arbitrarily large beta is exact.
    """
    U = link_matrices
    if U.energies is None:
        raise ValueError("overlap field carries no band energies")
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = U.mesh.n_kx
    m_tilde = np.eye(2, dtype=complex)
    log_q = 0.0
    logdet_mag = 0.0
    det_arg = 0.0
    det_zero = False
    for i in range(n):
        L = np.array(U.raw[i, ky % U.mesh.n_ky, 0], dtype=complex)
        if not np.all(np.isfinite(L)):
            raise DegenerateLink(f"link matrix ({i},{ky},x) incomplete")
        e = float(U.energies[i, ky % U.mesh.n_ky]) * beta
        m_tilde = m_tilde @ (np.diag([np.exp(-2.0 * e), 1.0]) @ L)
        log_q += e
        d = complex(np.linalg.det(L))
        if abs(d) == 0.0:
            det_zero = True
        else:
            logdet_mag += -2.0 * e + np.log(abs(d))
            det_arg += float(np.angle(d))
    tr = m_tilde[0, 0] + m_tilde[1, 1]
    terms = [(0.0, 0.0)]
    if abs(tr) > 0.0:
        terms.append((log_q + float(np.log(abs(tr))), float(np.angle(tr))))
    if not det_zero:
        terms.append((2.0 * log_q + logdet_mag, det_arg))
    m_max = max(m for m, _ in terms)
    total = sum(np.exp(m - m_max) * np.exp(1j * a) for m, a in terms)
    return float(np.angle(total))


# ---------------------------------------------------------------------------
# CSV replay interface

_CSV_HEADER = ["i", "j", "direction", "band_bra", "band_ket", "re", "im"]


def save_overlap_csv(U: OverlapField, path) -> None:
    """Write every measured (finite) link entry as one CSV row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CSV_HEADER)
        for i in range(U.mesh.n_kx):
            for j in range(U.mesh.n_ky):
                for d, dname in ((0, "x"), (1, "y")):
                    for a, aname in ((0, "plus"), (1, "minus")):
                        for b, bname in ((0, "plus"), (1, "minus")):
                            v = U.raw[i, j, d, a, b]
                            if np.isnan(v):
                                continue
                            w.writerow([i, j, dname, aname, bname,
                                        repr(float(v.real)), repr(float(v.imag))])


def load_overlap_csv(path, mesh: Optional[MeshGrid] = None,
                     modulus_floor: float = DEFAULT_MODULUS_FLOOR) -> OverlapField:
    """Rebuild an overlap field from a recorded CSV.

    Columns: i, j, direction (x|y), band_bra, band_ket (plus|minus),
    re, im. Absent links stay NaN and surface as DegenerateLink when a
    diagnostic touches them. The mesh is inferred from the largest
    indices when not given.
    """
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != _CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        for row in r:
            if not row:
                continue
            i, j = int(row[0]), int(row[1])
            d = DIRECTION_INDEX[row[2].strip()]
            a = BAND_INDEX[Band(row[3].strip())]
            b = BAND_INDEX[Band(row[4].strip())]
            rows.append((i, j, d, a, b, float(row[5]), float(row[6])))
    if mesh is None:
        if not rows:
            raise ValueError("empty overlap CSV and no mesh given")
        mesh = MeshGrid(max(r[0] for r in rows) + 1, max(r[1] for r in rows) + 1)
    raw = np.full((mesh.n_kx, mesh.n_ky, 2, 2, 2), np.nan, dtype=complex)
    for i, j, d, a, b, re, im in rows:
        raw[i, j, d, a, b] = re + 1j * im
    return OverlapField(mesh=mesh, raw=raw, modulus_floor=modulus_floor)
