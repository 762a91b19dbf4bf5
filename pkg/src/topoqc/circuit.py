"""Gate-level IR and circuit builders for 3-qubit overlap interferometry.

Qubit roles are fixed: qubit 0 is the ancilla, qubit 1 the f mode and
qubit 2 the g mode. Indexing is little endian, basis state index
i = b0 + 2 b1 + 4 b2. Multi-qubit gates list controls first, target
last; the listed order maps to local bit positions low to high.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import Band, BlochAngles, ModelParams, bloch_angles

ANCILLA, QF, QG = 0, 1, 2

# kind -> (qubit count, angle count)
GATE_KINDS = {
    "x": (1, 0),
    "h": (1, 0),
    "sdag": (1, 0),
    "u3": (1, 3),
    "cnot": (2, 0),
    "cu3": (2, 3),
    "ccx": (3, 0),
    "ccu3": (3, 3),
    "cxx": (3, 0),
}

ELEMENTARY = ("u3", "cnot")


class UnsupportedGate(ValueError):
    """Gate kind outside the IR (or not transpilable)."""


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UnsupportedGate(f"unknown gate kind {self.kind!r}")
        nq, na = GATE_KINDS[self.kind]
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if len(self.qubits) != nq or len(set(self.qubits)) != nq:
            raise ValueError(f"{self.kind} needs {nq} distinct qubits")
        if len(self.angles) != na:
            raise ValueError(f"{self.kind} needs {na} angles")
        if not all(np.isfinite(self.angles)):
            raise ValueError("gate angles must be finite")


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.width:
                raise ValueError(f"gate {g} exceeds width {self.width}")


X2 = np.array([[0, 1], [1, 0]], dtype=complex)
H2 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SDAG2 = np.array([[1, 0], [0, -1j]], dtype=complex)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c]])


def _controlled(u: np.ndarray, n_controls: int) -> np.ndarray:
    """Add controls on the low local bits; u acts on the highest bit."""
    dim = 2 ** (n_controls + 1)
    out = np.eye(dim, dtype=complex)
    active = dim // 2  # all control bits set, target bit varies
    sel = (2 ** n_controls) - 1
    out[sel, sel] = u[0, 0]
    out[sel, sel + active] = u[0, 1]
    out[sel + active, sel] = u[1, 0]
    out[sel + active, sel + active] = u[1, 1]
    return out


CNOT4 = _controlled(X2, 1)


def _cxx_matrix() -> np.ndarray:
    # control on local bit 0, X on local bits 1 and 2
    out = np.zeros((8, 8), dtype=complex)
    for i in range(8):
        j = i ^ 0b110 if i & 1 else i
        out[j, i] = 1.0
    return out


CXX8 = _cxx_matrix()


def gate_matrix(g: Gate) -> np.ndarray:
    """Local matrix of the gate on its own qubits (low bit = qubits[0])."""
    if g.kind == "x":
        return X2
    if g.kind == "h":
        return H2
    if g.kind == "sdag":
        return SDAG2
    if g.kind == "u3":
        return u3_matrix(*g.angles)
    if g.kind == "cnot":
        return CNOT4
    if g.kind == "cu3":
        return _controlled(u3_matrix(*g.angles), 1)
    if g.kind == "ccx":
        return _controlled(X2, 2)
    if g.kind == "ccu3":
        return _controlled(u3_matrix(*g.angles), 2)
    if g.kind == "cxx":
        return CXX8
    raise UnsupportedGate(g.kind)


def embed(mat: np.ndarray, qubits, width: int) -> np.ndarray:
    """Expand a local gate matrix to the full 2^width register."""
    dim = 2 ** width
    out = np.zeros((dim, dim), dtype=complex)
    m = len(qubits)
    rest = [q for q in range(width) if q not in qubits]
    for a in range(2 ** m):
        for b in range(2 ** m):
            v = mat[a, b]
            if v == 0:
                continue
            for r in range(2 ** len(rest)):
                row = col = 0
                for l, q in enumerate(qubits):
                    row |= ((a >> l) & 1) << q
                    col |= ((b >> l) & 1) << q
                for l, q in enumerate(rest):
                    bit = (r >> l) & 1
                    row |= bit << q
                    col |= bit << q
                out[row, col] = v
    return out


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Compose the gate matrices in program order."""
    u = np.eye(2 ** c.width, dtype=complex)
    for g in c.gates:
        u = embed(gate_matrix(g), g.qubits, c.width) @ u
    return u


# ---------------------------------------------------------------------------
# builders

def prep_unitary(angles: BlochAngles) -> tuple[Gate, ...]:
    """Band-rotation network on the system qubits.

    Acts as the identity on |00> and |11> and as the 2x2 rotation
    [[cos t/2, -sin t/2 e^{i phi}], [sin t/2 e^{-i phi}, cos t/2]]
    on the single-excitation pair {|1_f 0_g>, |0_f 1_g>}, taking the
    occupation basis states to the band states at the given angles.
    """
    th, ph = angles
    return (Gate("cnot", (QG, QF)),
            Gate("cu3", (QF, QG), (th, -ph, ph)),
            Gate("cnot", (QG, QF)))


def build_state_prep(k, band, p: ModelParams) -> Circuit:
    """X into the band's occupation state, then the band rotation."""
    occ = QF if Band(band) is Band.PLUS else QG
    gates = (Gate("x", (occ,)),) + prep_unitary(bloch_angles(k, p))
    return Circuit(3, gates)


def _principal_sqrt(u: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 unitary, eigenphases halved."""
    tr = u[0, 0] + u[1, 1]
    det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
    disc = np.sqrt(tr * tr - 4 * det + 0j)
    l1, l2 = (tr + disc) / 2, (tr - disc) / 2

    def rt(l):
        return np.exp(0.5j * np.angle(l))

    if abs(l1 - l2) < 1e-12:
        return rt(l1) * np.eye(2)
    p1 = (u - l2 * np.eye(2)) / (l1 - l2)
    p2 = (u - l1 * np.eye(2)) / (l2 - l1)
    return rt(l1) * p1 + rt(l2) * p2


def _u3_with_phase(u: np.ndarray) -> tuple[float, float, float, float]:
    """Factor a 2x2 unitary as e^{i alpha} U3(theta, phi, lam)."""
    a00 = abs(u[0, 0])
    th = 2 * np.arccos(np.clip(a00, 0.0, 1.0))
    alpha = np.angle(u[0, 0]) if a00 > 1e-12 else 0.0
    s = np.sin(th / 2)
    ph = np.angle(u[1, 0] * np.exp(-1j * alpha)) if s > 1e-12 else 0.0
    lam = np.angle(-u[0, 1] * np.exp(-1j * alpha)) if s > 1e-12 else \
        np.angle(u[1, 1] * np.exp(-1j * alpha))
    return float(alpha), float(th), float(ph), float(lam)


def _controlled_gate(c: int, t: int, u: np.ndarray) -> tuple[Gate, ...]:
    """Controlled version of an arbitrary 2x2 unitary as phase + CU3."""
    alpha, th, ph, lam = _u3_with_phase(u)
    return (Gate("u3", (c,), (0.0, 0.0, alpha)),
            Gate("cu3", (c, t), (th, ph, lam)))


def ccu3_decomposition(theta: float, phi: float, lam: float,
                       qubits: tuple[int, int, int] = (0, 1, 2)) -> tuple[Gate, ...]:
    """Doubly-controlled U3 as the five-gate square-root network.

    [CW(q1->q2), CNOT(q0->q1), CW^dag(q1->q2), CNOT(q0->q1), CW(q0->q2)]
    with W the principal square root of the U3 matrix, W^2 = U.
    """
    q0, q1, q2 = qubits
    w = _principal_sqrt(u3_matrix(theta, phi, lam))
    wd = w.conj().T
    return (_controlled_gate(q1, q2, w)
            + (Gate("cnot", (q0, q1)),)
            + _controlled_gate(q1, q2, wd)
            + (Gate("cnot", (q0, q1)),)
            + _controlled_gate(q0, q2, w))


def _controlled_band_rotation(angles: BlochAngles, dagger: bool) -> tuple[Gate, ...]:
    # ancilla-controlled version of prep_unitary: the outer CNOTs gain
    # the ancilla control (CCX), the CU3 becomes CCU3
    th, ph = angles
    th = -th if dagger else th
    return (Gate("ccx", (ANCILLA, QG, QF)),
            Gate("ccu3", (ANCILLA, QF, QG), (th, -ph, ph)),
            Gate("ccx", (ANCILLA, QG, QF)))


def build_controlled_evolution(k_from, k_to, band_from, band_to,
                               p: ModelParams) -> Circuit:
    """Ancilla-controlled map from Psi_band_from(k_from) to Psi_band_to(k_to).

    Un-rotates the k_from band basis, hops the occupation state when the
    band changes (controlled X on both system qubits), then rotates into
    the k_to band basis. Identity on the system when the ancilla is |0>.
    """
    gates = _controlled_band_rotation(bloch_angles(k_from, p), dagger=True)
    if Band(band_from) is not Band(band_to):
        gates = gates + (Gate("cxx", (ANCILLA, QF, QG)),)
    gates = gates + _controlled_band_rotation(bloch_angles(k_to, p), dagger=False)
    return Circuit(3, gates)


def build_hadamard_test(prep: Circuit, evolution: Circuit, part: str) -> Circuit:
    """Assemble the full interference circuit.

    prep; H(ancilla); controlled evolution; [Sdag(ancilla) if imag];
    H(ancilla). The ancilla Z expectation of the result equals the real
    or imaginary part of the evolved-state overlap.
    """
    if part not in ("real", "imag"):
        raise ValueError(f"part must be 'real' or 'imag', got {part!r}")
    gates = tuple(prep.gates) + (Gate("h", (ANCILLA,)),) + tuple(evolution.gates)
    if part == "imag":
        gates = gates + (Gate("sdag", (ANCILLA,)),)
    gates = gates + (Gate("h", (ANCILLA,)),)
    return Circuit(3, gates)


# ---------------------------------------------------------------------------
# transpilation to the {u3, cnot} basis

def _cu3_elementary(c: int, t: int, th: float, ph: float, lam: float) -> list[Gate]:
    # standard two-CNOT ABC decomposition
    return [Gate("u3", (c,), (0.0, 0.0, (lam + ph) / 2)),
            Gate("u3", (t,), (0.0, 0.0, (lam - ph) / 2)),
            Gate("cnot", (c, t)),
            Gate("u3", (t,), (-th / 2, 0.0, -(ph + lam) / 2)),
            Gate("cnot", (c, t)),
            Gate("u3", (t,), (th / 2, ph, 0.0))]


_FIXED_U3 = {
    "x": (np.pi, 0.0, np.pi),
    "h": (np.pi / 2, 0.0, np.pi),
    "sdag": (0.0, 0.0, -np.pi / 2),
}


def _expand(g: Gate) -> list[Gate]:
    if g.kind in ELEMENTARY:
        return [g]
    if g.kind in _FIXED_U3:
        return [Gate("u3", g.qubits, _FIXED_U3[g.kind])]
    if g.kind == "cu3":
        return _cu3_elementary(*g.qubits, *g.angles)
    if g.kind == "ccx":
        return _expand_all(ccu3_decomposition(np.pi, 0.0, np.pi, g.qubits))
    if g.kind == "ccu3":
        return _expand_all(ccu3_decomposition(*g.angles, g.qubits))
    if g.kind == "cxx":
        c, t1, t2 = g.qubits
        return [Gate("cnot", (c, t1)), Gate("cnot", (c, t2))]
    raise UnsupportedGate(g.kind)


def _expand_all(gates) -> list[Gate]:
    out = []
    for g in gates:
        out.extend(_expand(g))
    return out


def transpile(c: Circuit) -> Circuit:
    """Rewrite every gate into the {u3, cnot} basis.

    Preserves the composed unitary up to a global phase.
    """
    return Circuit(c.width, tuple(_expand_all(c.gates)))


def cnot_count(c: Circuit) -> int:
    return sum(1 for g in c.gates if g.kind == "cnot")


def circuit_to_json(c: Circuit) -> str:
    """Debug export: one record per gate with kind, qubits, angles."""
    recs = [{"kind": g.kind, "qubits": list(g.qubits), "angles": list(g.angles)}
            for g in c.gates]
    return json.dumps({"width": c.width, "gates": recs}, indent=2)
