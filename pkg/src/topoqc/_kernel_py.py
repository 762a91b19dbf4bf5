"""Pure numpy evolution kernel (fallback when the extension is absent).

Contract shared with the compiled kernel: evolve |000><000| through a
list of full 8x8 gate matrices, applying after each gate the
replacement depolarizing channel on the qubits named by a bitmask
(mask 0 or eps 0 means no channel).
"""
from __future__ import annotations

import numpy as np

_DIM = 8

# (mask, eps) -> 64x64 channel superoperator, cached; the experiment
# drivers only ever use a handful of distinct pairs
_CHANNELS: dict[tuple[int, float], np.ndarray] = {}


def _channel_matrix(mask: int, eps: float) -> np.ndarray:
    qubits = [q for q in range(3) if (mask >> q) & 1]
    d = np.zeros((_DIM * _DIM, _DIM * _DIM), dtype=complex)
    w = 1.0 / (2 ** len(qubits))
    for r in range(_DIM):
        for c in range(_DIM):
            col = np.zeros((_DIM, _DIM), dtype=complex)
            col[r, c] = 1.0 - eps
            if all(((r >> q) & 1) == ((c >> q) & 1) for q in qubits):
                keep = ~mask & (_DIM - 1)
                r0, c0 = r & keep, c & keep
                for f in range(2 ** len(qubits)):
                    add = 0
                    for l, q in enumerate(qubits):
                        add |= ((f >> l) & 1) << q
                    col[r0 | add, c0 | add] += eps * w
            d[:, r * _DIM + c] = col.reshape(-1)
    return d


def _channel(mask: int, eps: float) -> np.ndarray:
    key = (mask, eps)
    if key not in _CHANNELS:
        _CHANNELS[key] = _channel_matrix(mask, eps)
    return _CHANNELS[key]


def apply_circuit(mats: np.ndarray, masks: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Evolve from |000><000| through gates with per-gate noise.

    mats: (n, 8, 8) complex gate matrices, masks: (n,) int bitmasks of
    channel qubits, eps: (n,) channel probabilities.
    """
    rho = np.zeros((_DIM, _DIM), dtype=complex)
    rho[0, 0] = 1.0
    for u, mask, e in zip(mats, masks, eps):
        rho = u @ rho @ u.conj().T
        if e > 0.0 and mask:
            rho = (_channel(int(mask), float(e)) @ rho.reshape(-1)).reshape(_DIM, _DIM)
    return rho
