"""Density-matrix simulator for 3-qubit circuits with depolarizing noise.

States are plain 8x8 complex ndarrays (Hermitian, trace 1, PSD). Noise
is the replacement channel applied after each elementary gate: eps1 on
the qubit of every single-qubit gate, eps2 on the pair of every CNOT.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .circuit import (Circuit, build_controlled_evolution, build_hadamard_test,
                      build_state_prep, embed, gate_matrix, transpile)
from .model import ModelParams

_WIDTH = 3
_DIM = 8


class UntranspiledCircuit(ValueError):
    """Noisy simulation requires the {u3, cnot} elementary basis."""


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing probabilities; eps2 defaults to 10 * eps1."""

    eps1: float = 0.0
    eps2: Optional[float] = None

    def __post_init__(self):
        if self.eps2 is None:
            object.__setattr__(self, "eps2", 10.0 * self.eps1)
        if not (0.0 <= self.eps1 <= 1.0 and 0.0 <= self.eps2 <= 1.0):
            raise ValueError("depolarizing probabilities must lie in [0, 1]")


NOISELESS = NoiseModel(0.0, 0.0)

# Gate -> embedded 8x8 matrix. Gates repeat heavily across the mesh
# (fixed rotations, shared momentum angles), so this trims the circuit
# assembly cost to a dict lookup per gate.
_EMBED_CACHE: dict = {}


def _embedded(g) -> np.ndarray:
    m = _EMBED_CACHE.get(g)
    if m is None:
        m = embed(gate_matrix(g), g.qubits, _WIDTH)
        _EMBED_CACHE[g] = m
    return m


@dataclass(frozen=True)
class ShotPlan:
    """Finite-shot readout: shot count and generator seed.

    seed may be an int or a tuple of ints (sub-seed path for
    reproducible experiment sweeps).
    """

    shots: int
    seed: object = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


def run(c: Circuit, noise: Optional[NoiseModel] = None) -> np.ndarray:
    """Evolve |000><000| through c; returns the final 8x8 density matrix.

    With nonzero noise every gate must be u3 or cnot; exact mode
    (eps1 = eps2 = 0) accepts the full IR.
    """
    noise = noise or NOISELESS
    noisy = noise.eps1 > 0 or noise.eps2 > 0
    if c.width != _WIDTH:
        raise ValueError("simulator is fixed at width 3")
    n = len(c.gates)
    mats = np.zeros((n, _DIM, _DIM), dtype=np.complex128)
    masks = np.zeros(n, dtype=np.int64)
    eps = np.zeros(n, dtype=np.float64)
    for idx, g in enumerate(c.gates):
        mats[idx] = _embedded(g)
        if len(g.qubits) == 1:
            masks[idx] = 1 << g.qubits[0]
            eps[idx] = noise.eps1
        elif g.kind == "cnot":
            masks[idx] = (1 << g.qubits[0]) | (1 << g.qubits[1])
            eps[idx] = noise.eps2
        elif noisy:
            raise UntranspiledCircuit(
                f"gate {g.kind} is not elementary; transpile before noisy runs")
    return backend.apply_circuit(mats, masks, eps)


def exact_expectation_Z(rho: np.ndarray, qubit: int) -> float:
    """Tr(rho Z_qubit)."""
    signs = 1.0 - 2.0 * ((np.arange(_DIM) >> qubit) & 1)
    return float(np.real(np.diag(rho) @ signs))


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, (int, np.integer)):
        entropy = int(seed)
    else:
        entropy = tuple(int(s) for s in seed)
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy))


def sample_z(z: float, plan: ShotPlan) -> float:
    """Binomial estimate of a Z expectation with true value z."""
    p = float(np.clip((1.0 + z) / 2.0, 0.0, 1.0))
    n_plus = _rng_from(plan.seed).binomial(plan.shots, p)
    return 2.0 * n_plus / plan.shots - 1.0


def sample_expectation_Z(rho: np.ndarray, qubit: int, plan: ShotPlan) -> float:
    """Finite-shot estimate of Tr(rho Z_qubit); deterministic per plan."""
    return sample_z(exact_expectation_Z(rho, qubit), plan)


def _sub_seed(seed, tag: int) -> tuple:
    if isinstance(seed, (int, np.integer)):
        return (int(seed), tag)
    return tuple(int(s) for s in seed) + (tag,)


def estimate_overlap(k_from, k_to, band_from, band_to, p: ModelParams,
                     noise: Optional[NoiseModel] = None,
                     plan: Optional[ShotPlan] = None) -> complex:
    """Hadamard-test estimate of <Psi_band_from(k_from)|Psi_band_to(k_to)>.

    Builds the real- and imaginary-part circuits, transpiles, runs with
    the given noise, and either returns exact ancilla expectations
    (plan None) or seeded finite-shot estimates (sub-seeds derived from
    plan.seed and the part index).
    """
    prep = build_state_prep(k_from, band_from, p)
    evolution = build_controlled_evolution(k_from, k_to, band_from, band_to, p)
    parts = []
    for idx, part in enumerate(("real", "imag")):
        c = transpile(build_hadamard_test(prep, evolution, part))
        rho = run(c, noise)
        if plan is None:
            parts.append(exact_expectation_Z(rho, 0))
        else:
            sub = ShotPlan(plan.shots, _sub_seed(plan.seed, idx))
            parts.append(sample_expectation_Z(rho, 0, sub))
    return complex(parts[0], parts[1])
