"""Time the compiled density-matrix kernel against the numpy fallback.

The workload is the hot loop of a noisy measurement sweep: the real
and imaginary Hadamard-test circuits for every x-direction link of a
mesh row, transpiled to elementary gates and evolved with the
replacement depolarizing channel after each one.

Usage: python3 benchmarks/bench_kernel.py [--repeats N] [--eps1 X]
"""
import argparse
import importlib
import time

import numpy as np

from topoqc import sim
from topoqc.circuit import (build_controlled_evolution, build_hadamard_test,
                            build_state_prep, transpile)
from topoqc.invariants import MeshGrid
from topoqc.model import Band, ModelParams


def _lower(circuit, noise):
    n = len(circuit.gates)
    mats = np.zeros((n, 8, 8), dtype=np.complex128)
    masks = np.zeros(n, dtype=np.int64)
    eps = np.zeros(n, dtype=np.float64)
    for idx, g in enumerate(circuit.gates):
        mats[idx] = sim._embedded(g)
        if len(g.qubits) == 1:
            masks[idx] = 1 << g.qubits[0]
            eps[idx] = noise.eps1
        else:
            masks[idx] = (1 << g.qubits[0]) | (1 << g.qubits[1])
            eps[idx] = noise.eps2
    return mats, masks, eps


def _workload(eps1):
    mesh = MeshGrid(8, 8)
    params = ModelParams(mu=1.9)
    noise = sim.NoiseModel(eps1=eps1)
    jobs = []
    for i in range(mesh.n_kx):
        k1 = mesh.point(i, 3)
        k2 = mesh.point(*mesh.neighbor(i, 3, 0))
        prep = build_state_prep(k1, Band.MINUS, params)
        evo = build_controlled_evolution(k1, k2, Band.MINUS, Band.MINUS, params)
        for part in ("real", "imag"):
            t = transpile(build_hadamard_test(prep, evo, part))
            jobs.append(_lower(t, noise))
    return jobs


def _time(kernel, jobs, repeats):
    out = []
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = [kernel.apply_circuit(*job) for job in jobs]
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--eps1", type=float, default=0.008)
    args = ap.parse_args()

    jobs = _workload(args.eps1)
    gates = len(jobs[0][0])
    print(f"workload: {len(jobs)} circuits, {gates} elementary gates each, "
          f"eps1={args.eps1}")

    py = importlib.import_module("topoqc._kernel_py")
    t_py, rho_py = _time(py, jobs, args.repeats)
    print(f"python kernel: {t_py * 1e3:8.1f} ms  "
          f"({t_py / len(jobs) * 1e3:.2f} ms/circuit)")

    try:
        cy = importlib.import_module("topoqc._kernel")
    except ImportError:
        print("compiled kernel not built; skipping comparison")
        return
    t_cy, rho_cy = _time(cy, jobs, args.repeats)
    print(f"cython kernel: {t_cy * 1e3:8.1f} ms  "
          f"({t_cy / len(jobs) * 1e3:.2f} ms/circuit)")

    dev = max(np.max(np.abs(a - b)) for a, b in zip(rho_py, rho_cy))
    print(f"speedup: {t_py / t_cy:.1f}x, max |delta rho| = {dev:.2e}")


if __name__ == "__main__":
    main()
