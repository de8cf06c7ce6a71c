"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--threads 1] [--json out.json]

Times the three hot kernels on Liouville dimensions 4 to 64 and two full
optimizations, and checks that both backends agree.
"""
import argparse
import json
import math
import time

import numpy as np

from openkrotov import _kernels
from openkrotov.core import commutator_superop
from openkrotov.dynamics import ControlField, TimeGrid
from openkrotov.functionals import BasisStrategy, Gate, StateToState
from openkrotov.krotov import KrotovOptions, krotov_iterate
from openkrotov.models import build_model
from openkrotov.core import projector


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases():
    rng = np.random.default_rng(0)
    for name, params, n_states in [
        ("TwoLevelDephasing", {}, 1),
        ("LambdaDecay", {}, 3),
        ("TwoQubitDephasing", {"gamma_phi": 1e-3}, 3),
        ("AnharmonicLadder", {"n_levels": 8, "gamma": 0.01}, 3),
    ]:
        gen = build_model(name, **params)
        n = gen.dim**2
        samples = 0.3 * rng.normal(size=(gen.n_controls, 500))
        rho0 = np.zeros((n_states, n), dtype=complex)
        rho0[:, 0] = 1.0
        sigma = rho0.copy()
        cmts = np.array([commutator_superop(h) for h in gen.controls])
        yield f"{name} (d^2={n}, M={n_states}, N=500)", gen, samples, rho0, sigma, cmts


def bench_kernels(repeat, threads):
    rows = []
    backends = {"python": _kernels.get_backend("python"), "compiled": _kernels.get_backend("compiled")}
    for label, gen, samples, rho0, sigma, cmts in kernel_cases():
        l0, lcs, dt = gen.drift_superop(), gen.control_superops(), 0.01
        shape = np.ones(samples.shape[1])
        row = {"case": label}
        outputs = {}
        for bname, mod in backends.items():
            tf, (states, props) = best_of(lambda: mod.forward(l0, lcs, samples, dt, rho0, num_threads=threads), repeat)
            tb, costates = best_of(lambda: mod.backward(props, sigma, num_threads=threads), repeat)
            ts, swept = best_of(
                lambda: mod.sweep(l0, lcs, cmts, samples, shape, 1.0, math.inf, costates, rho0, dt, num_threads=threads),
                repeat,
            )
            row[bname] = {"forward": tf, "backward": tb, "sweep": ts}
            outputs[bname] = (states, costates, swept[2])
        row["max_abs_difference"] = float(
            max(np.max(np.abs(a - b)) for a, b in zip(outputs["python"], outputs["compiled"]))
        )
        rows.append(row)
    return rows


def bench_optimizations(repeat):
    qubit = build_model("TwoLevelDephasing", gamma_phi=1e-3)
    grid = TimeGrid(5.0, 500)
    guess = ControlField(grid, 0.1 * np.sin(np.pi * grid.control_times / 5.0) ** 2)
    flip = StateToState(projector(0, 2), projector(1, 2))
    two_q = build_model("TwoQubitDephasing", gamma_phi=1e-4)
    grid2 = TimeGrid(10.0, 500)
    s = 0.2 * np.sin(np.pi * grid2.control_times / 10.0) ** 2
    cnot = np.eye(4)[[0, 1, 3, 2]]
    cases = [
        ("qubit transfer", qubit, flip, guess, KrotovOptions(max_iterations=500, fidelity_goal=0.995)),
        ("CNOT, reduced basis", two_q, Gate(cnot, BasisStrategy.REDUCED3), ControlField(grid2, [s, s]),
         KrotovOptions(lambda_a=0.3, max_iterations=500, fidelity_goal=0.99)),
    ]
    rows = []
    active = _kernels._impl
    try:
        for label, gen, obj, g, opts in cases:
            row = {"case": label}
            for bname in ("python", "compiled"):
                _kernels._impl = _kernels.get_backend(bname)
                t, record = best_of(lambda: krotov_iterate(gen, obj, g, opts), repeat)
                row[bname] = {"seconds": t, "iterations": record.n_iterations, "fidelity": record.final_fidelity}
            rows.append(row)
    finally:
        _kernels._impl = active
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--json", help="also write the raw timings here")
    args = parser.parse_args()

    kernels = bench_kernels(args.repeat, args.threads)
    print(f"{'case':<44} {'kernel':<9} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8}")
    for row in kernels:
        for k in ("forward", "backward", "sweep"):
            py, c = row["python"][k], row["compiled"][k]
            print(f"{row['case']:<44} {k:<9} {1e3 * py:12.2f} {1e3 * c:14.2f} {py / c:8.1f}")
        print(f"{'':<44} max |python - compiled| = {row['max_abs_difference']:.1e}")
    opt = bench_optimizations(args.repeat)
    print()
    print(f"{'optimization':<24} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'iterations':>11} {'F (both)':>22}")
    for row in opt:
        py, c = row["python"], row["compiled"]
        print(
            f"{row['case']:<24} {py['seconds']:11.3f} {c['seconds']:13.3f} {py['seconds'] / c['seconds']:8.1f} "
            f"{c['iterations']:11d} {py['fidelity']:.8f}/{c['fidelity']:.8f}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": kernels, "optimizations": opt, "threads": args.threads}, fh, indent=2)


if __name__ == "__main__":
    main()
