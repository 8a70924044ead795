"""Timing harness for the step kernels.

Runs one workload through the compiled core and the pure NumPy
fallback, first at the kernel layer on pregenerated noise and then end
to end through ``run_ensemble``.  Outputs are checked for bitwise
agreement before any time is reported, so a speedup never comes from a
diverging code path.

    python3 benchmarks/bench_kernels.py --paths 512 --steps 1000
"""

import argparse
import time

import numpy as np

from conespde import ConeSpec, DiagonalSemigroup, SimConfig, StateVec
from conespde.coefficients import (
    CoefficientSet,
    ConstantMap,
    MeanReversionMap,
    ProportionalMap,
)
from conespde.kernels import BACKEND, plan, step_ensemble
from conespde.simulate import NoiseSpec, run_ensemble

DIM = 16


def build_system() -> tuple[CoefficientSet, DiagonalSemigroup, ConeSpec]:
    drift = MeanReversionMap(1.0, np.full(DIM, 0.5))
    vols = tuple(ProportionalMap(0.3, j, DIM) for j in range(8))
    jumps = ((0.2, ConstantMap(np.full(DIM, 0.1))),)
    return (
        CoefficientSet(drift, vols, jumps),
        DiagonalSemigroup(np.arange(1.0, DIM + 1.0)),
        ConeSpec([1] * DIM),
    )


def timed(repeats: int, fn):
    out = fn()
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return out, best


def same_outputs(a: dict, b: dict) -> bool:
    keys = ("final", "min_margin", "first_exit", "diverged")
    return all(np.array_equal(a[k], b[k]) for k in keys)


def bench_kernel(coeffs, sg, cone, paths, steps, repeats):
    sp = plan.make_plan(
        dim=DIM,
        dt=1e-3,
        drift=coeffs.drift.lower(),
        vols=tuple(c.lower() for c in coeffs.vol_columns),
        atoms=tuple(g.lower() for _, g in coeffs.jump_atoms),
        rates=sg.rates,
        q_eigenvalues=np.ones(8),
        atom_weights=coeffs.jump_weights,
        signs=cone.signs.astype(np.float64),
        exit_tol=1e-8,
        guard=1e12,
    )
    rng = np.random.default_rng(0)
    normals = rng.standard_normal((paths, steps, 8))
    counts = rng.poisson(sp.atom_wdt, size=(paths, steps, 1)).astype(np.int64)
    r0 = np.ones((paths, DIM))

    results = {}
    for backend in ("compiled", "fallback"):
        out, secs = timed(
            repeats,
            lambda b=backend: step_ensemble(sp, r0.copy(), normals, counts, backend=b),
        )
        results[backend] = (out, secs)
    return results


def bench_ensemble(coeffs, sg, cone, paths, steps, repeats):
    noise = NoiseSpec.flat(8, seed=0)
    config = SimConfig(dt=1e-3, horizon=steps * 1e-3, paths=paths)
    h0 = StateVec(np.ones(DIM))

    results = {}
    for backend in ("compiled", "fallback"):
        out, secs = timed(
            repeats,
            lambda b=backend: run_ensemble(coeffs, sg, noise, cone, config, h0, backend=b),
        )
        results[backend] = (out, secs)
    return results


def report(title: str, results, parity: bool) -> None:
    print(f"\n{title}")
    for backend in ("compiled", "fallback"):
        print(f"  {backend:<9} {results[backend][1]:7.3f} s")
    ratio = results["fallback"][1] / results["compiled"][1]
    tag = "outputs bitwise identical" if parity else "OUTPUTS DIFFER"
    print(f"  speedup   {ratio:6.1f}x   ({tag})")


def main() -> None:
    ap = argparse.ArgumentParser(description="Compare the compiled and fallback step kernels.")
    ap.add_argument("--paths", type=int, default=512)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if BACKEND != "compiled":
        raise SystemExit(
            "compiled core not built in this environment; nothing to compare "
            "(unset CONE_SPDE_FORCE_PYTHON and reinstall to build it)"
        )

    coeffs, sg, cone = build_system()
    print(
        f"dim {DIM}, 8 noise columns, 1 jump atom; "
        f"{args.paths} paths x {args.steps} steps, best of {args.repeats}"
    )

    res = bench_kernel(coeffs, sg, cone, args.paths, args.steps, args.repeats)
    report(
        "step kernels (pregenerated noise)",
        res,
        same_outputs(res["compiled"][0], res["fallback"][0]),
    )

    res = bench_ensemble(coeffs, sg, cone, args.paths, args.steps, args.repeats)
    ens_a, ens_b = res["compiled"][0], res["fallback"][0]
    parity = (
        np.array_equal(ens_a.final, ens_b.final)
        and np.array_equal(ens_a.min_margin, ens_b.min_margin)
        and np.array_equal(ens_a.first_exit, ens_b.first_exit)
    )
    report("full ensemble (noise generation + stepping)", res, parity)


if __name__ == "__main__":
    main()
