"""Path simulation for the jump-diffusion dynamics.

The scheme is exponential Euler: one step over ``dt`` evaluates all
coefficients at the current state, adds the scaled Gaussian and
compensated Poisson increments, and then applies the exact linear
flow:

    acc   = r + dt drift(r) + sum_j vol_j(r) sqrt(lam_j dt) xi_j
                          + sum_i jump_i(r) (count_i - w_i dt)
    r_new = exp(-c dt) * acc

Coefficient sets made of the built-in families are lowered to flat
descriptors and run through the stepping kernels (compiled when
available); anything else goes through a per-path engine with exactly
the same update arithmetic.

Monitoring is structural, not pathwise-absorbing: every path records
its minimum signed cone margin, the first step index at which the
margin dropped below ``-exit_tol`` (0 means the initial state), and
the first step at which the sup norm blew past the overflow guard.
Diverged paths freeze at their last finite state and keep their
statistics.

Reproducibility contract: path ``p`` of a run with master seed ``s``
draws from ``default_rng(SeedSequence(s, spawn_key=(p,)))``, normals
first, arrival counts second.  Ensembles are therefore independent of
chunking, and any single path can be regenerated in isolation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet
from .errors import ConfigError, DivergenceError, DomainError, ShapeError
from .kernels import plan as kplan
from .kernels import step_ensemble
from .semigroup import DiagonalSemigroup, LiminfGrid
from .space import ConeSpec, StateVec, cone_contains, cone_distance

__all__ = [
    "NoiseSpec",
    "SimConfig",
    "PathEnsemble",
    "simulate_path",
    "run_ensemble",
    "StabilityResult",
    "stability_experiment",
    "ssnc_estimate",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Driving noise: Q-Wiener eigenvalues per column plus master seed.

    ``eigenvalues[j]`` scales column ``j`` of the volatility; the trace
    ``sum(eigenvalues)`` is the total instantaneous noise intensity.
    """

    eigenvalues: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        if any(not lam > 0 for lam in self.eigenvalues):
            raise DomainError("noise eigenvalues must all be > 0")
        if self.seed < 0:
            raise DomainError("seed must be >= 0")

    @classmethod
    def dyadic(cls, count: int, seed: int = 0) -> "NoiseSpec":
        """Summable default: ``lam_j = 2^-j`` for ``j = 1..count``."""
        return cls(tuple(2.0 ** (-j) for j in range(1, count + 1)), seed)

    @classmethod
    def flat(cls, count: int, value: float = 1.0, seed: int = 0) -> "NoiseSpec":
        """Equal weight on every column (finitely many, so still trace class)."""
        return cls((float(value),) * count, seed)

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    @property
    def trace(self) -> float:
        return float(sum(self.eigenvalues))


@dataclass(frozen=True)
class SimConfig:
    """Stepping parameters shared by every path of a run."""

    dt: float
    horizon: float
    paths: int
    scheme: str = "exponential-euler"
    exit_tol: float = 1e-8
    guard: float = 1e12
    store_trajectories: bool = False
    chunk: int = 256

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise DomainError("dt and horizon must be > 0")
        if self.paths < 1 or self.chunk < 1:
            raise DomainError("paths and chunk must be >= 1")
        if self.exit_tol < 0 or self.guard <= 0:
            raise DomainError("exit_tol must be >= 0 and guard > 0")
        if self.scheme != "exponential-euler":
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        s = round(self.horizon / self.dt)
        if s < 1 or abs(s * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ConfigError(
                f"horizon {self.horizon} is not an integer number of steps of dt {self.dt}"
            )

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class PathEnsemble:
    """Simulation output; arrays are indexed by path.

    ``first_exit`` and ``diverged`` hold step indices (0 = initial
    state, -1 = never).  ``seeds`` are per-path generator labels so any
    path can be tied back to its noise stream.
    """

    final: np.ndarray
    min_margin: np.ndarray
    first_exit: np.ndarray
    diverged: np.ndarray
    seeds: np.ndarray
    dt: float
    steps: int
    trajectories: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.final.shape[0]

    @property
    def exited(self) -> np.ndarray:
        return self.first_exit >= 0

    @property
    def exit_fraction(self) -> float:
        return float(np.mean(self.exited))

    def exit_times(self) -> np.ndarray:
        """Exit step scaled to time; NaN where the path never exited."""
        t = self.first_exit.astype(np.float64) * self.dt
        t[self.first_exit < 0] = np.nan
        return t


def _worker_cap() -> int:
    """Worker count from CONE_SPDE_THREADS; 1 (sequential) by default."""
    raw = os.environ.get("CONE_SPDE_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"CONE_SPDE_THREADS must be an integer, got {raw!r}") from None


def _path_stream(master_seed: int, p: int):
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(p,))
    return np.random.default_rng(ss), np.uint64(ss.generate_state(1, np.uint64)[0])


def _draw_noise(rng, steps: int, n_vols: int, atom_wdt: np.ndarray):
    """Per-path draws, fixed order: normals first, then counts."""
    normals = rng.standard_normal((steps, n_vols))
    counts = rng.poisson(lam=atom_wdt, size=(steps, len(atom_wdt))).astype(np.int64)
    return normals, counts


def _lower_all(coeffs: CoefficientSet):
    """Flat descriptors for every map, or None if any map resists."""
    drift = coeffs.drift.lower()
    if drift is None:
        return None
    vols = []
    for col in coeffs.vol_columns:
        low = col.lower()
        if low is None:
            return None
        vols.append(low)
    atoms = []
    for _, gamma in coeffs.jump_atoms:
        low = gamma.lower()
        if low is None:
            return None
        atoms.append(low)
    return drift, tuple(vols), tuple(atoms)


def _generic_run(
    sp: kplan.StepPlan,
    coeffs: CoefficientSet,
    r0: np.ndarray,
    normals: np.ndarray,
    counts: np.ndarray,
    store: bool,
) -> dict:
    """Reference engine for coefficient maps that do not lower.

    One path at a time, same update order and monitoring semantics as
    the kernels.
    """
    P, N = r0.shape
    S = normals.shape[1]
    dt = sp.dt
    con_idx = np.flatnonzero(sp.signs != 0.0)
    con_sign = sp.signs[con_idx]
    gammas = [g for _, g in coeffs.jump_atoms]

    final = np.zeros((P, N))
    runmin = np.full(P, np.inf)
    first_exit = np.full(P, -1, dtype=np.int64)
    diverged = np.full(P, -1, dtype=np.int64)
    traj = np.zeros((P, S + 1, N)) if store else None

    def margin(r):
        if con_idx.size == 0:
            return np.inf
        return float(np.min(con_sign * r[con_idx]) + 0.0)

    for p in range(P):
        r = r0[p].astype(np.float64).copy()
        if store:
            traj[p, 0] = r
        if np.max(np.abs(r)) > sp.guard:
            diverged[p] = 0
            if store:
                traj[p, 1:] = r
            final[p] = r
            continue
        m = margin(r)
        runmin[p] = m
        if m < -sp.exit_tol:
            first_exit[p] = 0
        dead = False
        for s in range(S):
            if dead:
                if store:
                    traj[p, s + 1] = r
                continue
            acc = r + dt * coeffs.drift.eval_array(r)
            for j, col in enumerate(coeffs.vol_columns):
                acc += col.eval_array(r) * (sp.sqrt_scale[j] * normals[p, s, j])
            for i, g in enumerate(gammas):
                acc += g.eval_array(r) * (float(counts[p, s, i]) - sp.atom_wdt[i])
            r_new = sp.decay * acc
            if np.max(np.abs(r_new)) > sp.guard:
                diverged[p] = s + 1
                dead = True
                if store:
                    traj[p, s + 1] = r
                continue
            r = r_new
            m = margin(r)
            runmin[p] = min(runmin[p], m)
            if m < -sp.exit_tol and first_exit[p] < 0:
                first_exit[p] = s + 1
            if store:
                traj[p, s + 1] = r
        final[p] = r

    return {
        "final": final,
        "min_margin": runmin,
        "first_exit": first_exit,
        "diverged": diverged,
        "traj": traj,
    }


def _validate_setup(
    coeffs: CoefficientSet,
    semigroup: DiagonalSemigroup,
    noise: NoiseSpec,
    cone: ConeSpec,
    h0: StateVec,
) -> None:
    dim = coeffs.dim
    if len(semigroup.rates) != dim:
        raise ShapeError(f"semigroup dimension {len(semigroup.rates)} != coefficients {dim}")
    if cone.dim != dim or h0.dim != dim:
        raise ShapeError("cone / initial state dimension mismatch")
    if noise.count != len(coeffs.vol_columns):
        raise ShapeError(
            f"noise has {noise.count} eigenvalues for {len(coeffs.vol_columns)} volatility columns"
        )


def run_ensemble(
    coeffs: CoefficientSet,
    semigroup: DiagonalSemigroup,
    noise: NoiseSpec,
    cone: ConeSpec,
    config: SimConfig,
    h0: StateVec,
    backend: str | None = None,
    first_path: int = 0,
) -> PathEnsemble:
    """Simulate ``config.paths`` independent paths from ``h0``.

    ``first_path`` offsets the path indices (and so the noise streams),
    which is how a slice of a larger ensemble is reproduced exactly.
    """
    _validate_setup(coeffs, semigroup, noise, cone, h0)
    dim = coeffs.dim
    S = config.steps
    P = config.paths

    lowered = _lower_all(coeffs)
    weights = np.array(coeffs.jump_weights, dtype=np.float64)
    sp = kplan.make_plan(
        dim=dim,
        dt=config.dt,
        drift=lowered[0] if lowered else (),
        vols=lowered[1] if lowered else (),
        atoms=lowered[2] if lowered else (),
        rates=semigroup.rates,
        q_eigenvalues=np.array(noise.eigenvalues),
        atom_weights=weights,
        signs=cone.signs.astype(np.float64),
        exit_tol=config.exit_tol,
        guard=config.guard,
    )

    final = np.zeros((P, dim))
    runmin = np.zeros(P)
    first_exit = np.zeros(P, dtype=np.int64)
    diverged = np.zeros(P, dtype=np.int64)
    seeds = np.zeros(P, dtype=np.uint64)
    traj = np.zeros((P, S + 1, dim)) if config.store_trajectories else None

    if lowered is None and backend is not None:
        raise ConfigError("backend override requires coefficients that lower to kernel form")

    r0_row = h0.coords

    def do_chunk(lo: int) -> None:
        hi = min(lo + config.chunk, P)
        n = hi - lo
        normals = np.zeros((n, S, noise.count))
        counts = np.zeros((n, S, len(weights)), dtype=np.int64)
        for k in range(n):
            rng, label = _path_stream(noise.seed, first_path + lo + k)
            normals[k], counts[k] = _draw_noise(rng, S, noise.count, sp.atom_wdt)
            seeds[lo + k] = label
        r0 = np.broadcast_to(r0_row, (n, dim)).copy()
        if lowered is not None:
            out = step_ensemble(
                sp, r0, normals, counts, store=config.store_trajectories, backend=backend
            )
        else:
            out = _generic_run(
                sp, coeffs, r0, normals, counts, config.store_trajectories
            )
        final[lo:hi] = out["final"]
        runmin[lo:hi] = out["min_margin"]
        first_exit[lo:hi] = out["first_exit"]
        diverged[lo:hi] = out["diverged"]
        if traj is not None:
            traj[lo:hi] = out["traj"]

    starts = list(range(0, P, config.chunk))
    workers = _worker_cap()
    if workers > 1 and len(starts) > 1:
        # Chunks write disjoint slices and every path owns its RNG
        # stream, so scheduling order cannot change any output.
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(do_chunk, starts))
    else:
        for lo in starts:
            do_chunk(lo)

    return PathEnsemble(
        final=final,
        min_margin=runmin,
        first_exit=first_exit,
        diverged=diverged,
        seeds=seeds,
        dt=config.dt,
        steps=S,
        trajectories=traj,
    )


def simulate_path(
    coeffs: CoefficientSet,
    semigroup: DiagonalSemigroup,
    noise: NoiseSpec,
    cone: ConeSpec,
    config: SimConfig,
    h0: StateVec,
    path_index: int = 0,
) -> PathEnsemble:
    """One path, by its index within the ensemble seeding scheme.

    Raises ``DivergenceError`` if the path overflows the guard; the
    ensemble runner records the same event as data instead.
    """
    one = SimConfig(
        dt=config.dt,
        horizon=config.horizon,
        paths=1,
        scheme=config.scheme,
        exit_tol=config.exit_tol,
        guard=config.guard,
        store_trajectories=config.store_trajectories,
        chunk=1,
    )
    ens = run_ensemble(
        coeffs, semigroup, noise, cone, one, h0, first_path=path_index
    )
    if ens.diverged[0] >= 0:
        raise DivergenceError(
            f"path {path_index} exceeded the overflow guard at step {ens.diverged[0]}",
            step=int(ens.diverged[0]),
        )
    return ens


@dataclass(frozen=True)
class StabilityResult:
    """Coupled distance between two coefficient sets under shared noise.

    ``mean`` estimates the expected squared sup-norm distance over the
    horizon for entry ``index`` of the approximating sequence;
    ``stderr`` is its Monte Carlo standard error.
    """

    index: int
    mean: float
    stderr: float
    per_path: np.ndarray
    steps: int
    dt: float


def _coupled_sup_sq(
    limit: CoefficientSet,
    other: CoefficientSet,
    semigroup: DiagonalSemigroup,
    noise: NoiseSpec,
    cone: ConeSpec,
    config: SimConfig,
    h0: StateVec,
) -> np.ndarray:
    stored = SimConfig(
        dt=config.dt,
        horizon=config.horizon,
        paths=config.paths,
        scheme=config.scheme,
        exit_tol=config.exit_tol,
        guard=config.guard,
        store_trajectories=True,
        chunk=config.chunk,
    )
    a = run_ensemble(limit, semigroup, noise, cone, stored, h0)
    b = run_ensemble(other, semigroup, noise, cone, stored, h0)
    diff = a.trajectories - b.trajectories
    return np.max(np.sum(diff * diff, axis=2), axis=1)


def stability_experiment(
    semigroup: DiagonalSemigroup,
    limit: CoefficientSet,
    seq: list[CoefficientSet],
    noise: NoiseSpec,
    cone: ConeSpec,
    config: SimConfig,
    h0: StateVec,
) -> list[StabilityResult]:
    """Estimate ``E sup_t ||r_t - r^n_t||^2`` for each entry of ``seq``.

    The limiting system and every approximation consume identical noise
    draws (same master seed, same path indices), so an entry equal to
    ``limit`` scores exactly zero.  The sup runs over every stored step
    including the initial state.
    """
    results = []
    for n, other in enumerate(seq):
        if other.dim != limit.dim:
            raise ShapeError(f"sequence entry {n} dimension differs from the limit")
        sup_sq = _coupled_sup_sq(limit, other, semigroup, noise, cone, config, h0)
        mean = float(np.mean(sup_sq))
        stderr = (
            float(np.std(sup_sq, ddof=1) / np.sqrt(len(sup_sq)))
            if len(sup_sq) > 1
            else 0.0
        )
        results.append(
            StabilityResult(
                index=n,
                mean=mean,
                stderr=stderr,
                per_path=sup_sq,
                steps=config.steps,
                dt=config.dt,
            )
        )
    return results


def ssnc_estimate(
    semigroup: DiagonalSemigroup,
    sigma_map,
    cone: ConeSpec,
    h: StateVec,
    grid: LiminfGrid = LiminfGrid(),
) -> float:
    """Short-time cone compatibility of a vector field at ``h``.

    Returns ``min over the grid of d_K(S_t h + t Sigma(h)) / t``, an
    estimate of the liminf as t drops to 0.  Near zero it is consistent
    with the flow ``Sigma`` nudging the state back into the cone; a
    value bounded away from zero witnesses an outward push.  ``h`` must
    lie in the cone, where the semigroup alone contributes nothing.
    """
    if not cone_contains(cone, h, tol=1e-12):
        raise DomainError("state must lie in the cone")
    value = sigma_map(h) if not isinstance(sigma_map, np.ndarray) else sigma_map
    vec = value.coords if isinstance(value, StateVec) else np.asarray(value, dtype=np.float64)
    if vec.shape != (h.dim,):
        raise ShapeError("Sigma must produce a vector of the state dimension")
    best = np.inf
    for t in grid.times():
        moved = semigroup.apply(float(t), h).coords + t * vec
        best = min(best, cone_distance(cone, StateVec(moved)) / float(t))
    return float(best)
