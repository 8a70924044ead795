"""Coefficient maps and the cone-invariance condition checkers.

A coefficient set bundles the drift, the volatility columns, and the
compensated jump atoms of the dynamics

    dr = (A r + drift(r)) dt + sum_j vol_j(r) dW^j + compensated jumps.

The invariance of a coordinate cone under these dynamics is equivalent
to three pointwise conditions, which the checkers here test by sampling:

* jump condition: ``h + gamma_i(h)`` stays in the cone for ``h`` in the
  cone and every atom ``i``;
* drift condition: at admissible boundary pairs ``(theta e_k*, h)`` the
  inward margin ``a + theta drift(h)_k - sum_i w_i theta gamma_i(h)_k``
  is nonnegative;
* volatility condition: every column is parallel to the boundary,
  ``theta vol_j(h)_k = 0`` at the same pairs.

Sampling can certify a violation (a witness is a concrete point) but
never its absence, so reports distinguish "VIOLATED (witness found)"
from "NO VIOLATION FOUND (sampled)".
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, SamplerContractError, ShapeError
from .kernels import plan as _plan
from .semigroup import DiagonalSemigroup, boundary_set_membership
from .space import ConeSpec, StateVec, cone_contains, retract

__all__ = [
    "CoefficientMap",
    "ZeroMap",
    "ConstantMap",
    "AffineMap",
    "MeanReversionMap",
    "ProportionalMap",
    "TabulatedMap",
    "GatedOffsetMap",
    "SumMap",
    "ProjectedMap",
    "RetractedMap",
    "CallableMap",
    "map_from_config",
    "CoefficientSet",
    "SamplerSpec",
    "Witness",
    "ConditionReport",
    "sample_boundary_pairs",
    "sample_cone_points",
    "drift_margin",
    "check_jump_condition",
    "check_drift_condition",
    "check_volatility_condition",
    "invariance_verdict",
]


class CoefficientMap:
    """Pure map of the state space, ``StateVec -> StateVec``.

    Subclasses implement ``eval_array`` on raw coordinate arrays; the
    public ``__call__`` wraps and unwraps ``StateVec``.  ``lower``
    returns the flat kernel form for built-in families and ``None`` for
    maps the compiled kernel does not handle.
    """

    dim: int

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lower(self) -> _plan.FlatMap | None:
        return None

    def to_config(self) -> dict:
        raise ConfigError(f"{type(self).__name__} has no config form")

    def __call__(self, h: StateVec) -> StateVec:
        if h.dim != self.dim:
            raise ShapeError(f"map dim {self.dim} vs vector dim {h.dim}")
        return StateVec(self.eval_array(h.coords))


def _vec(values, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (dim,):
        raise ShapeError(f"{name} must have shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ZeroMap(CoefficientMap):
    dim: int

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        return np.zeros(self.dim)

    def lower(self):
        return ()

    def to_config(self) -> dict:
        return {"family": "zero"}


@dataclass(frozen=True)
class ConstantMap(CoefficientMap):
    """``h -> value``, ignoring the state."""

    value: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.value, dtype=np.float64)
        object.__setattr__(self, "value", _vec(arr, arr.shape[0] if arr.ndim == 1 else -1, "value"))
        object.__setattr__(self, "dim", self.value.shape[0])

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        return self.value.copy()

    def lower(self):
        return (_plan.Leaf(_plan.CONSTANT, self.dim, vec=self.value),)

    def to_config(self) -> dict:
        return {"family": "constant", "value": [float(x) for x in self.value]}


@dataclass(frozen=True)
class AffineMap(CoefficientMap):
    """``h -> matrix h + offset``.

    Evaluation accumulates matrix columns in index order instead of
    calling a BLAS matvec; that keeps it bitwise identical to the
    compiled kernel, and the matrices here are small.
    """

    matrix: np.ndarray
    offset: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DomainError("matrix must be finite")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dim", m.shape[0])
        object.__setattr__(self, "offset", _vec(self.offset, self.dim, "offset"))

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        out = self.offset.copy()
        for l in range(self.dim):
            out += self.matrix[:, l] * a[l]
        return out

    def lower(self):
        return (_plan.Leaf(_plan.DENSE, self.dim, vec=self.offset, mat=self.matrix),)

    def to_config(self) -> dict:
        return {
            "family": "affine",
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "offset": [float(x) for x in self.offset],
        }


@dataclass(frozen=True)
class MeanReversionMap(CoefficientMap):
    """``h -> kappa (b - h)``, pull toward the level ``b``."""

    kappa: float
    b: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.kappa):
            raise DomainError("kappa must be finite")
        object.__setattr__(self, "kappa", float(self.kappa))
        arr = np.asarray(self.b, dtype=np.float64)
        object.__setattr__(self, "b", _vec(arr, arr.shape[0] if arr.ndim == 1 else -1, "b"))
        object.__setattr__(self, "dim", self.b.shape[0])

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        return self.kappa * (self.b - a)

    def lower(self):
        return (_plan.Leaf(_plan.MEAN_REV, self.dim, f0=self.kappa, vec=self.b),)

    def to_config(self) -> dict:
        return {"family": "mean_reversion", "kappa": self.kappa, "b": [float(x) for x in self.b]}


@dataclass(frozen=True)
class ProportionalMap(CoefficientMap):
    """Single-coordinate proportional map: ``(f(h))_k = scale h_k`` at
    ``k = index``, zero elsewhere.  The standard boundary-parallel
    volatility column."""

    scale: float
    index: int
    dim: int

    def __post_init__(self):
        if not np.isfinite(self.scale):
            raise DomainError("scale must be finite")
        if not 0 <= self.index < self.dim:
            raise ShapeError(f"index {self.index} outside 0..{self.dim - 1}")

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.index] = self.scale * a[self.index]
        return out

    def lower(self):
        return (_plan.Leaf(_plan.PROPORTIONAL, self.dim, i0=self.index, f0=self.scale),)

    def to_config(self) -> dict:
        return {"family": "proportional", "scale": self.scale, "index": self.index}


@dataclass(frozen=True)
class TabulatedMap(CoefficientMap):
    """Coordinatewise piecewise-linear interpolant from a value table.

    Applied to every coordinate: ``(f(h))_k = interp(h_k)`` with
    constant extrapolation beyond the knots.  Not lowered to the
    compiled kernel; runs through the generic engine.
    """

    knots: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=np.float64)
        y = np.asarray(self.values, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ShapeError("knots and values must be equal-length 1-d arrays, size >= 2")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("table entries must be finite")
        if np.any(np.diff(x) <= 0):
            raise DomainError("knots must be strictly increasing")
        x, y = x.copy(), y.copy()
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "values", y)

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        return np.interp(a, self.knots, self.values)

    def to_config(self) -> dict:
        return {
            "family": "tabulated",
            "x": [float(v) for v in self.knots],
            "y": [float(v) for v in self.values],
        }


@dataclass(frozen=True)
class GatedOffsetMap(CoefficientMap):
    """Constant offset active only while a gate coordinate is in a band.

    ``f(h) = vector`` if ``low <= h[gate_index] <= high``, else 0.
    """

    vector: np.ndarray
    gate_index: int
    low: float
    high: float
    dim: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", _vec(arr, arr.shape[0] if arr.ndim == 1 else -1, "vector"))
        object.__setattr__(self, "dim", self.vector.shape[0])
        if not 0 <= self.gate_index < self.dim:
            raise ShapeError(f"gate index {self.gate_index} outside 0..{self.dim - 1}")
        if not (np.isfinite(self.low) and np.isfinite(self.high) and self.low <= self.high):
            raise DomainError("need finite low <= high")

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        if self.low <= a[self.gate_index] <= self.high:
            return self.vector.copy()
        return np.zeros(self.dim)

    def lower(self):
        return (
            _plan.Leaf(
                _plan.GATED, self.dim, i0=self.gate_index, f0=self.low, f1=self.high, vec=self.vector
            ),
        )

    def to_config(self) -> dict:
        return {
            "family": "gated_offset",
            "vector": [float(x) for x in self.vector],
            "gate_index": self.gate_index,
            "low": self.low,
            "high": self.high,
        }


@dataclass(frozen=True)
class SumMap(CoefficientMap):
    """Pointwise sum of maps, evaluated left to right."""

    terms: tuple[CoefficientMap, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ShapeError("sum needs at least one term")
        dims = {t.dim for t in terms}
        if len(dims) != 1:
            raise ShapeError(f"sum terms disagree on dim: {sorted(dims)}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dim", terms[0].dim)

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        out = self.terms[0].eval_array(a)
        for t in self.terms[1:]:
            out = out + t.eval_array(a)
        return out

    def lower(self):
        leaves: list[_plan.Leaf] = []
        for t in self.terms:
            low = t.lower()
            if low is None:
                return None
            leaves.extend(low)
        return tuple(leaves)

    def to_config(self) -> dict:
        return {"family": "sum", "terms": [t.to_config() for t in self.terms]}


@dataclass(frozen=True)
class ProjectedMap(CoefficientMap):
    """``h -> P_n f(h)``: evaluate, then zero coordinates past ``level``."""

    inner: CoefficientMap
    level: int
    dim: int = field(init=False)

    def __post_init__(self):
        if self.level < 0:
            raise DomainError(f"projection level must be >= 0, got {self.level}")
        object.__setattr__(self, "dim", self.inner.dim)

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        out = self.inner.eval_array(a)
        if self.level < self.dim:
            out = out.copy() if not out.flags.writeable else out
            out[self.level:] = 0.0
        return out

    def lower(self):
        low = self.inner.lower()
        if low is None:
            return None
        return tuple(leaf.with_cutoff(self.level) for leaf in low)

    def to_config(self) -> dict:
        return {"family": "projected", "level": self.level, "inner": self.inner.to_config()}


@dataclass(frozen=True)
class RetractedMap(CoefficientMap):
    """``h -> f(R_n h)`` with the radial retraction at ``radius``.

    Bounded whenever ``f`` is bounded on the ball, identical to ``f``
    inside the ball, and its restriction to any ball keeps the inner
    map's Lipschitz constant because the retraction is 1-Lipschitz.
    """

    inner: CoefficientMap
    radius: float
    dim: int = field(init=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError(f"retraction radius must be > 0, got {self.radius}")
        object.__setattr__(self, "dim", self.inner.dim)

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(a))
        if norm > self.radius:
            a = a * (self.radius / norm)
        return self.inner.eval_array(a)

    def to_config(self) -> dict:
        return {"family": "retracted", "radius": self.radius, "inner": self.inner.to_config()}


@dataclass(frozen=True)
class CallableMap(CoefficientMap):
    """Wrap an arbitrary pure function of the state.

    ``fn`` may accept and return either raw arrays or ``StateVec``; the
    wrapper normalizes.  Never lowered and not serializable.
    """

    fn: Callable
    dim: int

    def eval_array(self, a: np.ndarray) -> np.ndarray:
        res = self.fn(StateVec(a))
        out = res.coords if isinstance(res, StateVec) else np.asarray(res, dtype=np.float64)
        if out.shape != (self.dim,):
            raise ShapeError(f"callable returned shape {out.shape}, expected ({self.dim},)")
        return out


_FAMILIES = {
    "zero",
    "constant",
    "linear",
    "affine",
    "mean_reversion",
    "proportional",
    "tabulated",
    "gated_offset",
    "sum",
    "projected",
}


def map_from_config(doc: dict, dim: int, index: int | None = None) -> CoefficientMap:
    """Build a coefficient map from its config document.

    ``index`` is the position of the map in a column list; the
    proportional family uses it as the default coordinate index.
    """
    if not isinstance(doc, dict) or "family" not in doc:
        raise ConfigError(f"coefficient map config needs a 'family' key, got {doc!r}")
    fam = doc["family"]
    if fam not in _FAMILIES:
        raise ConfigError(f"unknown coefficient family {fam!r}")
    try:
        if fam == "zero":
            return ZeroMap(dim)
        if fam == "constant":
            return ConstantMap(_vec(doc["value"], dim, "value"))
        if fam in ("linear", "affine"):
            if "diag" in doc:
                m = np.diag(np.asarray(doc["diag"], dtype=np.float64))
            else:
                m = np.asarray(doc["matrix"], dtype=np.float64)
            offset = doc.get("offset", np.zeros(dim)) if fam == "affine" else np.zeros(dim)
            return AffineMap(m, np.asarray(offset, dtype=np.float64))
        if fam == "mean_reversion":
            return MeanReversionMap(float(doc["kappa"]), _vec(doc["b"], dim, "b"))
        if fam == "proportional":
            idx = doc.get("index", index)
            if idx is None:
                raise ConfigError("proportional map needs an 'index' outside a column list")
            return ProportionalMap(float(doc["scale"]), int(idx), dim)
        if fam == "tabulated":
            return TabulatedMap(np.asarray(doc["x"]), np.asarray(doc["y"]), dim)
        if fam == "gated_offset":
            return GatedOffsetMap(
                _vec(doc["vector"], dim, "vector"),
                int(doc["gate_index"]),
                float(doc["low"]),
                float(doc["high"]),
            )
        if fam == "sum":
            return SumMap(tuple(map_from_config(t, dim, index) for t in doc["terms"]))
        if fam == "projected":
            return ProjectedMap(map_from_config(doc["inner"], dim, index), int(doc["level"]))
    except KeyError as exc:
        raise ConfigError(f"family {fam!r} config missing key {exc}") from exc
    raise ConfigError(f"unhandled family {fam!r}")


@dataclass(frozen=True)
class CoefficientSet:
    """Drift, volatility columns, and compensated jump atoms.

    ``jump_atoms`` are pairs ``(weight, kernel)`` with weight the atom's
    finite jump intensity.  ``lipschitz_hint`` is optional metadata used
    to size default search radii; nothing checks it.
    """

    drift: CoefficientMap
    vol_columns: tuple[CoefficientMap, ...] = ()
    jump_atoms: tuple[tuple[float, CoefficientMap], ...] = ()
    lipschitz_hint: float | None = None

    def __post_init__(self):
        vols = tuple(self.vol_columns)
        atoms = tuple((float(w), g) for w, g in self.jump_atoms)
        object.__setattr__(self, "vol_columns", vols)
        object.__setattr__(self, "jump_atoms", atoms)
        dims = {self.drift.dim} | {v.dim for v in vols} | {g.dim for _, g in atoms}
        if len(dims) != 1:
            raise ShapeError(f"coefficient maps disagree on dim: {sorted(dims)}")
        for w, _ in atoms:
            if not (np.isfinite(w) and w > 0):
                raise DomainError(f"jump atom weight must be finite and > 0, got {w}")
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise DomainError("lipschitz hint must be > 0 when given")

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def jump_weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.jump_atoms], dtype=np.float64)

    def hs_norm(self, h: StateVec) -> float:
        """Hilbert-Schmidt norm of the volatility at ``h``:
        ``sqrt(sum_j ||vol_j(h)||^2)``."""
        total = 0.0
        for col in self.vol_columns:
            total += float(np.sum(col.eval_array(h.coords) ** 2))
        return float(np.sqrt(total))

    def uses_only_builtin_maps(self) -> bool:
        """True when every map lowers to the kernel form."""
        if self.drift.lower() is None:
            return False
        if any(c.lower() is None for c in self.vol_columns):
            return False
        return all(g.lower() is not None for _, g in self.jump_atoms)

    def to_config(self) -> dict:
        doc: dict = {
            "drift": self.drift.to_config(),
            "vol": [c.to_config() for c in self.vol_columns],
            "jumps": [{"weight": w, "kernel": g.to_config()} for w, g in self.jump_atoms],
        }
        if self.lipschitz_hint is not None:
            doc["lipschitz_hint"] = self.lipschitz_hint
        return doc

    @classmethod
    def from_config(cls, doc: dict, dim: int) -> "CoefficientSet":
        if "drift" not in doc:
            raise ConfigError("coefficients config needs a 'drift' entry")
        drift = map_from_config(doc["drift"], dim)
        vols = tuple(
            map_from_config(c, dim, index=j) for j, c in enumerate(doc.get("vol", []))
        )
        atoms = []
        for entry in doc.get("jumps", []):
            if "weight" not in entry or "kernel" not in entry:
                raise ConfigError("jump entry needs 'weight' and 'kernel'")
            atoms.append((float(entry["weight"]), map_from_config(entry["kernel"], dim)))
        hint = doc.get("lipschitz_hint")
        return cls(drift, vols, tuple(atoms), None if hint is None else float(hint))


# --------------------------------------------------------------------------
# Boundary and cone sampling


@dataclass(frozen=True)
class SamplerSpec:
    """Deterministic sampling plan for the condition checkers.

    For every constrained coordinate ``points_per_face`` random points
    are drawn on that face (the coordinate pinned to zero, the others
    folded into the cone); the jump checker additionally draws
    ``interior_points`` unpinned cone points.  Corners (the origin and
    the unit vectors of the other constrained coordinates) are added
    deterministically.  Identical seeds give identical samples.
    """

    points_per_face: int = 64
    interior_points: int = 64
    seed: int = 0
    include_corners: bool = True

    def __post_init__(self):
        if self.points_per_face < 0 or self.interior_points < 0:
            raise DomainError("sample counts must be >= 0")


def _fold_into_cone(cone: ConeSpec, z: np.ndarray) -> np.ndarray:
    out = z.copy()
    idx = cone.constrained
    out[idx] = cone.signs[idx] * np.abs(z[idx])
    return out


def _face_corners(cone: ConeSpec, k: int) -> list[np.ndarray]:
    pts = [np.zeros(cone.dim)]
    for l in cone.constrained:
        if l == k:
            continue
        e = np.zeros(cone.dim)
        e[l] = float(cone.signs[l])
        pts.append(e)
    return pts


def sample_boundary_pairs(
    cone: ConeSpec, spec: SamplerSpec = SamplerSpec()
) -> list[tuple[int, int, StateVec]]:
    """Sampled admissible boundary pairs ``(theta, k, h)`` with ``h_k = 0``.

    Faces are visited in increasing coordinate order from one seeded
    stream, so the full list is reproducible.  Every returned point is
    verified to lie in the cone with the pinned coordinate exactly zero.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    pairs: list[tuple[int, int, StateVec]] = []
    for k in cone.constrained:
        theta = int(cone.signs[k])
        raw = []
        for _ in range(spec.points_per_face):
            z = rng.standard_normal(cone.dim)
            p = _fold_into_cone(cone, z)
            p[k] = 0.0
            raw.append(p)
        if spec.include_corners:
            raw.extend(_face_corners(cone, int(k)))
        for p in raw:
            h = StateVec(p)
            if not cone_contains(cone, h, 0.0) or h.coords[k] != 0.0:
                raise SamplerContractError(f"face sampler left the face at k={k}")
            pairs.append((theta, int(k), h))
    return pairs


def sample_cone_points(
    cone: ConeSpec, spec: SamplerSpec = SamplerSpec()
) -> list[StateVec]:
    """Sampled cone points: interior draws, every face, and corners."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    points: list[StateVec] = []
    for _ in range(spec.interior_points):
        points.append(StateVec(_fold_into_cone(cone, rng.standard_normal(cone.dim))))
    for k in cone.constrained:
        for _ in range(spec.points_per_face):
            p = _fold_into_cone(cone, rng.standard_normal(cone.dim))
            p[k] = 0.0
            points.append(StateVec(p))
    if spec.include_corners:
        points.append(StateVec(np.zeros(cone.dim)))
        for l in cone.constrained:
            e = np.zeros(cone.dim)
            e[l] = float(cone.signs[l])
            points.append(StateVec(e))
    for h in points:
        if not cone_contains(cone, h, 0.0):
            raise SamplerContractError("cone sampler produced a point outside the cone")
    return points


# --------------------------------------------------------------------------
# Condition checkers


@dataclass(frozen=True)
class Witness:
    """Concrete violation: which condition failed, where, by how much.

    ``component`` is the atom or column index when one is responsible.
    """

    condition: str
    theta: int
    k: int
    point: StateVec
    magnitude: float
    component: int | None = None

    def sort_key(self):
        comp = -1 if self.component is None else self.component
        return (self.condition, self.k, self.theta, comp, -self.magnitude, self.point.coords.tobytes())

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "theta": self.theta,
            "k": self.k,
            "point": [float(x) for x in self.point.coords],
            "magnitude": self.magnitude,
            "component": self.component,
        }


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one or more condition checks.

    Flags left as ``None`` were not evaluated (partial reports from the
    single-condition checkers).  A ``False`` flag always comes with at
    least one witness whose magnitude exceeds the tolerance; witnesses
    are kept in canonical sorted order so reports are comparable.
    """

    jump_ok: bool | None
    drift_ok: bool | None
    vol_ok: bool | None
    witnesses: tuple[Witness, ...]
    sampled_points: int
    tol: float

    def __post_init__(self):
        object.__setattr__(
            self, "witnesses", tuple(sorted(self.witnesses, key=Witness.sort_key))
        )
        for flag, cond in (
            (self.jump_ok, "jump-stays-in-cone"),
            (self.drift_ok, "drift-inward"),
            (self.vol_ok, "vol-parallel"),
        ):
            if flag is False and not any(w.condition == cond for w in self.witnesses):
                raise SamplerContractError(f"failed flag {cond} without a witness")
        for w in self.witnesses:
            if not w.magnitude > self.tol:
                raise SamplerContractError(
                    f"witness magnitude {w.magnitude} not above tolerance {self.tol}"
                )

    @property
    def satisfied(self) -> bool:
        """True when every evaluated condition held on every sample."""
        return all(f is not False for f in (self.jump_ok, self.drift_ok, self.vol_ok))

    @property
    def verdict(self) -> str:
        return "VIOLATED (witness found)" if not self.satisfied else "NO VIOLATION FOUND (sampled)"

    def to_dict(self) -> dict:
        return {
            "jump_ok": self.jump_ok,
            "drift_ok": self.drift_ok,
            "vol_ok": self.vol_ok,
            "verdict": self.verdict,
            "sampled_points": self.sampled_points,
            "tol": self.tol,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def default_tol(coeffs: CoefficientSet) -> float:
    """1e-9 for built-in families; 1e-6 once interpolated tables or
    opaque callables are involved."""
    return 1e-9 if coeffs.uses_only_builtin_maps() else 1e-6


def drift_margin(
    coeffs: CoefficientSet,
    sg: DiagonalSemigroup,
    cone: ConeSpec,
    theta: int,
    k: int,
    h: StateVec,
) -> dict:
    """Inward-pointing margin terms at an admissible boundary pair.

    Returns three equivalent formulations evaluated at ``(theta e_k*, h)``:
    ``main`` includes the boundary value ``a``, ``no_a`` drops it, and
    ``generator`` uses ``<h*, A h + drift(h)>``.  On exact faces
    (``h_k = 0``) all three coincide.
    """
    membership = boundary_set_membership(sg, cone, (theta, k), h)
    if not membership.in_d:
        raise SamplerContractError(
            f"pair (theta={theta}, k={k}) with h_k={h.coords[k]} is not an admissible boundary pair"
        )
    a_val = membership.a_value
    drift_k = theta * coeffs.drift.eval_array(h.coords)[k]
    comp_k = 0.0
    for w, g in coeffs.jump_atoms:
        comp_k += w * theta * g.eval_array(h.coords)[k]
    gen_k = theta * (-sg.rates[k] * h.coords[k])
    return {
        "a": a_val,
        "main": a_val + drift_k - comp_k,
        "no_a": drift_k - comp_k,
        "generator": gen_k + drift_k - comp_k,
    }


def check_jump_condition(
    coeffs: CoefficientSet,
    cone: ConeSpec,
    sampler: SamplerSpec = SamplerSpec(),
    tol: float | None = None,
) -> ConditionReport:
    """Sampled check that every jump keeps the cone invariant.

    For each sampled ``h`` in the cone and each atom the displaced point
    ``h + gamma_i(h)`` must satisfy every sign constraint up to ``tol``.
    """
    if tol is None:
        tol = default_tol(coeffs)
    points = sample_cone_points(cone, sampler)
    witnesses = []
    idx = cone.constrained
    for h in points:
        for i, (_, g) in enumerate(coeffs.jump_atoms):
            moved = h.coords + g.eval_array(h.coords)
            margins = cone.signs[idx] * moved[idx]
            for pos in np.flatnonzero(margins < -tol):
                k = int(idx[pos])
                witnesses.append(
                    Witness(
                        condition="jump-stays-in-cone",
                        theta=int(cone.signs[k]),
                        k=k,
                        point=h,
                        magnitude=float(-margins[pos]),
                        component=i,
                    )
                )
    return ConditionReport(
        jump_ok=not witnesses,
        drift_ok=None,
        vol_ok=None,
        witnesses=tuple(witnesses),
        sampled_points=len(points),
        tol=tol,
    )


def check_drift_condition(
    coeffs: CoefficientSet,
    sg: DiagonalSemigroup,
    cone: ConeSpec,
    sampler: SamplerSpec = SamplerSpec(),
    tol: float | None = None,
) -> ConditionReport:
    """Sampled check of the inward-pointing drift condition.

    At every sampled admissible boundary pair the margin
    ``a + theta drift(h)_k - sum_i w_i theta gamma_i(h)_k`` must be
    ``>= -tol``.  The two equivalent formulations (without ``a``; with
    the generator term) are evaluated alongside and must agree on exact
    faces; disagreement marks a sampler bug, not a coefficient property.
    """
    if tol is None:
        tol = default_tol(coeffs)
    pairs = sample_boundary_pairs(cone, sampler)
    witnesses = []
    for theta, k, h in pairs:
        terms = drift_margin(coeffs, sg, cone, theta, k, h)
        if not (
            abs(terms["main"] - terms["no_a"]) <= 1e-12
            and abs(terms["main"] - terms["generator"]) <= 1e-12
        ):
            raise SamplerContractError("margin formulations disagree on an exact face")
        if terms["main"] < -tol:
            witnesses.append(
                Witness(
                    condition="drift-inward",
                    theta=theta,
                    k=k,
                    point=h,
                    magnitude=float(-terms["main"]),
                )
            )
    return ConditionReport(
        jump_ok=None,
        drift_ok=not witnesses,
        vol_ok=None,
        witnesses=tuple(witnesses),
        sampled_points=len(pairs),
        tol=tol,
    )


def check_volatility_condition(
    coeffs: CoefficientSet,
    sg: DiagonalSemigroup,
    cone: ConeSpec,
    sampler: SamplerSpec = SamplerSpec(),
    tol: float | None = None,
) -> ConditionReport:
    """Sampled check that volatility columns are parallel to the boundary:
    ``|theta vol_j(h)_k| <= tol`` at admissible boundary pairs."""
    if tol is None:
        tol = default_tol(coeffs)
    pairs = sample_boundary_pairs(cone, sampler)
    witnesses = []
    for theta, k, h in pairs:
        for j, col in enumerate(coeffs.vol_columns):
            val = theta * col.eval_array(h.coords)[k]
            if abs(val) > tol:
                witnesses.append(
                    Witness(
                        condition="vol-parallel",
                        theta=theta,
                        k=k,
                        point=h,
                        magnitude=float(abs(val)),
                        component=j,
                    )
                )
    return ConditionReport(
        jump_ok=None,
        drift_ok=None,
        vol_ok=not witnesses,
        witnesses=tuple(witnesses),
        sampled_points=len(pairs),
        tol=tol,
    )


def invariance_verdict(
    coeffs: CoefficientSet,
    sg: DiagonalSemigroup,
    cone: ConeSpec,
    sampler: SamplerSpec = SamplerSpec(),
    tol: float | None = None,
) -> ConditionReport:
    """Combined verdict over the jump, drift, and volatility conditions.

    The three checkers run on the same sampling plan; the merged report
    is satisfied only when all three found no violation.  A satisfied
    report means "no violation found on the sample", never a proof.
    """
    if sg.dim != cone.dim or sg.dim != coeffs.dim:
        raise ShapeError(
            f"dims disagree: semigroup {sg.dim}, cone {cone.dim}, coefficients {coeffs.dim}"
        )
    if tol is None:
        tol = default_tol(coeffs)
    jump = check_jump_condition(coeffs, cone, sampler, tol)
    drift = check_drift_condition(coeffs, sg, cone, sampler, tol)
    vol = check_volatility_condition(coeffs, sg, cone, sampler, tol)
    return ConditionReport(
        jump_ok=jump.jump_ok,
        drift_ok=drift.drift_ok,
        vol_ok=vol.vol_ok,
        witnesses=jump.witnesses + drift.witnesses + vol.witnesses,
        sampled_points=jump.sampled_points + drift.sampled_points + vol.sampled_points,
        tol=tol,
    )
