"""Experiment configuration: one JSON document drives every command.

A config bundles the state space, semigroup, coefficients, noise,
simulation parameters, and checker sampling plan, with cross-module
dimensions validated up front.  A ``"preset"`` key expands to a full
document before validation; explicit top-level sections override the
preset's section wholesale.

The canonical form is fully materialized (presets expanded, defaults
filled, rates and signs listed out) and serialized with sorted keys,
so semantically identical configs hash identically.  That sha256
content hash names the run: every output file references it, and the
manifest embeds the canonical config so a manifest file can be fed
back in as ``--config`` to reproduce a run bit for bit.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coefficients import CoefficientSet, SamplerSpec
from .errors import ConfigError, ConeSpdeError, ShapeError
from .semigroup import DiagonalSemigroup
from .simulate import NoiseSpec, SimConfig
from .space import ConeSpec, StateVec

__all__ = [
    "ExperimentConfig",
    "PRESET_NAMES",
    "preset_document",
    "canonical_json",
    "content_hash",
]


def _heat_positive() -> dict:
    dim = 16
    return {
        "space": {"dim": dim, "cone": "nonnegative"},
        "semigroup": {"rates": "heat"},
        "coefficients": {
            "drift": {"family": "mean_reversion", "kappa": 1.0, "b": [0.5] * dim},
            "vol": [
                {"family": "proportional", "scale": 0.3, "index": j} for j in range(8)
            ],
            "jumps": [
                {"weight": 0.2, "kernel": {"family": "constant", "value": [0.1] * dim}}
            ],
        },
        "noise": {"eigenvalues": {"rule": "flat", "count": 8, "value": 1.0}, "seed": 0},
        "sim": {
            "dt": 1e-3,
            "horizon": 1.0,
            "paths": 200,
            "scheme": "exponential-euler",
            "exit_tol": 1e-8,
            "guard": 1e12,
        },
        "checker": {
            "points_per_face": 64,
            "interior_points": 64,
            "seed": 0,
            "include_corners": True,
        },
        "initial": [0.0] * dim,
    }


def _heat_positive_badvol() -> dict:
    doc = _heat_positive()
    bad = [0.0] * 16
    bad[0] = 0.3
    doc["coefficients"]["vol"].append({"family": "constant", "value": bad})
    doc["noise"]["eigenvalues"] = {"rule": "flat", "count": 9, "value": 1.0}
    return doc


def _heat_positive_hidden() -> dict:
    doc = _heat_positive()
    push = [0.0] * 16
    push[1] = -5.0
    doc["coefficients"]["drift"] = {
        "family": "sum",
        "terms": [
            doc["coefficients"]["drift"],
            {
                "family": "gated_offset",
                "vector": push,
                "gate_index": 2,
                "low": 6.0,
                "high": 7.0,
            },
        ],
    }
    start = [0.0] * 16
    start[2] = 6.5
    doc["initial"] = start
    return doc


_PRESETS = {
    "heat-positive": _heat_positive,
    "heat-positive-badvol": _heat_positive_badvol,
    "heat-positive-hidden": _heat_positive_hidden,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset_document(name: str) -> dict:
    """Full config document for a named preset."""
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    return _PRESETS[name]()


def _expand(doc: dict) -> dict:
    """Resolve the preset shortcut; user sections replace preset sections."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in doc and "hash" in doc:
        # A run manifest embeds the canonical config; accept it whole.
        doc = doc["config"]
        if not isinstance(doc, dict):
            raise ConfigError("manifest 'config' entry must be an object")
    doc = copy.deepcopy(doc)
    name = doc.pop("preset", None)
    if name is None:
        return doc
    base = preset_document(name)
    base.update(doc)
    return base


def _section(doc: dict, key: str, required: bool = True) -> dict:
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError(f"{key}: missing section")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"{key}: must be an object, got {type(val).__name__}")
    return val


def _field(section: dict, path: str, key: str, default=None, required: bool = False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: missing")
        return default
    return section[key]


def _noise_from(doc: dict) -> NoiseSpec:
    eigs = _field(doc, "noise", "eigenvalues", required=True)
    seed = int(_field(doc, "noise", "seed", default=0))
    if isinstance(eigs, dict):
        rule = _field(eigs, "noise.eigenvalues", "rule", required=True)
        count = int(_field(eigs, "noise.eigenvalues", "count", required=True))
        if rule == "flat":
            value = float(_field(eigs, "noise.eigenvalues", "value", default=1.0))
            return NoiseSpec.flat(count, value, seed)
        if rule == "dyadic":
            return NoiseSpec.dyadic(count, seed)
        raise ConfigError(f"noise.eigenvalues.rule: unknown rule {rule!r}")
    try:
        return NoiseSpec(tuple(float(x) for x in eigs), seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"noise.eigenvalues: {exc}") from exc


@dataclass(eq=False)
class ExperimentConfig:
    """Validated experiment: all parts share one dimension.

    Equality-sensitive uses should compare ``to_dict()`` documents (the
    canonical form); the object itself holds live arrays.
    """

    cone: ConeSpec
    semigroup: DiagonalSemigroup
    coeffs: CoefficientSet
    noise: NoiseSpec
    sim: SimConfig
    sampler: SamplerSpec
    h0: StateVec
    check_tol: float | None = None
    out: str | None = None

    @property
    def dim(self) -> int:
        return self.cone.dim

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = _expand(doc)

        space = _section(doc, "space")
        dim = _field(space, "space", "dim", required=True)
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"space.dim: must be a positive integer, got {dim!r}")
        cone_doc = _field(space, "space", "cone", required=True)
        if cone_doc == "nonnegative":
            cone = ConeSpec.nonnegative(dim)
        elif isinstance(cone_doc, dict) and "signs" in cone_doc:
            try:
                cone = ConeSpec.from_config(cone_doc)
            except ConeSpdeError as exc:
                raise ConfigError(f"space.cone: {exc}") from exc
            if cone.dim != dim:
                raise ConfigError(
                    f"space.cone: {cone.dim} signs for dimension {dim}"
                )
        else:
            raise ConfigError(
                "space.cone: expected 'nonnegative' or an object with 'signs'"
            )

        try:
            sg = DiagonalSemigroup.from_config(_section(doc, "semigroup"), dim=dim)
        except ConeSpdeError as exc:
            raise ConfigError(f"semigroup: {exc}") from exc
        if len(sg.rates) != dim:
            raise ConfigError(
                f"semigroup: {len(sg.rates)} rates for dimension {dim}"
            )

        try:
            coeffs = CoefficientSet.from_config(_section(doc, "coefficients"), dim)
        except ConeSpdeError as exc:
            raise ConfigError(f"coefficients: {exc}") from exc

        noise = _noise_from(_section(doc, "noise"))
        if noise.count != len(coeffs.vol_columns):
            raise ConfigError(
                f"noise: {noise.count} eigenvalues for "
                f"{len(coeffs.vol_columns)} volatility columns"
            )

        sim_doc = _section(doc, "sim")
        try:
            sim = SimConfig(
                dt=float(_field(sim_doc, "sim", "dt", required=True)),
                horizon=float(_field(sim_doc, "sim", "horizon", required=True)),
                paths=int(_field(sim_doc, "sim", "paths", required=True)),
                scheme=str(_field(sim_doc, "sim", "scheme", default="exponential-euler")),
                exit_tol=float(_field(sim_doc, "sim", "exit_tol", default=1e-8)),
                guard=float(_field(sim_doc, "sim", "guard", default=1e12)),
                store_trajectories=bool(
                    _field(sim_doc, "sim", "store_trajectories", default=False)
                ),
            )
        except ConeSpdeError as exc:
            raise ConfigError(f"sim: {exc}") from exc

        chk = _section(doc, "checker", required=False)
        try:
            sampler = SamplerSpec(
                points_per_face=int(_field(chk, "checker", "points_per_face", default=64)),
                interior_points=int(_field(chk, "checker", "interior_points", default=64)),
                seed=int(_field(chk, "checker", "seed", default=0)),
                include_corners=bool(_field(chk, "checker", "include_corners", default=True)),
            )
        except ConeSpdeError as exc:
            raise ConfigError(f"checker: {exc}") from exc
        tol = chk.get("tol")
        if tol is not None:
            tol = float(tol)
            if tol <= 0:
                raise ConfigError(f"checker.tol: must be > 0, got {tol}")

        init = doc.get("initial")
        if init is None:
            raise ConfigError("initial: missing section")
        try:
            h0 = StateVec(np.asarray(init, dtype=np.float64))
        except (ConeSpdeError, TypeError, ValueError) as exc:
            raise ConfigError(f"initial: {exc}") from exc
        if h0.dim != dim:
            raise ConfigError(f"initial: {h0.dim} coordinates for dimension {dim}")

        out = doc.get("out")
        if out is not None and not isinstance(out, str):
            raise ConfigError("out: must be a string path")

        return cls(
            cone=cone,
            semigroup=sg,
            coeffs=coeffs,
            noise=noise,
            sim=sim,
            sampler=sampler,
            h0=h0,
            check_tol=tol,
            out=out,
        )

    def to_dict(self) -> dict:
        """Canonical, fully materialized document."""
        doc = {
            "space": {"dim": self.dim, "cone": self.cone.to_config()},
            "semigroup": self.semigroup.to_config(),
            "coefficients": self.coeffs.to_config(),
            "noise": {
                "eigenvalues": [float(x) for x in self.noise.eigenvalues],
                "seed": self.noise.seed,
            },
            "sim": {
                "dt": self.sim.dt,
                "horizon": self.sim.horizon,
                "paths": self.sim.paths,
                "scheme": self.sim.scheme,
                "exit_tol": self.sim.exit_tol,
                "guard": self.sim.guard,
                "store_trajectories": self.sim.store_trajectories,
            },
            "checker": {
                "points_per_face": self.sampler.points_per_face,
                "interior_points": self.sampler.interior_points,
                "seed": self.sampler.seed,
                "include_corners": self.sampler.include_corners,
            },
            "initial": [float(x) for x in self.h0.coords],
        }
        if self.check_tol is not None:
            doc["checker"]["tol"] = self.check_tol
        if self.out is not None:
            doc["out"] = self.out
        return doc

    def content_hash(self) -> str:
        return content_hash(self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
        return cls.from_dict(doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.to_dict()) + "\n")


def canonical_json(doc: dict) -> str:
    """Deterministic serialization: sorted keys, minimal separators."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(doc: dict) -> str:
    """sha256 of the canonical form; the run's content address."""
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()
