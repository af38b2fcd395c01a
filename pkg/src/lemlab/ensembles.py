"""Seeded i.i.d. root samplers for uniform measures on ``r*D`` and ``r*S^1``."""

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import SchemaError, ValidationError
from .poly import RootedPolynomial

SQRT_E = math.sqrt(math.e)


class Family(str, enum.Enum):
    DISK = "disk"
    CIRCLE = "circle"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"uniformdisk": "disk", "uniformcircle": "circle"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown family {value!r}; expected 'disk' or 'circle'") from None


@dataclass(frozen=True)
class EnsembleSpec:
    family: Family
    r: float = 1.0
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValidationError(f"scale r must be positive, got {self.r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"degree n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r", float(self.r))


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must be a 64-bit unsigned integer")
        if self.trial_index < 0:
            raise ValidationError("trial_index must be non-negative")

    def generator(self) -> np.random.Generator:
        # Philox is counter based; the key is a SeedSequence hash of (master, trial)
        ss = np.random.SeedSequence([int(self.master_seed), int(self.trial_index)])
        return np.random.Generator(np.random.Philox(ss))


def sample_roots(family, r, n, rng: np.random.Generator) -> np.ndarray:
    family = Family.parse(family)
    theta = 2.0 * np.pi * rng.random(n)
    if family is Family.CIRCLE:
        radius = np.full(n, float(r))
    else:
        radius = float(r) * np.sqrt(rng.random(n))
    return radius * np.exp(1j * theta)


def sample_polynomial(spec: EnsembleSpec, seed: SeedPolicy) -> RootedPolynomial:
    """Draw ``spec.n`` i.i.d. roots from the ensemble with a per-trial stream."""
    roots = sample_roots(spec.family, spec.r, spec.n, seed.generator())
    return RootedPolynomial(
        roots,
        r_max=spec.r,
        family=spec.family.value,
        scale=spec.r,
        seed=(int(seed.master_seed), int(seed.trial_index)),
    )


class TheoreticalProperties(NamedTuple):
    potential: Callable
    cauchy: Callable
    phase: str


def predicted_phase(family, r) -> str:
    """Expected-component regime for the ensemble at scale ``r``."""
    family = Family.parse(family)
    if r < 1:
        return "one component"
    if family is Family.CIRCLE:
        return "n/2" if r == 1 else "n"
    if r == 1:
        return "√n order"
    if math.isclose(r, SQRT_E, rel_tol=1e-12):
        return "ambiguous in source"
    return "linear" if r < SQRT_E else "n"


def theoretical_properties(spec: EnsembleSpec) -> TheoreticalProperties:
    from . import potential

    prof = potential.profile(spec)
    return TheoreticalProperties(prof.U, prof.cauchy, predicted_phase(spec.family, spec.r))


# --- JSON interchange -------------------------------------------------------


def poly_to_dict(poly: RootedPolynomial) -> dict:
    seed = list(poly.seed) if poly.seed is not None else None
    r = poly.scale if poly.scale is not None else (None if math.isinf(poly.r_max) else poly.r_max)
    return {
        "n": poly.degree,
        "family": poly.family,
        "r": r,
        "seed": seed,
        "roots": [[float(z.real), float(z.imag)] for z in poly.roots],
    }


def poly_from_dict(doc: dict) -> RootedPolynomial:
    if not isinstance(doc, dict) or "roots" not in doc:
        raise SchemaError("root document must be an object with a 'roots' array")
    roots = doc["roots"]
    if not isinstance(roots, list) or not roots:
        raise SchemaError("'roots' must be a non-empty list of [re, im] pairs")
    try:
        arr = np.array([complex(float(a), float(b)) for a, b in roots])
    except (TypeError, ValueError):
        raise SchemaError("'roots' must be a list of [re, im] pairs") from None
    n = doc.get("n", arr.size)
    if n != arr.size:
        raise SchemaError(f"'n' is {n} but {arr.size} roots were given")
    family = doc.get("family")
    if family is not None:
        family = Family.parse(family).value
    r = doc.get("r")
    seed = doc.get("seed")
    if seed is not None:
        if not (isinstance(seed, list) and len(seed) == 2):
            raise SchemaError("'seed' must be [master, trial]")
        seed = (int(seed[0]), int(seed[1]))
    return RootedPolynomial(
        arr,
        r_max=float(r) if r is not None else math.inf,
        family=family,
        scale=float(r) if r is not None else None,
        seed=seed,
    )


def dumps(poly: RootedPolynomial, **extra) -> str:
    doc = poly_to_dict(poly)
    doc.update(extra)
    return json.dumps(doc, indent=1)


def loads(text: str) -> RootedPolynomial:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return poly_from_dict(doc)
