"""Experiment configuration documents (YAML) and the germ schema.

Germ schema::

    germ:
      M: [1, 1]
      a: [[-0.5, 0.0], [-0.5, 0.0]]        # (re, im) pairs
      A:                                  # one list per coordinate
        - [[[2, 0], 0.3, 0.0]]            # (multi-index, re, im) monomials
        - []
      degree: 2                           # truncation degree (optional)
      radius: 1.0                         # trusted polydisc radius
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import yaml

from .germ import Germ, Polynomial


def germ_to_dict(g: Germ) -> dict:
    return {
        "M": list(g.M),
        "a": [[float(v.real), float(v.imag)] for v in g.a],
        "A": [[[list(e), float(c.real), float(c.imag)] for e, c in P.terms()] for P in g.A],
        "degree": int(g.degree),
        "radius": float(g.radius),
    }


def germ_from_dict(doc: dict) -> Germ:
    M = [int(v) for v in doc["M"]]
    n = len(M)

    def cplx(v):
        if isinstance(v, (list, tuple)):
            return complex(float(v[0]), float(v[1]) if len(v) > 1 else 0.0)
        return complex(v)

    a = [cplx(v) for v in doc["a"]]
    raw = doc.get("A") or [[] for _ in range(n)]
    if len(raw) != n:
        raise ValueError("A must hold one monomial list per coordinate")
    A = []
    for terms in raw:
        A.append(Polynomial(n, [(tuple(int(k) for k in t[0]), complex(float(t[1]), float(t[2]) if len(t) > 2 else 0.0)) for t in terms or []]))
    return Germ(tuple(M), tuple(a), tuple(A), int(doc.get("degree", 0)), float(doc.get("radius", 1.0)))


@dataclass
class PetalOverrides:
    epsilon: Optional[float] = None
    theta: float = math.pi / 4
    gamma: Optional[float] = None
    delta: Optional[float] = None
    delta_prime: Optional[float] = None
    r: Optional[float] = None


@dataclass
class Samples:
    calibration: int = 10_000
    invariance: int = 10_000
    invariants: int = 1_000
    pairs: int = 100
    chart: int = 1_000
    covering: int = 100_000
    escape: int = 10_000
    flower: int = 2_000

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"sample size {f.name} must be >= 1")


@dataclass
class Tolerances:
    psi: float = 1e-10
    chart: float = 1e-10
    roundtrip: float = 1e-8
    model_roundtrip: float = 1e-12
    beta: float = 1e-9
    conjugacy: float = 1e-6
    flower_limit: float = 1e-2
    boundary_band: float = 1e-3
    covering_fraction: float = 0.999

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name} must be positive")


@dataclass
class Budgets:
    forward: int = 1_000_000
    backward: int = 1_000_000
    flower_j: int = 100_000
    flower_net: int = 2_000
    persist: int = 64

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"budget {f.name} must be >= 1")


@dataclass
class ExperimentConfig:
    germ: dict = field(default_factory=lambda: {"M": [1, 1], "a": [[-0.5, 0.0], [-0.5, 0.0]]})
    petal: PetalOverrides = field(default_factory=PetalOverrides)
    samples: Samples = field(default_factory=Samples)
    tolerances: Tolerances = field(default_factory=Tolerances)
    budgets: Budgets = field(default_factory=Budgets)
    seed: int = 0
    escape_delta: float = 0.1
    flower_start: list = field(default_factory=lambda: [0.01, 0.0])
    out: str = "out"

    def build_germ(self) -> Germ:
        return germ_from_dict(self.germ)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "ExperimentConfig":
        doc = dict(doc or {})
        sub = {"petal": PetalOverrides, "samples": Samples, "tolerances": Tolerances, "budgets": Budgets}
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in doc.items():
            if k in sub:
                allowed = {f.name for f in fields(sub[k])}
                bad = set(v or {}) - allowed
                if bad:
                    raise ValueError(f"unknown keys in {k}: {sorted(bad)}")
                kw[k] = sub[k](**(v or {}))
            else:
                kw[k] = v
        cfg = cls(**kw)
        germ_from_dict(cfg.germ)  # validate early
        return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(yaml.safe_load(fh))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
