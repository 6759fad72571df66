"""Network parameters for the two-branch fork-join network and their validation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import NonPositiveRate, UnstableBranch, ZeroChannels

CONFIG_KEYS = ("lambda", "n_a", "n_b", "mu_a", "mu_b", "seed")


@dataclass(frozen=True)
class NetworkParams:
    """Poisson arrivals at rate ``lam`` forked into M/M/n_a and M/M/n_b branches."""

    lam: float
    n_a: int
    n_b: int
    mu_a: float
    mu_b: float

    @property
    def psi_a(self) -> float:
        return self.lam / (self.n_a * self.mu_a)

    @property
    def psi_b(self) -> float:
        return self.lam / (self.n_b * self.mu_b)

    @classmethod
    def from_loads(cls, lam: float, n_a: int, n_b: int, psi_a: float, psi_b: float) -> "NetworkParams":
        """Build parameters from per-branch loads, deriving the service rates."""
        if psi_a <= 0 or psi_b <= 0:
            raise NonPositiveRate(f"loads must be positive, got psi_a={psi_a}, psi_b={psi_b}")
        if n_a < 1 or n_b < 1:
            raise ZeroChannels(f"channel counts must be >= 1, got n_a={n_a}, n_b={n_b}")
        return cls(lam=lam, n_a=n_a, n_b=n_b, mu_a=lam / (n_a * psi_a), mu_b=lam / (n_b * psi_b))

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "n_a": self.n_a, "n_b": self.n_b, "mu_a": self.mu_a, "mu_b": self.mu_b}


def validate_params(p: NetworkParams) -> NetworkParams:
    """Check rates, channel counts and branch stability; return ``p`` unchanged."""
    for name in ("lam", "mu_a", "mu_b"):
        v = getattr(p, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise NonPositiveRate(f"{name} must be a positive finite number, got {v!r}")
    for name in ("n_a", "n_b"):
        v = getattr(p, name)
        if int(v) != v or v < 1:
            raise ZeroChannels(f"{name} must be an integer >= 1, got {v!r}")
    for branch, psi in (("a", p.psi_a), ("b", p.psi_b)):
        if not psi < 1.0:
            raise UnstableBranch(f"branch {branch} load psi_{branch}={psi:.6g} must be < 1")
    return p


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        out[key] = int(value) if key in ("n_a", "n_b", "seed") else float(value)
    return out


def load_config(path: str | Path) -> dict:
    return parse_config(Path(path).read_text())


def params_from_mapping(m: dict) -> NetworkParams:
    missing = [k for k in ("lambda", "n_a", "n_b", "mu_a", "mu_b") if m.get(k) is None]
    if missing:
        raise ValueError(f"missing parameters: {', '.join(missing)}")
    return validate_params(
        NetworkParams(lam=float(m["lambda"]), n_a=int(m["n_a"]), n_b=int(m["n_b"]),
                      mu_a=float(m["mu_a"]), mu_b=float(m["mu_b"]))
    )
