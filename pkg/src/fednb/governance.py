"""CRISC governance variables and the Institutional Coherence Index.

Each node carries four audit indicators: control maturity (cmm, 1..5),
proportion of implemented controls (kci, 0..1), risk-alert activation
frequency (kri, 0..1, lower is better) and mean vulnerability score
(cvss, 0..10, lower is better). Their product, each factor normalized to
[0, 1] with the "lower is better" factors inverted, is the node's
coherence index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePriorError


@dataclass(frozen=True)
class NodeProfile:
    name: str
    cmm: int
    kci: float
    kri: float
    cvss: float

    def __post_init__(self):
        if not 1 <= self.cmm <= 5:
            raise ValueError(f"{self.name}: cmm {self.cmm} outside [1, 5]")
        if not 0.0 <= self.kci <= 1.0:
            raise ValueError(f"{self.name}: kci {self.kci} outside [0, 1]")
        if not 0.0 <= self.kri <= 1.0:
            raise ValueError(f"{self.name}: kri {self.kri} outside [0, 1]")
        if not 0.0 <= self.cvss <= 10.0:
            raise ValueError(f"{self.name}: cvss {self.cvss} outside [0, 10]")


def compute_icc(profile: NodeProfile) -> float:
    """Coherence index: (cmm/5) * kci * (1 - kri) * (1 - cvss/10), in [0, 1]."""
    return (profile.cmm / 5.0) * profile.kci * (1.0 - profile.kri) * (1.0 - profile.cvss / 10.0)


def normalize_prior(iccs) -> np.ndarray:
    """Sum-to-one normalization of a non-negative coherence vector."""
    v = np.asarray(iccs, dtype=np.float64)
    if (v < 0).any():
        raise ValueError("coherence values must be non-negative")
    total = v.sum()
    if total <= 0.0:
        raise DegeneratePriorError("all-zero coherence vector")
    return v / total


@dataclass(frozen=True)
class IccPrior:
    """Per-node coherence indices plus their simplex normalization."""

    icc: tuple[float, ...]
    normalized: np.ndarray

    @staticmethod
    def from_profiles(profiles) -> "IccPrior":
        iccs = tuple(compute_icc(p) for p in profiles)
        return IccPrior(iccs, normalize_prior(iccs))
