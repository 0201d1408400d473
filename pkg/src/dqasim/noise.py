"""Link-noise channels for the shared GHZ resources.

Both models act per qubit. ``p`` is always the full parameter: dephasing
flips the phase with probability ``p/2`` and damps coherences by ``1 - p``;
depolarising mixes towards ``I/2`` with weight ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qkernel import I2, X, Y, Z, DensityMatrix, KrausChannel, apply_kraus

KINDS = ("none", "dephasing", "depolarising")
_ALIASES = {"depolarizing": "depolarising", "noiseless": "none"}


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    p: float = 0.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        p = float(self.p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"noise probability p={p} outside [0, 1]")
        if kind == "none":
            p = 0.0
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_half_p(cls, kind: str, half_p: float) -> "NoiseModel":
        """Build from the ``p/2`` value used when reporting dephasing strengths."""
        return cls(kind, 2.0 * float(half_p))

    @property
    def is_noiseless(self) -> bool:
        return self.kind == "none" or self.p == 0.0

    def channel(self) -> KrausChannel:
        if self.kind == "dephasing":
            return dephasing_channel(self.p)
        if self.kind == "depolarising":
            return depolarising_channel(self.p)
        return KrausChannel((I2,))


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise probability p={p} outside [0, 1]")
    return p


def dephasing_channel(p: float) -> KrausChannel:
    p = _check_p(p)
    return KrausChannel((np.sqrt(1 - p / 2) * I2, np.sqrt(p / 2) * Z))


def depolarising_channel(p: float) -> KrausChannel:
    p = _check_p(p)
    w = np.sqrt(p / 4)
    return KrausChannel((np.sqrt(1 - 3 * p / 4) * I2, w * X, w * Y, w * Z))


def apply_link_noise(
    rho: DensityMatrix, ghz_qubits: Sequence[int], model: NoiseModel
) -> DensityMatrix:
    """Apply the model's one-qubit channel independently to each listed qubit."""
    if model.is_noiseless:
        return rho
    ch = model.channel()
    for q in ghz_qubits:
        rho = apply_kraus(rho, ch, [q])
    return rho
