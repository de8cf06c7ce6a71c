"""Ready-made generators for common few-level benchmark systems.

All models are written in the frame where the controls enter as real
amplitudes multiplying fixed Hamiltonians.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import IDENTITY_2, SIGMA_X, SIGMA_Z, LindbladGenerator, transition

_DEFAULTS = {
    "TwoLevelDamping": {"omega": 1.0, "gamma": 1.0},
    "TwoLevelDephasing": {"omega": 1.0, "gamma_phi": 1.0},
    "LambdaDecay": {"delta": 0.0, "delta2": 0.0, "gamma0": 0.01, "gamma1": 0.01},
    "AnharmonicLadder": {
        "n_levels": 3,
        "omega": 1.0,
        "anharmonicity": -0.2,
        "gamma": 0.0,
        "flat_rate": False,
    },
    "TwoQubitDephasing": {"coupling": 1.0, "omega1": 1.0, "omega2": 1.0, "gamma_phi": 0.0},
}

MODEL_NAMES = tuple(_DEFAULTS)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _DEFAULTS:
            raise ValueError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        unknown = set(self.params) - set(_DEFAULTS[self.name])
        if unknown:
            raise ValueError(f"unknown parameters for {self.name}: {', '.join(sorted(unknown))}")
        merged = {**_DEFAULTS[self.name], **self.params}
        for key, value in merged.items():
            if key.startswith("gamma") and value < 0:
                raise ValueError(f"rate {key} must be nonnegative")
        if self.name == "AnharmonicLadder" and (int(merged["n_levels"]) != merged["n_levels"] or merged["n_levels"] < 3):
            raise ValueError("AnharmonicLadder needs an integer n_levels >= 3")
        object.__setattr__(self, "params", merged)


def build_model(spec: ModelSpec | str, **params) -> LindbladGenerator:
    """Construct the generator for `spec` (or a model name plus parameters)."""
    if isinstance(spec, str):
        spec = ModelSpec(spec, params)
    p = spec.params
    if spec.name == "TwoLevelDamping":
        return LindbladGenerator(
            0.5 * p["omega"] * SIGMA_Z, (SIGMA_X,), ((transition(0, 1, 2), p["gamma"]),)
        )
    if spec.name == "TwoLevelDephasing":
        return LindbladGenerator(0.5 * p["omega"] * SIGMA_Z, (SIGMA_X,), ((SIGMA_Z, p["gamma_phi"]),))
    if spec.name == "LambdaDecay":
        h0 = np.diag([0.0, p["delta2"], p["delta"]]).astype(complex)
        pump = transition(0, 2, 3) + transition(2, 0, 3)
        stokes = transition(1, 2, 3) + transition(2, 1, 3)
        channels = ((transition(0, 2, 3), p["gamma0"]), (transition(1, 2, 3), p["gamma1"]))
        return LindbladGenerator(h0, (pump, stokes), channels)
    if spec.name == "AnharmonicLadder":
        n = int(p["n_levels"])
        k = np.arange(n)
        h0 = np.diag(p["omega"] * k + 0.5 * p["anharmonicity"] * k * (k - 1)).astype(complex)
        h1 = np.diag(np.sqrt(k[1:]), 1).astype(complex)
        h1 = h1 + h1.T
        channels = tuple(
            (transition(j - 1, j, n), p["gamma"] * (1 if p["flat_rate"] else j)) for j in range(1, n)
        )
        return LindbladGenerator(h0, (h1,), channels)
    # TwoQubitDephasing
    h0 = (
        p["coupling"] * np.kron(SIGMA_Z, SIGMA_Z)
        + 0.5 * p["omega1"] * np.kron(SIGMA_Z, IDENTITY_2)
        + 0.5 * p["omega2"] * np.kron(IDENTITY_2, SIGMA_Z)
    )
    controls = (np.kron(SIGMA_X, IDENTITY_2), np.kron(IDENTITY_2, SIGMA_X))
    channels = (
        (np.kron(SIGMA_Z, IDENTITY_2), p["gamma_phi"]),
        (np.kron(IDENTITY_2, SIGMA_Z), p["gamma_phi"]),
    )
    return LindbladGenerator(h0, controls, channels)


def logical_subspace(spec: ModelSpec | str) -> list[int]:
    """Basis indices of the computational subspace of the model."""
    name = spec if isinstance(spec, str) else spec.name
    if name not in _DEFAULTS:
        raise ValueError(f"unknown model {name!r}")
    if name == "TwoQubitDephasing":
        return [0, 1, 2, 3]
    return [0, 1]
