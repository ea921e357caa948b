"""Normalized state vectors over the product basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QuantumState:
    coefficients: np.ndarray
    energy: float = float("nan")
    residual: float = float("nan")

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.ndim != 1:
            raise ValueError("state coefficients must be a vector")
        norm = float(np.linalg.norm(self.coefficients))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm {norm!r})")

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    @classmethod
    def normalized(cls, vector, energy: float = float("nan"), residual: float = float("nan")) -> "QuantumState":
        v = np.asarray(vector, dtype=complex)
        return cls(v / np.linalg.norm(v), energy, residual)

    def fixed_phase(self) -> "QuantumState":
        """Copy with the global phase chosen so the largest coefficient is real positive."""
        c = self.coefficients
        big = c[int(np.argmax(np.abs(c)))]
        return QuantumState(c * (abs(big) / big), self.energy, self.residual)
