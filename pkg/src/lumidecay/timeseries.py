"""Ordered intensity samples shared by the kinetics and fitting modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lumidecay.errors import DomainError

Array = np.ndarray


@dataclass(frozen=True)
class TimeSeries:
    """Normalized intensity samples :math:`I(t_i)`."""

    t: Array
    """Strictly increasing sample times."""
    intensity: Array
    """Dimensionless intensities, one per time."""
    weights: Array | None = field(default=None)
    """Optional non-negative least-squares weights."""

    def __post_init__(self) -> None:
        t = np.array(self.t, dtype=np.float64).ravel()
        y = np.array(self.intensity, dtype=np.float64).ravel()
        if t.size != y.size:
            raise DomainError(
                f"t and intensity have different lengths: {t.size} != {y.size}"
            )
        if not np.all(np.isfinite(t)):
            raise DomainError("times must be finite")
        if not np.all(np.isfinite(y)):
            raise DomainError("intensities must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            i = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
            raise DomainError(f"times must be strictly increasing (sample {i})")

        w = self.weights
        if w is not None:
            w = np.array(w, dtype=np.float64).ravel()
            if w.size != t.size:
                raise DomainError(
                    f"weights have length {w.size}, expected {t.size}"
                )
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise DomainError("weights must be finite and non-negative")
            w.setflags(write=False)

        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "intensity", y)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.t.size

    def with_poisson_weights(self, floor: float = 1.0e-3) -> TimeSeries:
        """Copy with photon-counting weights ``1 / max(I, floor)``."""
        w = 1.0 / np.maximum(self.intensity, floor)
        return TimeSeries(self.t, self.intensity, w)
