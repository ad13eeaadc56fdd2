"""One-sided kernels on [0, 1] and their mirror images on [-1, 0].

The right kernel is the Epanechnikov (or triangular / uniform) profile
restricted to [0, 1] and renormalized to a density there:

    epanechnikov  K(u) = 1.5 (1 - u^2)
    triangular    K(u) = 2 (1 - u)
    uniform       K(u) = 1

The support is treated as closed, so ``evaluate(spec, 0.0)`` returns the
peak value. The left kernel is ``K_l(u) = K_r(-u)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["Family", "Side", "KernelSpec", "evaluate", "evaluate_array", "kernel_from_name"]


class Family(enum.IntEnum):
    # integer values are the codes used by the compiled estimator core
    EPANECHNIKOV = 0
    TRIANGULAR = 1
    UNIFORM = 2


class Side(enum.Enum):
    RIGHT = "right"  # support [0, 1]
    LEFT = "left"  # support [-1, 0]


@dataclass(frozen=True)
class KernelSpec:
    family: Family = Family.EPANECHNIKOV
    side: Side = Side.RIGHT

    @property
    def code(self) -> int:
        return int(self.family)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.side is Side.RIGHT else (-1.0, 0.0)

    def mirrored(self) -> "KernelSpec":
        other = Side.LEFT if self.side is Side.RIGHT else Side.RIGHT
        return KernelSpec(self.family, other)


@njit(cache=True)
def right_kernel(code, u):
    """Right-supported kernel value; zero outside [0, 1]."""
    if u < 0.0 or u > 1.0:
        return 0.0
    if code == 0:
        return 1.5 * (1.0 - u * u)
    if code == 1:
        return 2.0 * (1.0 - u)
    return 1.0


def evaluate(spec: KernelSpec, u: float) -> float:
    if spec.side is Side.LEFT:
        u = -u
    return float(right_kernel(spec.code, float(u)))


def evaluate_array(spec: KernelSpec, u) -> np.ndarray:
    """Vectorized :func:`evaluate`."""
    u = np.asarray(u, dtype=float)
    if spec.side is Side.LEFT:
        u = -u
    inside = (u >= 0.0) & (u <= 1.0)
    if spec.family is Family.EPANECHNIKOV:
        val = 1.5 * (1.0 - u * u)
    elif spec.family is Family.TRIANGULAR:
        val = 2.0 * (1.0 - u)
    else:
        val = np.ones_like(u)
    return np.where(inside, val, 0.0)


def kernel_from_name(name: str, side: Side = Side.RIGHT) -> KernelSpec:
    try:
        family = Family[name.strip().upper()]
    except KeyError:
        choices = ", ".join(f.name.lower() for f in Family)
        raise ValueError(f"unknown kernel {name!r}; expected one of {choices}") from None
    return KernelSpec(family, side)
