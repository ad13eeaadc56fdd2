"""Synthetic samples from the error-in-variables jump regression model.

A latent ``X`` is drawn from ``f_X``, observed as ``W = X + sigma * U``
with ``U`` standardized (mean 0, variance 1), and ``Y | X`` is Gaussian or
Bernoulli around a piecewise mean function with a single jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from .errors import InvalidConfig
from .estimators import ObservedSample

__all__ = [
    "Piecewise",
    "ResponseModel",
    "GeneratorConfig",
    "JumpTruth",
    "GeneratedData",
    "standardized_draw",
    "generate",
    "builtin_response",
    "BUILTIN_RESPONSES",
]

UDist = Literal["normal", "laplace", "uniform"]
U_DISTS = ("normal", "laplace", "uniform")


@dataclass(frozen=True)
class Piecewise:
    """Piecewise function with one jump at ``jump``.

    ``left`` applies for ``x < jump`` (or ``x <= jump`` when
    ``closed_left``), ``right`` otherwise. The exact branch convention at
    the jump itself does not affect the one-sided limits.
    """

    jump: float
    left: Callable[[np.ndarray], np.ndarray]
    right: Callable[[np.ndarray], np.ndarray]
    closed_left: bool = False
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        on_left = x <= self.jump if self.closed_left else x < self.jump
        return np.where(on_left, self.left(x), self.right(x))

    def limits(self) -> tuple[float, float]:
        s = np.array([self.jump])
        return float(self.left(s)[0]), float(self.right(s)[0])


@dataclass(frozen=True)
class ResponseModel:
    """``kind='gaussian'``: ``Y ~ N(mean_fn(X), sd^2)``; ``kind='bernoulli'``: ``Y ~ Bern(mean_fn(X))``."""

    kind: Literal["gaussian", "bernoulli"]
    mean_fn: Piecewise
    sd: float = 0.0
    name: str = "custom"
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise InvalidConfig(f"unknown response kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sd >= 0:
            raise InvalidConfig("gaussian sd must be non-negative")
        if self.kind == "bernoulli":
            p = self.mean_fn(np.linspace(*self.domain, 10001))
            if np.any(p < 0) or np.any(p > 1):
                raise InvalidConfig(f"{self.name}: success probability leaves [0, 1]")

    def truth(self) -> "JumpTruth":
        lo, hi = self.mean_fn.limits()
        return JumpTruth(self.mean_fn.jump, hi - lo)

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        m = self.mean_fn(x)
        if self.kind == "gaussian":
            return m + self.sd * rng.standard_normal(x.shape) if self.sd > 0 else m
        return (rng.random(x.shape) < m).astype(float)


def _ex1():
    mean = Piecewise(
        0.5,
        lambda x: -np.sin(2 * np.pi * x),
        lambda x: -np.sin(2 * np.pi * x) + 1.0,
        closed_left=True,
        label="-sin(2 pi x) + 1[x > 0.5]",
    )
    return ResponseModel("gaussian", mean, sd=0.01, name="ex1")


def _ex2():
    mean = Piecewise(
        0.5,
        lambda x: 1.0 - x**2,
        lambda x: 0.5 * (1.0 - x) ** 2,
        closed_left=True,
        label="1 - x^2 | 0.5 (1 - x)^2",
    )
    return ResponseModel("bernoulli", mean, name="ex2")


def _compare():
    mean = Piecewise(
        0.6,
        lambda x: 25.0 / 36.0 * x**2 + 0.15,
        lambda x: 12.0 * (x - 0.8) ** 3 + 0.596,
        label="25/36 x^2 + 0.15 | 12 (x - 0.8)^3 + 0.596",
    )
    return ResponseModel("bernoulli", mean, name="compare")


def _phi():
    # take-up rate against log income: ~0.2 below the threshold, a 0.19 jump at 10.93
    mean = Piecewise(
        10.93,
        lambda x: 0.12 + 0.13 * ((x - 9.8) / 1.13) ** 2,
        lambda x: 0.44 + 0.25 * (x - 10.93) / 0.37,
        label="PHI-like take-up rate",
    )
    return ResponseModel("bernoulli", mean, name="phi", domain=(9.8, 11.3))


BUILTIN_RESPONSES = {"ex1": _ex1, "ex2": _ex2, "compare": _compare, "phi": _phi}


def builtin_response(name: str) -> ResponseModel:
    try:
        return BUILTIN_RESPONSES[name]()
    except KeyError:
        raise InvalidConfig(f"unknown builtin response {name!r}") from None


@dataclass(frozen=True)
class JumpTruth:
    location: float
    magnitude: float


@dataclass(frozen=True)
class GeneratorConfig:
    """Design of one synthetic sample.

    Exactly one of ``variance_ratio`` (``Var(sigma U) / Var(X)``) and
    ``sigma`` (absolute error sd, 0 allowed) must be set.
    ``x_dist`` is ``"uniform"`` or ``("beta", a, b)`` on ``[0, 1]``, mapped
    affinely onto ``x_range``.
    """

    n: int
    response: ResponseModel = field(default_factory=_ex1)
    x_dist: str | tuple = "uniform"
    u_dist: UDist = "normal"
    variance_ratio: float | None = None
    sigma: float | None = None
    seed: int | None = 0
    x_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidConfig("n must be positive")
        if self.u_dist not in U_DISTS:
            raise InvalidConfig(f"u_dist must be one of {U_DISTS}, got {self.u_dist!r}")
        if (self.variance_ratio is None) == (self.sigma is None):
            raise InvalidConfig("set exactly one of variance_ratio and sigma")
        if self.variance_ratio is not None and not 0 < self.variance_ratio <= 1:
            raise InvalidConfig("variance_ratio must lie in (0, 1]")
        if self.sigma is not None and not self.sigma >= 0:
            raise InvalidConfig("sigma must be non-negative")
        if isinstance(self.x_dist, tuple):
            if len(self.x_dist) != 3 or self.x_dist[0] != "beta" or min(self.x_dist[1:]) <= 0:
                raise InvalidConfig(f"bad x_dist {self.x_dist!r}")
        elif self.x_dist != "uniform":
            raise InvalidConfig(f"bad x_dist {self.x_dist!r}")
        if not self.x_range[0] < self.x_range[1]:
            raise InvalidConfig(f"bad x_range {self.x_range!r}")

    @property
    def x_variance(self) -> float:
        width = self.x_range[1] - self.x_range[0]
        if self.x_dist == "uniform":
            return width**2 / 12.0
        _, a, b = self.x_dist
        return width**2 * a * b / ((a + b) ** 2 * (a + b + 1))

    @property
    def error_sd(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        return math.sqrt(self.variance_ratio * self.x_variance)

    def with_seed(self, seed) -> "GeneratorConfig":
        return replace(self, seed=seed)


@dataclass
class GeneratedData:
    sample: ObservedSample
    latent: np.ndarray  # X aligned with sample.w
    truth: JumpTruth


def standardized_draw(u_dist: UDist, rng: np.random.Generator, size=None):
    """Draws with mean 0 and variance 1 from the named family."""
    if u_dist == "normal":
        return rng.standard_normal(size)
    if u_dist == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
    if u_dist == "uniform":
        r = math.sqrt(3.0)
        return rng.uniform(-r, r, size)
    raise InvalidConfig(f"unknown error distribution {u_dist!r}")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate(config: GeneratorConfig, rng=None) -> GeneratedData:
    """Draw ``X``, ``U`` and ``Y`` in that order from one stream."""
    rng = _rng(config.seed if rng is None else rng)
    n = int(config.n)
    if config.x_dist == "uniform":
        x = rng.random(n)
    else:
        _, a, b = config.x_dist
        x = rng.beta(a, b, n)
    lo, hi = config.x_range
    if (lo, hi) != (0.0, 1.0):
        x = lo + (hi - lo) * x
    u = standardized_draw(config.u_dist, rng, n)
    w = x + config.error_sd * u
    y = config.response.sample(x, rng)
    order = np.argsort(w, kind="mergesort")
    return GeneratedData(
        sample=ObservedSample(w[order], y[order]),
        latent=x[order],
        truth=config.response.truth(),
    )
