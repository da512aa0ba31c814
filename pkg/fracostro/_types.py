import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from fracostro._errors import DomainError

# Orders closer than this to an integer are treated as that integer.
ORDER_TOLERANCE = 1e-12


def _complex_json(value: complex) -> list[float]:
    return [float(value.real), float(value.imag)]


@dataclass(frozen=True)
class UniformGrid:
    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError(f"Grid endpoints must be finite: a={self.a}, b={self.b}")
        if self.b <= self.a:
            raise DomainError(f"Grid requires b > a, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"Grid requires an integer sample count >= 2, got {self.n}")

    @property
    def dt(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    def times(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n)

    def json(self) -> dict:
        return {"a": self.a, "b": self.b, "n": self.n, "dt": self.dt}


@dataclass(frozen=True)
class FracOrder:
    """Derivative order ``total = m + frac`` with integer ``m >= 0`` and ``0 <= frac < 1``."""

    total: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.total) or self.total < 0:
            raise DomainError(f"Fractional order must be finite and >= 0, got {self.total}")
        nearest = round(self.total)
        if abs(self.total - nearest) < ORDER_TOLERANCE:
            object.__setattr__(self, "total", float(nearest))

    @property
    def m(self) -> int:
        return int(math.floor(self.total))

    @property
    def frac(self) -> float:
        return self.total - self.m

    @property
    def is_integer(self) -> bool:
        return self.frac == 0.0

    def json(self) -> dict:
        return {"total": self.total, "m": self.m, "frac": self.frac}


def as_order(order: "float | FracOrder") -> FracOrder:
    return order if isinstance(order, FracOrder) else FracOrder(float(order))


@dataclass(frozen=True)
class GLWeights:
    order: FracOrder
    w: np.ndarray

    def json(self) -> dict:
        return {"order": self.order.json(), "w": [float(v) for v in self.w]}


@dataclass(frozen=True)
class SampledPath:
    """Trajectory or derived quantity sampled on a uniform grid.

    ``low_accuracy`` lists grid indices whose Grünwald-Letnikov sum had fewer than
    four terms; the values are still returned.
    """

    grid: UniformGrid
    values: np.ndarray
    low_accuracy: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.ndim == 0:
            values = np.full(self.grid.n, complex(values))
        if values.shape != (self.grid.n,):
            raise DomainError(f"Path needs {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("Path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: UniformGrid, func: Callable[[np.ndarray], np.ndarray]) -> "SampledPath":
        return cls(grid, func(grid.times()))

    def with_values(self, values: np.ndarray, low_accuracy: tuple[int, ...] = ()) -> "SampledPath":
        return SampledPath(self.grid, values, low_accuracy)

    def interior(self) -> np.ndarray:
        """Indices excluding the endpoints and any low-accuracy samples."""
        flagged = set(self.low_accuracy) | {0, self.grid.n - 1}
        return np.array([i for i in range(self.grid.n) if i not in flagged], dtype=int)

    def json(self) -> dict:
        return {
            "grid": self.grid.json(),
            "values": [_complex_json(v) for v in self.values],
            "low_accuracy": list(self.low_accuracy),
        }
