"""
Models for the benchmark objective harness
"""

from typing import List, Optional, Tuple

from pydantic import Field, model_validator

from .base import BaseModel, BaseReportModel


class KnownMinimum(BaseReportModel):
    """A catalogued minimum and the tolerance it is verified at"""

    point: List[float]
    value: float
    tolerance: float = 1e-9
    source: str = "analytic"


class Objective(BaseModel):
    """A benchmark function with its box domain and catalogued minima

    ``arity`` is None for functions defined in any dimension; their bounds
    apply to every coordinate.
    """

    name: str
    arity: Optional[int] = None
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    minima: Tuple[KnownMinimum, ...] = ()

    @model_validator(mode="after")
    def _check_bounds(self) -> "Objective":
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds need the same length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("every lower bound must lie below its upper bound")
        if self.arity is not None and len(self.lower) != self.arity:
            raise ValueError("bounds must match the arity")
        return self

    def bounds(self, dimension: int) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        if self.arity is None:
            return (self.lower[0],) * dimension, (self.upper[0],) * dimension
        return self.lower, self.upper


class MinimumCheck(BaseReportModel):
    point: List[float]
    expected: float
    actual: float
    tolerance: float
    passed: bool


class OptimizationResult(BaseReportModel):
    """Best point found by a multi-start search"""

    name: str
    best_point: List[float]
    best_value: float
    evals: int = Field(ge=0)
    restarts: int = Field(ge=1)

    def row(self) -> str:
        """``name,best_value,best_point,evals`` with the point space-separated"""
        point = " ".join(repr(float(v)) for v in self.best_point)
        return f"{self.name},{self.best_value!r},{point},{self.evals}"
