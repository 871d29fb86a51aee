"""Pass/fail records shared by the inequality checkers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

SAFETY = 3.0


@dataclass
class InequalityVerdict:
    """One instance of ``lhs <= rhs``.

    The verdict passes when lhs <= rhs + 3 * quad_error, so a quadrature
    error estimate never turns a true inequality into a reported failure.
    """

    inequality: str
    lhs: float
    rhs: float
    constant: float
    quad_error: float = 0.0
    delta: Optional[float] = None
    cone: Optional[str] = None
    member: Optional[str] = None
    lam: Optional[tuple] = None
    tags: list = field(default_factory=list)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs + SAFETY * self.quad_error)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["margin"] = self.margin
        out["passed"] = self.passed
        if self.lam is not None:
            out["lam"] = list(self.lam)
        return out

    def scaled(self, c: float) -> "InequalityVerdict":
        c = abs(c)
        return InequalityVerdict(self.inequality, c * self.lhs, c * self.rhs, self.constant,
                                 c * self.quad_error, self.delta, self.cone, self.member,
                                 self.lam, list(self.tags))


def ratio_error(num_f, num_c, den_f, den_c) -> float:
    """|fine ratio - coarse ratio| for a quotient of two-level integrals."""
    if den_f == 0 or den_c == 0:
        return math.inf
    return abs(num_f / den_f - num_c / den_c)
