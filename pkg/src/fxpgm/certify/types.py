from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from ..fixedpoint import FxFormat, RoundingMode
from ..qp import ProblemFamily
from ..rational import frac_str


class VerdictKind(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    UNKNOWN = "UNKNOWN"


class Which(str, Enum):
    """Selector of the asserted quantity."""

    OMEGA_SQ = "Omega^2"        # ||err(g)||^2 over every grid point
    ASSUMPTION = "eps^2"        # ||x - T(x)||^2 where dhat2 >= eps_hat (lower bound)
    DELTA_SQ = "delta^2"        # ||x - T(x)||^2 where dhat2 < eps_hat
    OMEGA_SMALL_SQ = "omega^2"  # ||x+ - T(x)||^2 where dhat2 < eps_hat
    THETA_SQ = "Theta^2"        # ||x - x+||^2 where dhat2 < eps_hat
    OVERFLOW = "overflow"

    @property
    def lower(self) -> bool:
        """True when the threshold is a lower bound (PASS below, FAIL above)."""
        return self is Which.ASSUMPTION

    @property
    def needs_eps_hat(self) -> bool:
        return self not in (Which.OMEGA_SQ, Which.OVERFLOW)

    @property
    def quantity(self) -> str:
        return {
            Which.OMEGA_SQ: "omega_sq",
            Which.ASSUMPTION: "delta_sq",
            Which.DELTA_SQ: "delta_sq",
            Which.OMEGA_SMALL_SQ: "omega_small_sq",
            Which.THETA_SQ: "theta_sq",
        }[self]

    def selects(self, d2_raw: int, eps_hat_raw: int | None) -> bool:
        """Is a point with fixed-point exit value ``d2_raw`` in scope?"""
        if self is Which.OMEGA_SQ or self is Which.OVERFLOW:
            return True
        if self is Which.ASSUMPTION:
            return d2_raw >= eps_hat_raw
        return d2_raw < eps_hat_raw

    def violates(self, value: Fraction, threshold: Fraction) -> bool:
        return value < threshold if self.lower else value > threshold


@dataclass(frozen=True)
class BoundQuery:
    which: Which
    threshold: Fraction
    family: ProblemFamily
    fmt: FxFormat
    tau: Fraction
    eps_hat: Fraction | None = None
    mode: RoundingMode = RoundingMode.FLOOR

    def __post_init__(self):
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        object.__setattr__(self, "tau", Fraction(self.tau))
        object.__setattr__(self, "mode", RoundingMode(self.mode))
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.which.needs_eps_hat:
            if self.eps_hat is None:
                raise ValueError(f"{self.which.value} needs eps_hat")
            e = Fraction(self.eps_hat)
            if (e * self.fmt.scale).denominator != 1 or e < self.fmt.ulp:
                raise ValueError("eps_hat must be a positive grid value")
            object.__setattr__(self, "eps_hat", e)

    @property
    def eps_hat_raw(self) -> int | None:
        return None if self.eps_hat is None else int(self.eps_hat * self.fmt.scale)

    def at(self, threshold) -> "BoundQuery":
        return replace(self, threshold=Fraction(threshold))

    def cache_key(self):
        return (self.which, self.family, self.fmt, self.tau, self.eps_hat, self.mode)


@dataclass(frozen=True)
class Witness:
    """A concrete input assignment: realization plus grid point ``x``."""

    which: Which
    q_index: int
    c: tuple[Fraction, ...]
    l: tuple[Fraction, ...]
    u: tuple[Fraction, ...]
    x_raw: tuple[int, ...]
    fmt: FxFormat
    value: Fraction | None = None   # offending exact quantity
    d2_raw: int | None = None
    note: str = ""

    def to_dict(self, data_fmt: FxFormat) -> dict:
        s = data_fmt.scale
        return {
            "which": self.which.value,
            "format": str(self.fmt),
            "data_format": str(data_fmt),
            "q_index": self.q_index,
            "c": [int(v * s) for v in self.c],
            "l": [int(v * s) for v in self.l],
            "u": [int(v * s) for v in self.u],
            "x": [f"{r}@{self.fmt}" for r in self.x_raw],
            "value": None if self.value is None else frac_str(self.value),
            "d2_raw": self.d2_raw,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Witness":
        fmt = FxFormat.parse(obj["format"])
        dfmt = FxFormat.parse(obj["data_format"])
        s = dfmt.scale
        xs = tuple(int(t.split("@")[0]) for t in obj["x"])
        return cls(Which(obj["which"]), int(obj["q_index"]),
                   tuple(Fraction(r, s) for r in obj["c"]),
                   tuple(Fraction(r, s) for r in obj["l"]),
                   tuple(Fraction(r, s) for r in obj["u"]),
                   xs, fmt, None if obj["value"] is None else Fraction(obj["value"]),
                   obj.get("d2_raw"), obj.get("note", ""))


@dataclass
class Verdict:
    kind: VerdictKind
    witness: Witness | None = None
    backend: str = ""
    detail: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.kind is VerdictKind.PASS

    @property
    def failed(self) -> bool:
        return self.kind is VerdictKind.FAIL

    def __bool__(self):
        return self.passed
