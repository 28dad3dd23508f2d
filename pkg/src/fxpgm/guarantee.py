"""Closed-form convergence and suboptimality certificates, in exact rationals."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import InvalidRange, PreconditionViolated
from .fixedpoint import FxFormat, RoundingMode
from .pgm import GRADIENT_ORDER
from .qp import ProblemFamily
from .rational import frac_str, to_fraction

# beyond this many factors the exact power check is skipped (the 80-digit
# logarithm quotient is then trusted)
_EXACT_POWER_LIMIT = 5000


def _dec(x: Fraction) -> Decimal:
    return Decimal(x.numerator) / Decimal(x.denominator)


def smallest_power(base: Fraction, ratio: Fraction) -> int:
    """Smallest integer ``k >= 0`` with ``base**k <= ratio`` for ``0 < base < 1``."""
    base, ratio = Fraction(base), Fraction(ratio)
    if not 0 < base < 1:
        raise InvalidRange(f"base {base} must lie in (0, 1)")
    if ratio <= 0:
        raise InvalidRange("ratio must be positive")
    if ratio >= 1:
        return 0
    with localcontext() as ctx:
        ctx.prec = 80
        est = _dec(ratio).ln() / _dec(base).ln()
    k = max(int(est.to_integral_value(rounding="ROUND_CEILING")), 0)
    if k <= _EXACT_POWER_LIMIT:
        while k > 0 and base ** (k - 1) <= ratio:
            k -= 1
        while base ** k > ratio:
            k += 1
    return k


def kmax_exact(eps_target_sq, dist0_sq, tau, sigma) -> int:
    """Iterations after which exact PGM is within ``eps_target``: contraction by ``1 - tau*sigma``."""
    eps_target_sq, dist0_sq = Fraction(eps_target_sq), Fraction(dist0_sq)
    ts = Fraction(tau) * Fraction(sigma)
    if not 0 < ts < 1:
        raise InvalidRange("need 0 < tau*sigma < 1")
    if eps_target_sq <= 0 or dist0_sq <= 0:
        raise InvalidRange("squared distances must be positive")
    if eps_target_sq > dist0_sq:
        raise InvalidRange("target exceeds the initial distance")
    return smallest_power(1 - ts, eps_target_sq / dist0_sq)


def min_eps(tau, sigma, Omega) -> Fraction:
    """Smallest admissible ``eps`` (exclusive): ``4*Omega/(tau*sigma)``."""
    return 4 * Fraction(Omega) / (Fraction(tau) * Fraction(sigma))


def contraction_C(tau, sigma, Omega, eps) -> Fraction:
    tau, sigma, Omega, eps = map(Fraction, (tau, sigma, Omega, eps))
    if not eps * tau * sigma > 4 * Omega:
        m = min_eps(tau, sigma, Omega)
        raise PreconditionViolated(
            f"eps*tau*sigma > 4*Omega fails: need eps > 4*Omega/(tau*sigma) = {float(m):.5g}, "
            f"got eps = {float(eps):.5g}; increase q or eps")
    return (1 - tau * sigma) / (1 - 4 * Omega / eps)


def kmax_fixed(C, D, eps) -> int:
    C, D, eps = map(Fraction, (C, D, eps))
    if not 0 < C < 1:
        raise InvalidRange("need 0 < C < 1")
    if D <= 0:
        raise InvalidRange("D must be positive")
    ratio = eps * eps / (4 * D)
    if ratio > 1:
        raise InvalidRange("eps^2 exceeds 4D")
    return smallest_power(C, ratio)


def conditioning_T(tau, L, sigma) -> Fraction:
    return (1 / Fraction(tau) + Fraction(L)) / Fraction(sigma)


def exit_bounds(delta, omega, Theta, Omega, tau, L, sigma) -> tuple[Fraction, Fraction]:
    """``(dist_exit, fgap_exit)`` valid whenever the exit test fires."""
    delta, omega, Theta, Omega, tau = map(Fraction, (delta, omega, Theta, Omega, tau))
    if min(delta, omega, Theta, Omega) < 0:
        raise InvalidRange("bounds must be nonnegative")
    if Fraction(sigma) <= 0:
        raise InvalidRange("sigma must be positive")
    dist = omega + delta * conditioning_T(tau, L, sigma)
    return dist, ((Theta + Omega) * dist + Theta * Theta / 2) / tau


def kmax_mode_bounds(eps, Omega, tau) -> tuple[Fraction, Fraction]:
    """``(dist_kmax, fgap_kmax)`` valid after ``k_max`` iterations."""
    eps, Omega, tau = map(Fraction, (eps, Omega, tau))
    if eps < 4 * Omega:
        raise InvalidRange("need eps >= 4*Omega")
    return eps / 2, (eps * eps - 4 * Omega * eps) / (8 * tau)


def bound_D(fam: ProblemFamily, x0_set: Iterable) -> Fraction:
    """Upper bound on ``||x0 - x*||^2`` over the start set, using ``x*`` in the box."""
    best = None
    for x0 in x0_set:
        x0 = [Fraction(v) for v in x0]
        if len(x0) != fam.n:
            raise InvalidRange("start point has the wrong dimension")
        if any(v < lo or v > hi for v, lo, hi in zip(x0, fam.l_min, fam.u_max)):
            raise InvalidRange("start point outside the feasible box")
        d = sum(max((v - lo) ** 2, (hi - v) ** 2) for v, lo, hi in zip(x0, fam.l_min, fam.u_max))
        best = d if best is None else max(best, d)
    if best is None:
        raise InvalidRange("empty start set")
    return best


_RATIONAL_FIELDS = ("tau", "L", "sigma", "Omega", "eps", "eps_hat", "delta", "omega", "Theta", "D",
                    "T", "C", "dist_exit", "fgap_exit", "dist_kmax", "fgap_kmax", "min_eps")
_INPUT_FIELDS = ("tau", "L", "sigma", "Omega", "eps", "eps_hat", "delta", "omega", "Theta", "D")


@dataclass
class Certificate:
    fmt: FxFormat
    rounding: RoundingMode
    tau: Fraction
    L: Fraction
    sigma: Fraction
    Omega: Fraction
    eps: Fraction
    eps_hat: Fraction
    delta: Fraction
    omega: Fraction
    Theta: Fraction
    D: Fraction
    T: Fraction
    C: Fraction
    min_eps: Fraction
    k_max: int
    k_exact: int
    dist_exit: Fraction
    fgap_exit: Fraction
    dist_kmax: Fraction
    fgap_kmax: Fraction
    D_inferred: bool = False
    omega_is_Omega: bool = True
    gradient_order: str = GRADIENT_ORDER
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"format": str(self.fmt), "rounding": self.rounding.value,
               "gradient_order": self.gradient_order,
               "k_max": self.k_max, "k_exact": self.k_exact,
               "D_inferred": self.D_inferred, "omega_is_Omega": self.omega_is_Omega}
        for name in _RATIONAL_FIELDS:
            v = getattr(self, name)
            out[name] = {"exact": frac_str(v), "decimal": f"{float(v):.10g}"}
        out["provenance"] = _jsonable(self.provenance)
        out["notes"] = list(self.notes)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "Certificate":
        kw = {name: Fraction(obj[name]["exact"]) for name in _RATIONAL_FIELDS}
        return cls(fmt=FxFormat.parse(obj["format"]), rounding=RoundingMode(obj["rounding"]),
                   k_max=int(obj["k_max"]), k_exact=int(obj["k_exact"]),
                   D_inferred=bool(obj["D_inferred"]), omega_is_Omega=bool(obj["omega_is_Omega"]),
                   gradient_order=obj["gradient_order"], provenance=obj.get("provenance", {}),
                   notes=list(obj.get("notes", [])), **kw)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Certificate":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def recompute(self) -> "Certificate":
        """Re-derive every output from the stored inputs."""
        kw = {name: getattr(self, name) for name in _INPUT_FIELDS}
        if self.omega_is_Omega:
            kw["omega"] = None
        return assemble_certificate(fmt=self.fmt, rounding=self.rounding, D_inferred=self.D_inferred,
                                    provenance=self.provenance, notes=self.notes, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        items = sorted(obj) if isinstance(obj, set) else obj
        return [_jsonable(v) for v in items]
    if isinstance(obj, Fraction):
        return frac_str(obj)
    return obj


def assemble_certificate(*, fmt: FxFormat, tau, L, sigma, Omega, eps, eps_hat, delta, Theta,
                         omega=None, D=1, rounding=RoundingMode.FLOOR, D_inferred: bool = False,
                         checks: dict | None = None, provenance: dict | None = None,
                         notes: Iterable[str] = ()) -> Certificate:
    """Combine certified bounds into the full guarantee.

    ``checks`` maps a check name to its verdict string; anything other than
    ``"PASS"`` refuses assembly, as does ``eps*tau*sigma <= 4*Omega``.
    """
    for name, kind in (checks or {}).items():
        if str(getattr(kind, "value", kind)) != "PASS":
            raise PreconditionViolated(f"check {name!r} did not PASS ({kind})")
    tau, L, sigma, Omega, eps, eps_hat, delta, Theta, D = map(
        to_fraction, (tau, L, sigma, Omega, eps, eps_hat, delta, Theta, D))
    omega_is_Omega = omega is None
    omega = Omega if omega is None else to_fraction(omega)
    C = contraction_C(tau, sigma, Omega, eps)
    dist_exit, fgap_exit = exit_bounds(delta, omega, Theta, Omega, tau, L, sigma)
    dist_kmax, fgap_kmax = kmax_mode_bounds(eps, Omega, tau)
    return Certificate(
        fmt=fmt, rounding=RoundingMode(rounding), tau=tau, L=L, sigma=sigma, Omega=Omega, eps=eps,
        eps_hat=eps_hat, delta=delta, omega=omega, Theta=Theta, D=D,
        T=conditioning_T(tau, L, sigma), C=C, min_eps=min_eps(tau, sigma, Omega),
        k_max=kmax_fixed(C, D, eps), k_exact=kmax_exact(eps * eps / 4, D, tau, sigma),
        dist_exit=dist_exit, fgap_exit=fgap_exit, dist_kmax=dist_kmax, fgap_kmax=fgap_kmax,
        D_inferred=D_inferred, omega_is_Omega=omega_is_Omega,
        provenance=dict(provenance or {}), notes=list(notes))
