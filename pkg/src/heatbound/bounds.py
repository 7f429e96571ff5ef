"""Closed-form gradient and Harnack bounds, plus generic bound-vs-observed checks.

Every bound evaluated here controls ``|grad log u|^2`` (or the related quantity
``G = |grad log u|^2 - 2 d/dt log u``) for a positive solution ``u`` of the heat
equation ``du/dt = (1/2) Lu``.  The functions are pure and cheap; the heavy
lifting (producing the "observed" side) lives in :mod:`heatbound.heatpde`,
:mod:`heatbound.flow` and :mod:`heatbound.bsde`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

INFINITE_C = math.inf

# Below this value of the exponent argument the exp-based formulas switch to
# their removable-singularity limit (series to first order).
_EXP_LIMIT_THRESHOLD = 1e-8


# ---------------------------------------------------------------------------
# check plumbing
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    """Outcome of comparing an observed quantity against a bound."""

    bound_value: float
    observed: float
    tolerance: float
    context: str = ""

    @property
    def margin(self) -> float:
        return self.bound_value - self.observed

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "context": self.context,
            "bound": self.bound_value,
            "observed": self.observed,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d["context"], repr(d["bound"]), repr(d["observed"]),
                repr(d["margin"]), repr(d["tolerance"]), str(d["passed"])]

    CSV_HEADER = ["context", "bound", "observed", "margin", "tolerance", "passed"]


# ---------------------------------------------------------------------------
# bound evaluators
# ---------------------------------------------------------------------------

def bound_sup_log(t: float, m_norm: float) -> float:
    """Gradient bound 4*M/t from the sup norm M of log of the initial data."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if m_norm < 0:
        raise ValueError(f"sup norm must be nonnegative, got {m_norm}")
    return 4.0 * m_norm / t


def liyau_upper(t: float, c: float, n: int) -> float:
    """Upper bound C/((t/n)C + 1) on G, valid when -lap(log u0) <= C.

    ``c`` may be ``math.inf``; that branch returns n/t (t > 0 required) and
    recovers the classical Li-Yau bound.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if c < 0:
        raise ValueError(f"C must be nonnegative, got {c}")
    if math.isinf(c):
        if t <= 0:
            raise ValueError("C = inf requires t > 0")
        return n / t
    return c / ((t / n) * c + 1.0)


def liyau_lower(t: float, c: float, n: int) -> float:
    """Lower bound -C/(1 - (t/n)C) on G, valid when -lap(log u0) >= -C.

    Only defined on the window 0 <= t < n/C; at the right endpoint the bound
    blows down to -inf and the call is rejected.
    """
    if not (0 < c < math.inf):
        raise ValueError(f"C must be a positive finite real, got {c}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t >= n / c:
        raise ValueError(
            f"t = {t} is outside the window [0, n/C) = [0, {n / c}); "
            "lower bound blows up at the boundary"
        )
    return -c / (1.0 - (t / n) * c)


def bound_structure_k(k: float, horizon: float, m_norm: float) -> float:
    """Gradient bound 4*K*M/(1 - exp(-K*horizon)) under structure constant K.

    ``horizon`` is the elapsed time of the solution being bounded.  K = 0 is
    evaluated as the limit 4*M/horizon.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if k < 0:
        raise ValueError(f"K must be nonnegative, got {k}")
    if m_norm < 0:
        raise ValueError(f"sup norm must be nonnegative, got {m_norm}")
    if k * horizon < _EXP_LIMIT_THRESHOLD:
        return 4.0 * m_norm / horizon
    return 4.0 * k * m_norm / (1.0 - math.exp(-k * horizon))


def bound_structure_k_sq(k: float, horizon: float, m_norm: float) -> float:
    """As :func:`bound_structure_k` but with the squared sup norm.

    This is the concave-transform variant: the right-hand side carries
    ``M**2`` (the printed form), so for M < 1 it is smaller than the
    first-power bound; both are exposed and both margins are reported.
    """
    return bound_structure_k(k, horizon, m_norm) * m_norm


def bound_ricci_k(k: float, t: float, m_norm: float) -> float:
    """Gradient bound 2*K*M/(1 - exp(-K*t/2)) under Ricci lower bound -K.

    K = 0 is evaluated as the limit 4*M/t, matching :func:`bound_sup_log`.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if k < 0:
        raise ValueError(f"K must be nonnegative, got {k}")
    if m_norm < 0:
        raise ValueError(f"sup norm must be nonnegative, got {m_norm}")
    if k * t / 2.0 < _EXP_LIMIT_THRESHOLD:
        return 4.0 * m_norm / t
    return 2.0 * k * m_norm / (1.0 - math.exp(-k * t / 2.0))


def harnack_bound(t: float, s: float, r: float, c: float, n: int) -> float:
    """Harnack ratio bound ((1/C + (t+s)/n) / (1/C + t/n))**(n/2) * exp(r^2/(2s)).

    Controls u(t, x)/u(t+s, y) for positive solutions with
    -lap(log u0) <= C and r = dist(x, y).  ``c = math.inf`` gives the
    ((t+s)/t)**(n/2) prefactor.
    """
    if t <= 0 or s <= 0:
        raise ValueError(f"t and s must be positive, got t={t}, s={s}")
    if r < 0:
        raise ValueError(f"distance must be nonnegative, got {r}")
    if c <= 0:
        raise ValueError(f"C must be positive (possibly inf), got {c}")
    if math.isinf(c):
        prefactor = ((t + s) / t) ** (n / 2.0)
    else:
        prefactor = ((1.0 / c + (t + s) / n) / (1.0 / c + t / n)) ** (n / 2.0)
    return prefactor * math.exp(r * r / (2.0 * s))


# ---------------------------------------------------------------------------
# concave-transform admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiSpec:
    """A scalar transform with three derivatives, checked for admissibility."""

    name: str
    value: Callable[[float], float]
    d1: Callable[[float], float]
    d2: Callable[[float], float]
    d3: Callable[[float], float]


def psi_log() -> PsiSpec:
    return PsiSpec("log", math.log,
                   lambda u: 1.0 / u,
                   lambda u: -1.0 / u ** 2,
                   lambda u: 2.0 / u ** 3)


def psi_linear() -> PsiSpec:
    return PsiSpec("linear", lambda u: u,
                   lambda u: 1.0, lambda u: 0.0, lambda u: 0.0)


def psi_sqrt() -> PsiSpec:
    return PsiSpec("sqrt", math.sqrt,
                   lambda u: 0.5 * u ** -0.5,
                   lambda u: -0.25 * u ** -1.5,
                   lambda u: 0.375 * u ** -2.5)


def psi_power(a: float) -> PsiSpec:
    return PsiSpec(f"power({a})", lambda u: u ** a,
                   lambda u: a * u ** (a - 1),
                   lambda u: a * (a - 1) * u ** (a - 2),
                   lambda u: a * (a - 1) * (a - 2) * u ** (a - 3))


@dataclass
class PsiAdmissibility:
    admissible: bool
    witness: Optional[float] = None
    concavity_slack: float = 0.0   # most positive value of psi'' seen
    third_order_slack: float = 0.0  # most positive value of psi'''psi' - 2 psi''^2

    def __bool__(self) -> bool:
        return self.admissible


def psi_admissible(psi: PsiSpec, test_points: Sequence[float],
                   rtol: float = 1e-10) -> PsiAdmissibility:
    """Check concavity and the third-order inequality psi'''psi' <= 2 psi''^2.

    Returns the verdict together with the worst violating point, if any.
    Tolerance is relative to the magnitude of the terms at each point.
    """
    points = list(test_points)
    if not points:
        raise ValueError("need at least one test point")
    worst_point = None
    worst_excess = -math.inf
    concavity_slack = -math.inf
    third_slack = -math.inf
    ok = True
    for u in points:
        if u <= 0:
            raise ValueError(f"test points must be positive, got {u}")
        p1, p2, p3 = psi.d1(u), psi.d2(u), psi.d3(u)
        scale2 = max(1.0, abs(p2))
        scale3 = max(1.0, abs(p3 * p1), abs(2.0 * p2 * p2))
        concave_excess = p2 / scale2
        third_excess = (p3 * p1 - 2.0 * p2 * p2) / scale3
        concavity_slack = max(concavity_slack, p2)
        third_slack = max(third_slack, p3 * p1 - 2.0 * p2 * p2)
        excess = max(concave_excess, third_excess)
        if excess > rtol:
            ok = False
            if excess > worst_excess:
                worst_excess = excess
                worst_point = u
    return PsiAdmissibility(ok, worst_point, concavity_slack, third_slack)


# ---------------------------------------------------------------------------
# BoundSpec: parsable description of one bound instance
# ---------------------------------------------------------------------------

BOUND_KINDS = ("th11", "liyau_upper", "liyau_lower", "est_o1", "est_o2",
               "th41", "harnack")


@dataclass
class BoundSpec:
    """A named bound plus its parameters, parsable from CLI flags or config.

    ``c`` accepts the string ``"inf"`` (or ``math.inf``) for the infinite
    branch of the Li-Yau and Harnack bounds.
    """

    kind: str
    t: Optional[float] = None
    s: Optional[float] = None
    c: Optional[float] = None
    n: int = 1
    k: Optional[float] = None
    m_norm: Optional[float] = None
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}; "
                             f"expected one of {BOUND_KINDS}")
        if isinstance(self.c, str):
            self.c = math.inf if self.c == "inf" else float(self.c)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundSpec":
        known = {"kind", "t", "s", "c", "n", "k", "m_norm", "r"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown BoundSpec keys: {sorted(unknown)}")
        return cls(**d)

    def evaluate(self) -> float:
        kind = self.kind
        if kind == "th11":
            return bound_sup_log(self.t, self.m_norm)
        if kind == "liyau_upper":
            return liyau_upper(self.t, self.c, self.n)
        if kind == "liyau_lower":
            return liyau_lower(self.t, self.c, self.n)
        if kind == "est_o1":
            return bound_structure_k(self.k, self.t, self.m_norm)
        if kind == "est_o2":
            return bound_structure_k_sq(self.k, self.t, self.m_norm)
        if kind == "th41":
            return bound_ricci_k(self.k, self.t, self.m_norm)
        if kind == "harnack":
            return harnack_bound(self.t, self.s, self.r, self.c, self.n)
        raise AssertionError(kind)


DEFAULT_ANALYTIC_TOL = 1e-9


def check_field_against_bound(observed_max: float, bound: BoundSpec,
                              tolerance: float = DEFAULT_ANALYTIC_TOL,
                              context: str = "") -> CheckResult:
    """Compare an observed field maximum against an evaluated bound."""
    value = bound.evaluate()
    ctx = context or bound.kind
    return CheckResult(bound_value=value, observed=observed_max,
                       tolerance=tolerance, context=ctx)
