"""Finite-difference heat solver on flat periodic grids (1-D and 2-D) with the
log-derivative diagnostics used by the gradient bounds, plus pointwise Gaussian
closed forms on R^n that realise the equality cases of those bounds.

The PDE solved is du/dt = (1/2) lap(u) with the standard second-order periodic
stencil.  Crank-Nicolson steps are applied in Fourier space using the symbol
of the *discrete* Laplacian, so the spatial discretisation is identical to the
explicit scheme and the zero mode is propagated exactly (discrete mass is
conserved to rounding).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import CheckResult


class StabilityError(ValueError):
    """Explicit time step violates the stability restriction."""


class PositivityError(RuntimeError):
    """The discrete solution lost strict positivity."""


# ---------------------------------------------------------------------------
# grid and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, L)^n for n = 1 or 2."""

    n: int
    points: int
    length: float = 2.0 * math.pi

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.n}")
        if self.points < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.points}")
        if self.length <= 0:
            raise ValueError(f"period must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.n

    def axis(self) -> np.ndarray:
        return np.arange(self.points) * self.h

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (*shape, n)."""
        ax = self.axis()
        if self.n == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return np.mod(x, self.length)


@dataclass
class ScalarField:
    """Grid values of a scalar function; PDE states must be strictly positive."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def require_positive(self) -> None:
        mn = float(self.values.min())
        if mn <= 0:
            raise PositivityError(f"field minimum {mn} is not strictly positive")

    def mean(self) -> float:
        return float(self.values.mean())


def gradient(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    """Central-difference gradient, shape (n, *grid.shape)."""
    h = grid.h
    comps = [(np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2 * h)
             for ax in range(grid.n)]
    return np.stack(comps)


def laplacian(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    h2 = grid.h ** 2
    out = np.zeros_like(v)
    for ax in range(grid.n):
        out += (np.roll(v, -1, axis=ax) - 2 * v + np.roll(v, 1, axis=ax)) / h2
    return out


def hessian(grid: TorusGrid, v: np.ndarray) -> np.ndarray:
    """Discrete Hessian, shape (n, n, *grid.shape).

    Diagonal entries use the same 3-point stencil as :func:`laplacian`, so the
    discrete trace identity trace(H) = lap(v) holds exactly.
    """
    h = grid.h
    n = grid.n
    out = np.zeros((n, n) + v.shape)
    for ax in range(n):
        out[ax, ax] = (np.roll(v, -1, axis=ax) - 2 * v + np.roll(v, 1, axis=ax)) / h ** 2
    for ax in range(n):
        for bx in range(ax + 1, n):
            pp = np.roll(np.roll(v, -1, axis=ax), -1, axis=bx)
            pm = np.roll(np.roll(v, -1, axis=ax), 1, axis=bx)
            mp = np.roll(np.roll(v, 1, axis=ax), -1, axis=bx)
            mm = np.roll(np.roll(v, 1, axis=ax), 1, axis=bx)
            mixed = (pp - pm - mp + mm) / (4 * h * h)
            out[ax, bx] = mixed
            out[bx, ax] = mixed
    return out


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

SCHEMES = ("explicit-euler", "crank-nicolson")


@dataclass
class SolveConfig:
    dt: float
    t_end: float
    scheme: str = "crank-nicolson"
    snapshot_times: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def resolved_snapshots(self) -> List[float]:
        if self.snapshot_times is None:
            return [self.t_end]
        times = sorted(set(float(t) for t in self.snapshot_times))
        if times and (times[0] < 0 or times[-1] > self.t_end + 1e-12):
            raise ValueError("snapshot times must lie in [0, t_end]")
        return times


def explicit_dt_limit(grid: TorusGrid) -> float:
    """Largest explicit-Euler step accepted: 0.9 * h^2 / (2n)."""
    return 0.9 * grid.h ** 2 / (2 * grid.n)


def _discrete_symbol(grid: TorusGrid) -> np.ndarray:
    """Eigenvalues of the discrete Laplacian on the (real) FFT lattice."""
    N = grid.points
    h = grid.h
    k = np.fft.fftfreq(N, d=1.0 / N)
    lam1 = -(4.0 / h ** 2) * np.sin(np.pi * k / N) ** 2
    if grid.n == 1:
        return lam1
    return lam1[:, None] + lam1[None, :]


def _cn_step_factory(grid: TorusGrid):
    lam = _discrete_symbol(grid)

    def step(values: np.ndarray, dt: float) -> np.ndarray:
        amp = (1.0 + 0.25 * dt * lam) / (1.0 - 0.25 * dt * lam)
        return np.real(np.fft.ifftn(amp * np.fft.fftn(values)))

    return step


def _explicit_step(grid: TorusGrid, values: np.ndarray, dt: float) -> np.ndarray:
    return values + 0.5 * dt * laplacian(grid, values)


@dataclass
class Trajectory:
    grid: TorusGrid
    times: List[float]
    snapshots: List[ScalarField]

    def at(self, t: float, tol: float = 1e-9) -> ScalarField:
        for ti, snap in zip(self.times, self.snapshots):
            if abs(ti - t) <= tol:
                return snap
        raise KeyError(f"no snapshot at t={t}; have {self.times}")

    def final(self) -> ScalarField:
        return self.snapshots[-1]


def solve_heat(u0: ScalarField, cfg: SolveConfig,
               require_positive: bool = True) -> Trajectory:
    """March du/dt = (1/2) lap(u) and collect snapshots at the requested times.

    Snapshot times need not be multiples of dt; segments are stepped with dt
    and a single shorter step to land exactly on each target.
    """
    grid = u0.grid
    if require_positive:
        u0.require_positive()
    if cfg.scheme == "explicit-euler":
        limit = explicit_dt_limit(grid)
        if cfg.dt > limit * (1 + 1e-12):
            raise StabilityError(
                f"explicit dt={cfg.dt} exceeds stability limit {limit:.3e}"
            )
        stepper = lambda v, dt: _explicit_step(grid, v, dt)
    else:
        stepper = _cn_step_factory(grid)

    targets = cfg.resolved_snapshots()
    times: List[float] = []
    snaps: List[ScalarField] = []
    v = u0.values.copy()
    t = 0.0
    for target in targets:
        remaining = target - t
        if remaining < -1e-12:
            raise ValueError("snapshot times must be nondecreasing")
        n_steps = int(math.floor(remaining / cfg.dt + 1e-12))
        for _ in range(n_steps):
            v = stepper(v, cfg.dt)
        t_partial = remaining - n_steps * cfg.dt
        if t_partial > 1e-13:
            v = stepper(v, t_partial)
        t = target
        snap = ScalarField(grid, v.copy())
        if require_positive and snap.values.min() <= 0:
            raise PositivityError(
                f"positivity lost at t={t}; dt too large for the nonlinear diagnostics"
            )
        times.append(t)
        snaps.append(snap)
    return Trajectory(grid, times, snaps)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticFields:
    """Log-derivative fields of a positive state u: f = log u and friends.

    ``g`` is |grad f|^2 - 2 f_t with f_t taken from the PDE right side
    (f_t = (lap u)/(2u)); ``g_alt`` is -lap f.  The two agree in the continuum
    and differ by O(h^2) on the grid, which :func:`check_identity_g` verifies.
    ``h_flat`` is |hess f|^2 - (lap f)^2 / n, nonnegative by Cauchy-Schwarz.
    """

    grid: TorusGrid
    f: np.ndarray
    grad_f: np.ndarray
    grad_f_sq: np.ndarray
    lap_f: np.ndarray
    f_t: np.ndarray
    g: np.ndarray
    g_alt: np.ndarray
    h_flat: np.ndarray


def log_diagnostics(u: ScalarField, u_next: Optional[ScalarField] = None,
                    dt: Optional[float] = None) -> DiagnosticFields:
    """Log-derivative diagnostics of a strictly positive field.

    By default f_t comes from the heat equation itself, f_t = (lap u)/(2u),
    which keeps time discretisation out of G.  Passing ``u_next`` and ``dt``
    switches to forward time differencing of log u (cross-check path).
    """
    u.require_positive()
    grid = u.grid
    f = np.log(u.values)
    gf = gradient(grid, f)
    gf_sq = np.sum(gf * gf, axis=0)
    lap_f = laplacian(grid, f)
    if u_next is not None:
        if dt is None or dt <= 0:
            raise ValueError("temporal differencing requires a positive dt")
        u_next.require_positive()
        f_t = (np.log(u_next.values) - f) / dt
    else:
        f_t = 0.5 * laplacian(grid, u.values) / u.values
    g = gf_sq - 2.0 * f_t
    g_alt = -lap_f
    H = hessian(grid, f)
    h_flat = np.sum(H * H, axis=(0, 1)) - lap_f ** 2 / grid.n
    return DiagnosticFields(grid=grid, f=f, grad_f=gf, grad_f_sq=gf_sq,
                            lap_f=lap_f, f_t=f_t, g=g, g_alt=g_alt,
                            h_flat=h_flat)


def identity_tolerance(grid: TorusGrid, scale: float) -> float:
    return 10.0 * grid.h ** 2 * max(1.0, scale)


def check_identity_g(d: DiagnosticFields,
                     tolerance: Optional[float] = None) -> CheckResult:
    """Max-norm difference between the two G evaluations, against 10 h^2 scale."""
    diff = float(np.max(np.abs(d.g - d.g_alt)))
    if tolerance is None:
        scale = float(np.max(np.abs(d.g_alt))) + float(np.max(d.grad_f_sq))
        tolerance = identity_tolerance(d.grid, scale)
    return CheckResult(bound_value=0.0, observed=diff, tolerance=tolerance,
                       context="identity-G")


def semigroup_domination_check(u0: ScalarField, t: float,
                               dt: Optional[float] = None,
                               scheme: str = "crank-nicolson",
                               tolerance: Optional[float] = None) -> CheckResult:
    """Nodewise check |grad P_t u0| <= P_t |grad u0| + tol on the flat torus.

    Both sides are produced by the same solver; positivity of u0 is not
    required.  ``observed`` is the largest violation max(lhs - rhs).
    """
    grid = u0.grid
    if dt is None:
        dt = min(1e-3, t / 10) if t > 0 else 1e-3
    cfg = SolveConfig(dt=dt, t_end=t, scheme=scheme)
    evolved = solve_heat(u0, cfg, require_positive=False).final()
    lhs = np.sqrt(np.sum(gradient(grid, evolved.values) ** 2, axis=0))
    grad0 = np.sqrt(np.sum(gradient(grid, u0.values) ** 2, axis=0))
    rhs = solve_heat(ScalarField(grid, grad0), cfg,
                     require_positive=False).final().values
    violation = float(np.max(lhs - rhs))
    if tolerance is None:
        scale = float(np.max(grad0))
        tolerance = 1e-6 + 10.0 * grid.h ** 2 * max(1.0, scale)
    return CheckResult(bound_value=0.0, observed=violation,
                       tolerance=tolerance, context="semigroup-domination")


# ---------------------------------------------------------------------------
# Gaussian closed forms on R^n (equality cases)
# ---------------------------------------------------------------------------

GAUSSIAN_KINDS = ("forward", "initial", "backward")


@dataclass(frozen=True)
class GaussianValues:
    u: float
    f: float
    grad_f_sq: float
    g: float


def gaussian_oracle(kind: str, t: float, x, sigma2: Optional[float] = None,
                    n: int = 1) -> GaussianValues:
    """Pointwise values of the Gaussian heat-equation solutions on R^n.

    * ``forward``: the heat kernel (2 pi t)^(-n/2) exp(-|x|^2/(2t)); G = n/t.
    * ``initial``: Gaussian initial data of variance sigma2, so that
      u is the kernel at effective time sigma2 + t; G = n/(sigma2 + t).
    * ``backward``: the expanding solution proportional to
      (sigma2 - t)^(-n/2) exp(+|x|^2/(2(sigma2 - t))); G = -n/(sigma2 - t),
      defined for 0 <= t < sigma2 and blowing up at t = sigma2.

    These are exact equality cases: forward saturates the classical Li-Yau
    bound n/t, ``initial`` saturates the refined upper bound with
    C = n/sigma2 and ``backward`` saturates the lower bound with the same C.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ValueError(f"point has shape {x.shape}, expected ({n},)")
    r2 = float(x @ x)
    if kind == "forward":
        if t <= 0:
            raise ValueError("forward kernel requires t > 0")
        tau = t
        sign = -1.0
    elif kind == "initial":
        if sigma2 is None or sigma2 <= 0:
            raise ValueError("initial kind requires sigma2 > 0")
        if t < 0:
            raise ValueError("initial kind requires t >= 0")
        tau = sigma2 + t
        sign = -1.0
    elif kind == "backward":
        if sigma2 is None or sigma2 <= 0:
            raise ValueError("backward kind requires sigma2 > 0")
        if not (0 <= t < sigma2):
            raise ValueError(
                f"backward kind requires 0 <= t < sigma2 = {sigma2}; got t={t} "
                "(blow-up at the window boundary)"
            )
        tau = sigma2 - t
        sign = 1.0
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {GAUSSIAN_KINDS}")
    f = -0.5 * n * math.log(2 * math.pi * tau) + sign * r2 / (2 * tau)
    # lap f = sign * n / tau, so G = -lap f = -sign * n / tau
    return GaussianValues(u=math.exp(f), f=f, grad_f_sq=r2 / tau ** 2,
                          g=-sign * n / tau)


def wrapped_gaussian(grid: TorusGrid, sigma2: float, center: float = 0.0,
                     images: int = 12) -> ScalarField:
    """Periodised Gaussian of variance sigma2 on a 1-D torus (unit mass)."""
    if grid.n != 1:
        raise ValueError("wrapped Gaussian initial data is 1-D only")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = grid.axis()
    L = grid.length
    vals = np.zeros_like(x)
    for k in range(-images, images + 1):
        d = x - center + k * L
        vals += np.exp(-d * d / (2 * sigma2))
    vals /= math.sqrt(2 * math.pi * sigma2)
    return ScalarField(grid, vals)


# ---------------------------------------------------------------------------
# initial-data families and export helpers
# ---------------------------------------------------------------------------

def make_initial(grid: TorusGrid, family: str, **params) -> ScalarField:
    """Named initial-data families.

    constant(c) | cosine(a): 1 + a cos(k x) | exp-cosine(a): exp(a cos(k x)) |
    trig-poly(cos_coeffs, sin_coeffs): 1 + sums of modes |
    wrapped-gaussian(sigma2, center).
    """
    x = grid.nodes()[..., 0]
    if family == "constant":
        c = float(params.get("c", 1.0))
        return ScalarField(grid, np.full(grid.shape, c))
    if family == "cosine":
        a = float(params.get("a", 0.5))
        k = int(params.get("k", 1))
        w = 2 * math.pi * k / grid.length
        return ScalarField(grid, 1.0 + a * np.cos(w * x))
    if family == "exp-cosine":
        a = float(params.get("a", 0.5))
        k = int(params.get("k", 1))
        w = 2 * math.pi * k / grid.length
        return ScalarField(grid, np.exp(a * np.cos(w * x)))
    if family == "trig-poly":
        cos_coeffs = params.get("cos_coeffs", [])
        sin_coeffs = params.get("sin_coeffs", [])
        vals = np.full(grid.shape, float(params.get("c0", 1.0)))
        for j, a in enumerate(cos_coeffs, start=1):
            vals += a * np.cos(2 * math.pi * j * x / grid.length)
        for j, b in enumerate(sin_coeffs, start=1):
            vals += b * np.sin(2 * math.pi * j * x / grid.length)
        return ScalarField(grid, vals)
    if family == "wrapped-gaussian":
        return wrapped_gaussian(grid, float(params["sigma2"]),
                                float(params.get("center", 0.0)))
    raise ValueError(f"unknown initial-data family {family!r}")


def snapshot_to_csv(field_: ScalarField, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "value"])
        for idx, v in enumerate(field_.values.ravel()):
            writer.writerow([idx, repr(float(v))])


def snapshot_summary(field_: ScalarField, t: float) -> dict:
    v = field_.values
    return {
        "t": t,
        "min": float(v.min()),
        "max": float(v.max()),
        "mean": float(v.mean()),
        "points": int(v.size),
    }
