"""Monte Carlo engine for the quadratic backward SDE

    Y_T - Y_t = sum_j int Z^j dB^j - (1/2) int |Z|^2 ds,   Y_T = f0(x + B_T),

whose unique bounded solution is the entropic functional
Y_t = log E[exp(f0(X_T)) | X_t] with Z the spatial gradient of Y.  The module
ships the entropic closed form (exact families, a periodic-grid semigroup
table and Gauss-Hermite quadrature), path sweeps evaluating (Y, Z) along
Brownian paths, Girsanov reweighting, the maximum-principle / BMO /
submartingale diagnostics and the reciprocal-identity demo
Y_0 = 1/(T/n + E_Q[1/Y_T]).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import CheckResult
from .heatpde import ScalarField, SolveConfig, TorusGrid, gradient, solve_heat
from .sampling import brownian_increments

QUADRATIC_DRIVER = "quadratic-half-z-squared"


class WeightDegeneracyError(RuntimeError):
    """Effective sample size of the importance weights fell below 5%."""


class TerminalSignError(ValueError):
    """The reciprocal-identity demo requires a strictly positive terminal."""


# ---------------------------------------------------------------------------
# estimates and weighted statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_paths: int
    seed: int

    def within(self, target: float, k_sigma: float = 3.0, atol: float = 1e-12) -> bool:
        return abs(self.value - target) <= k_sigma * self.stderr + atol


def weighted_mean(weights: np.ndarray, values: np.ndarray) -> Tuple[float, float, float]:
    """Self-normalised weighted mean, delta-method stderr and ESS."""
    w = np.asarray(weights, dtype=float)
    g = np.asarray(values, dtype=float)
    sw = w.sum()
    if sw <= 0:
        raise ValueError("weights must have positive sum")
    value = float(w @ g / sw)
    resid = w * (g - value)
    stderr = float(np.sqrt((resid ** 2).sum()) / sw)
    ess = float(sw ** 2 / (w ** 2).sum())
    return value, stderr, ess


ESS_GUARD_FRACTION = 0.05


# ---------------------------------------------------------------------------
# entropic oracles
# ---------------------------------------------------------------------------

class _ClosedFormOracle:
    def __init__(self, y_fn, z_fn):
        self._y = y_fn
        self._z = z_fn

    def query(self, t: float, x: np.ndarray):
        return self._y(t, x), self._z(t, x)


class _TorusTableOracle:
    """log of the heat semigroup acting on exp(f0) on a 1-D periodic grid.

    The table is built once at resolution ``dt_table`` by the Crank-Nicolson
    solver; queries interpolate linearly in time between table rows and
    periodically in space.
    """

    def __init__(self, grid: TorusGrid, f0_values: np.ndarray, horizon: float,
                 dt_table: float):
        self.grid = grid
        self.horizon = horizon
        n_steps = max(1, int(round(horizon / dt_table)))
        self.dt_table = horizon / n_steps
        u0 = ScalarField(grid, np.exp(f0_values))
        times = [j * self.dt_table for j in range(n_steps + 1)]
        traj = solve_heat(u0, SolveConfig(dt=self.dt_table, t_end=horizon,
                                          snapshot_times=times))
        self.y_table = np.stack([np.log(s.values) for s in traj.snapshots])
        self.z_table = np.stack([gradient(grid, row)[0] for row in self.y_table])

    def _interp_space(self, table_row: np.ndarray, x: np.ndarray) -> np.ndarray:
        grid = self.grid
        pos = np.mod(x, grid.length) / grid.h
        i0 = np.floor(pos).astype(int) % grid.points
        frac = pos - np.floor(pos)
        i1 = (i0 + 1) % grid.points
        return (1.0 - frac) * table_row[i0] + frac * table_row[i1]

    def query(self, t: float, x: np.ndarray):
        s = self.horizon - t
        if s < -1e-9 or s > self.horizon + 1e-9:
            raise ValueError(f"query time {t} outside [0, {self.horizon}]")
        s = min(max(s, 0.0), self.horizon)
        pos = s / self.dt_table
        j0 = min(int(math.floor(pos)), self.y_table.shape[0] - 2)
        lam = pos - j0
        xs = x[:, 0]
        y = ((1 - lam) * self._interp_space(self.y_table[j0], xs)
             + lam * self._interp_space(self.y_table[j0 + 1], xs))
        z = ((1 - lam) * self._interp_space(self.z_table[j0], xs)
             + lam * self._interp_space(self.z_table[j0 + 1], xs))
        return y, z[:, None]


class _QuadratureOracle:
    """Gauss-Hermite evaluation of log E[exp(f0(x + sqrt(s) xi))] for m = 1."""

    def __init__(self, f0: Callable[[np.ndarray], np.ndarray], horizon: float,
                 degree: int = 201, fd_step: float = 1e-5):
        self.f0 = f0
        self.horizon = horizon
        nodes, weights = np.polynomial.hermite_e.hermegauss(degree)
        self.nodes = nodes
        self.logw = np.log(weights) - 0.5 * math.log(2 * math.pi)
        self.fd_step = fd_step

    def _y(self, t: float, xs: np.ndarray) -> np.ndarray:
        s = self.horizon - t
        if s <= 1e-14:
            return self.f0(xs)
        pts = xs[:, None] + math.sqrt(s) * self.nodes[None, :]
        expo = self.f0(pts.ravel()).reshape(pts.shape) + self.logw[None, :]
        peak = expo.max(axis=1, keepdims=True)
        return (peak[:, 0] + np.log(np.exp(expo - peak).sum(axis=1)))

    def query(self, t: float, x: np.ndarray):
        xs = x[:, 0]
        y = self._y(t, xs)
        h = self.fd_step
        z = (self._y(t, xs + h) - self._y(t, xs - h)) / (2 * h)
        return y, z[:, None]


@dataclass
class BSDEProblem:
    """Markovian terminal data and entropic oracle for the quadratic BSDE."""

    horizon: float
    x0: np.ndarray
    m: int
    f0: Callable[[np.ndarray], np.ndarray]
    f0_sup: Optional[float]
    family: str
    oracle: object
    driver: str = QUADRATIC_DRIVER

    def __post_init__(self):
        if self.driver != QUADRATIC_DRIVER:
            raise NotImplementedError(
                f"only the {QUADRATIC_DRIVER!r} driver is shipped; got {self.driver!r}"
            )
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.x0.shape != (self.m,):
            raise ValueError(f"start point must have shape ({self.m},)")

    # batch oracle: X has shape (paths, m)
    def oracle_batch(self, t: float, x: np.ndarray):
        y, z = self.oracle.query(t, x)
        return np.asarray(y, dtype=float), np.asarray(z, dtype=float)

    def manifest(self, **extra) -> dict:
        d = {
            "family": self.family,
            "horizon": self.horizon,
            "m": self.m,
            "x0": self.x0.tolist(),
            "f0_sup": self.f0_sup,
            "driver": self.driver,
        }
        d.update(extra)
        return d


def entropic_oracle(problem: BSDEProblem, t: float, state) -> Tuple[float, np.ndarray]:
    """(Y, Z) of the entropic solution at a single space-time point."""
    x = np.atleast_1d(np.asarray(state, dtype=float))[None, :]
    y, z = problem.oracle_batch(t, x)
    return float(y[0]), z[0]


# problem families ----------------------------------------------------------

def constant_problem(c: float, horizon: float, m: int = 1) -> BSDEProblem:
    def f0(x):
        x = np.asarray(x, dtype=float)
        base = x if x.ndim <= 1 else x[..., 0]
        return np.full(np.shape(base), float(c))

    oracle = _ClosedFormOracle(
        lambda t, x: np.full(x.shape[0], float(c)),
        lambda t, x: np.zeros_like(x),
    )
    return BSDEProblem(horizon=horizon, x0=np.zeros(m), m=m, f0=f0,
                       f0_sup=abs(c), family=f"constant({c})", oracle=oracle)


def linear_problem(b, horizon: float) -> BSDEProblem:
    """Unbounded demo terminal f0(x) = b . x: Y = b.x + |b|^2 (T-t)/2, Z = b."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m = b.shape[0]
    bsq = float(b @ b)

    def f0(x):
        return np.asarray(x, dtype=float) @ b

    oracle = _ClosedFormOracle(
        lambda t, x: x @ b + 0.5 * bsq * (horizon - t),
        lambda t, x: np.broadcast_to(b, x.shape).copy(),
    )
    return BSDEProblem(horizon=horizon, x0=np.zeros(m), m=m, f0=f0,
                       f0_sup=None, family=f"linear({b.tolist()})", oracle=oracle)


def cosine_problem(a: float, horizon: float, grid_n: int = 512,
                   table_steps: int = 2048, x0: float = 0.0) -> BSDEProblem:
    """Periodic terminal f0(x) = a cos(x); oracle from the grid semigroup."""
    grid = TorusGrid(n=1, points=grid_n)

    def f0(x):
        return a * np.cos(np.asarray(x, dtype=float))

    oracle = _TorusTableOracle(grid, a * np.cos(grid.axis()), horizon,
                               horizon / table_steps)
    return BSDEProblem(horizon=horizon, x0=np.array([x0]), m=1,
                       f0=lambda x: f0(x[..., 0] if np.ndim(x) > 1 else x),
                       f0_sup=abs(a), family=f"cosine({a})", oracle=oracle)


def step_problem(a: float, delta: float, horizon: float,
                 grid_n: int = 512, table_steps: int = 2048) -> BSDEProblem:
    """Smoothed two-valued terminal a * tanh(cos(x)/delta)."""
    grid = TorusGrid(n=1, points=grid_n)

    def f0_axis(x):
        return a * np.tanh(np.cos(np.asarray(x, dtype=float)) / delta)

    oracle = _TorusTableOracle(grid, f0_axis(grid.axis()), horizon,
                               horizon / table_steps)
    sup = abs(a) * math.tanh(1.0 / delta)
    return BSDEProblem(horizon=horizon, x0=np.zeros(1), m=1,
                       f0=lambda x: f0_axis(x[..., 0] if np.ndim(x) > 1 else x),
                       f0_sup=sup, family=f"step({a},{delta})", oracle=oracle)


def gaussian_problem(t0: float, horizon: float, n: int = 1) -> BSDEProblem:
    """Unbounded demo: f(s, x) = log of the forward kernel at time t0 + s.

    Z_t = -X_t/(t0 + T - t), so |Z|^2 grows along the sweep; closed form.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")

    def tau(t):
        return t0 + horizon - t

    def f0(x):
        x = np.asarray(x, dtype=float)
        r2 = (x * x).sum(axis=-1) if x.ndim > 1 else x * x
        return -0.5 * n * math.log(2 * math.pi * t0) - r2 / (2 * t0)

    oracle = _ClosedFormOracle(
        lambda t, x: (-0.5 * n * math.log(2 * math.pi * tau(t))
                      - (x * x).sum(axis=1) / (2 * tau(t))),
        lambda t, x: -x / tau(t),
    )
    return BSDEProblem(horizon=horizon, x0=np.zeros(n), m=n, f0=f0,
                       f0_sup=None, family=f"gaussian({t0})", oracle=oracle)


def quadrature_problem(f0: Callable[[np.ndarray], np.ndarray], f0_sup: float,
                       horizon: float, x0: float = 0.0,
                       degree: int = 201) -> BSDEProblem:
    """Generic bounded scalar terminal, integrated by Gauss-Hermite quadrature."""
    oracle = _QuadratureOracle(f0, horizon, degree=degree)
    return BSDEProblem(horizon=horizon, x0=np.array([x0]), m=1,
                       f0=lambda x: f0(x[..., 0] if np.ndim(x) > 1 else x),
                       f0_sup=f0_sup, family="quadrature", oracle=oracle)


# ---------------------------------------------------------------------------
# path sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    """(Y, |Z|^2) and the Ito accumulators along Brownian paths at mark times.

    ``int_z_dw`` and ``int_zsq_dt`` are the running sums of Z . dw and
    |Z|^2 dt from 0 up to each mark, so any stochastic exponential
    exp(c int Z dw - c^2/2 int |Z|^2 dt) is available at every mark.
    """

    problem: BSDEProblem
    seed: int
    dt: float
    n_paths: int
    times: np.ndarray        # (K,)
    y: np.ndarray            # (P, K)
    z_sq: np.ndarray         # (P, K)
    int_z_dw: np.ndarray     # (P, K)
    int_zsq_dt: np.ndarray   # (P, K)
    x_final: np.ndarray      # (P, m)
    step_abs_residual: float
    step_count: int

    def weights(self, scale: float = 1.0) -> np.ndarray:
        """Stochastic exponential of scale * int Z dB at every mark, (P, K)."""
        return np.exp(scale * self.int_z_dw
                      - 0.5 * scale ** 2 * self.int_zsq_dt)

    def cumulative_residuals(self) -> np.ndarray:
        """Discrete BSDE residual over [t_k, T] per path and mark, (P, K)."""
        yT = self.y[:, -1][:, None]
        aT = self.int_z_dw[:, -1][:, None]
        qT = self.int_zsq_dt[:, -1][:, None]
        return (yT - self.y) - (aT - self.int_z_dw) + 0.5 * (qT - self.int_zsq_dt)


def _mark_indices(t_marks: Sequence[float], dt: float, steps: int) -> List[int]:
    idx = []
    for t in t_marks:
        j = int(round(t / dt))
        if abs(j * dt - t) > 1e-9 * max(1.0, abs(t)) + 1e-12:
            raise ValueError(f"mark time {t} is not on the dt={dt} grid")
        if not (0 <= j <= steps):
            raise ValueError(f"mark time {t} outside [0, T]")
        idx.append(j)
    idx = sorted(set(idx) | {0, steps})
    return idx


def sweep(problem: BSDEProblem, t_marks: Sequence[float], n_paths: int,
          seed: int, dt: float = 1e-2, chunk_size: int = 32768) -> SweepResult:
    """Evaluate the entropic (Y, Z) along seeded Brownian paths.

    The fine step is ``dt``; mark times must sit on that grid (0 and T are
    always included).  Work is chunked over paths; per-path streams make the
    result independent of the chunking.
    """
    T = problem.horizon
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9:
        raise ValueError(f"dt={dt} does not divide the horizon {T}")
    marks = _mark_indices(t_marks, dt, steps)
    mark_col = {j: c for c, j in enumerate(marks)}
    K = len(marks)
    m = problem.m

    y = np.empty((n_paths, K))
    z_sq = np.empty((n_paths, K))
    a_mark = np.empty((n_paths, K))
    q_mark = np.empty((n_paths, K))
    x_final = np.empty((n_paths, m))
    step_abs = 0.0
    step_count = 0

    for start in range(0, n_paths, chunk_size):
        pc = min(chunk_size, n_paths - start)
        sl = slice(start, start + pc)
        dw = brownian_increments(seed, start, pc, steps, m, dt)
        x = np.broadcast_to(problem.x0, (pc, m)).copy()
        a_run = np.zeros(pc)
        q_run = np.zeros(pc)
        prev_y = None
        prev_zdw = None
        prev_zsqdt = None
        for k in range(steps + 1):
            t_k = k * dt
            yk, zk = problem.oracle_batch(t_k, x)
            if prev_y is not None:
                r = yk - prev_y - prev_zdw + 0.5 * prev_zsqdt
                step_abs += float(np.abs(r).sum())
                step_count += pc
            col = mark_col.get(k)
            if col is not None:
                y[sl, col] = yk
                z_sq[sl, col] = (zk ** 2).sum(axis=1)
                a_mark[sl, col] = a_run
                q_mark[sl, col] = q_run
            if k < steps:
                zdw = (zk * dw[:, k, :]).sum(axis=1)
                zsqdt = (zk ** 2).sum(axis=1) * dt
                a_run = a_run + zdw
                q_run = q_run + zsqdt
                x = x + dw[:, k, :]
                prev_y, prev_zdw, prev_zsqdt = yk, zdw, zsqdt
        x_final[sl] = x

    return SweepResult(problem=problem, seed=seed, dt=dt, n_paths=n_paths,
                       times=np.array([j * dt for j in marks]), y=y, z_sq=z_sq,
                       int_z_dw=a_mark, int_zsq_dt=q_mark, x_final=x_final,
                       step_abs_residual=step_abs / max(step_count, 1),
                       step_count=step_count)


def solve_bsde_mc(problem: BSDEProblem, t_grid: Sequence[float], n_paths: int,
                  seed: int, dt: float = 1e-3) -> SweepResult:
    """Sweep wrapper named for its role: the MC solution of the BSDE.

    The returned result carries the per-step and cumulative discrete
    residuals of the backward equation; both shrink as dt decreases.
    """
    return sweep(problem, t_grid, n_paths, seed, dt=dt)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def max_principle_check(problem: BSDEProblem, n_paths: int,
                        t_grid: Sequence[float], seed: int, dt: float = 1e-2,
                        tolerance: float = 1e-6) -> CheckResult:
    """max |Y_t| over paths and grid times against the terminal sup norm."""
    if problem.f0_sup is None:
        raise ValueError("max principle check needs a bounded terminal")
    res = sweep(problem, t_grid, n_paths, seed, dt=dt)
    observed = float(np.abs(res.y).max())
    return CheckResult(bound_value=problem.f0_sup, observed=observed,
                       tolerance=tolerance,
                       context=f"max-principle[{problem.family}]")


@dataclass
class GirsanovWeights:
    """Discrete stochastic exponential R_t at mark times, plus health stats."""

    times: np.ndarray   # (K,)
    r: np.ndarray       # (P, K)
    seed: int

    @property
    def r_final(self) -> np.ndarray:
        return self.r[:, -1]

    def mean_final(self) -> MCEstimate:
        w = self.r_final
        n = w.shape[0]
        return MCEstimate(value=float(w.mean()),
                          stderr=float(w.std(ddof=1) / math.sqrt(n)),
                          n_paths=n, seed=self.seed)

    def ess_final(self) -> float:
        w = self.r_final
        return float(w.sum() ** 2 / (w ** 2).sum())

    @property
    def degenerate(self) -> bool:
        return self.ess_final() < ESS_GUARD_FRACTION * self.r.shape[0]

    def require_healthy(self) -> None:
        if self.degenerate:
            raise WeightDegeneracyError(
                f"effective sample size {self.ess_final():.1f} below "
                f"{ESS_GUARD_FRACTION:.0%} of {self.r.shape[0]} paths"
            )


def girsanov_weights(z: np.ndarray, dw: np.ndarray, dt: float,
                     seed: int = 0) -> GirsanovWeights:
    """Weights from explicit step-resolution arrays.

    ``z`` and ``dw`` have shape (paths, steps, m); returns R at every step
    boundary (paths, steps + 1).
    """
    z = np.asarray(z, dtype=float)
    dw = np.asarray(dw, dtype=float)
    if z.shape != dw.shape:
        raise ValueError(f"z shape {z.shape} != dw shape {dw.shape}")
    zdw = (z * dw).sum(axis=2)
    zsq = (z * z).sum(axis=2) * dt
    log_r = np.cumsum(zdw - 0.5 * zsq, axis=1)
    P, steps = zdw.shape
    r = np.ones((P, steps + 1))
    r[:, 1:] = np.exp(log_r)
    times = np.arange(steps + 1) * dt
    return GirsanovWeights(times=times, r=r, seed=seed)


def weights_from_sweep(res: SweepResult, scale: float = 1.0) -> GirsanovWeights:
    return GirsanovWeights(times=res.times, r=res.weights(scale), seed=res.seed)


def bmo_norm_estimate(problem: BSDEProblem, t: float, n_paths: int, seed: int,
                      dt: float = 1e-2) -> MCEstimate:
    """Q-weighted estimate of E_Q[int_t^T |Z_s|^2 ds].

    Weights are the terminal Girsanov exponentials; the estimator is
    self-normalised with a delta-method stderr and an ESS guard at 5%.
    """
    res = sweep(problem, [t], n_paths, seed, dt=dt)
    gw = weights_from_sweep(res)
    gw.require_healthy()
    col = int(np.argmin(np.abs(res.times - t)))
    integral = res.int_zsq_dt[:, -1] - res.int_zsq_dt[:, col]
    value, stderr, _ = weighted_mean(gw.r_final, integral)
    return MCEstimate(value=value, stderr=stderr, n_paths=n_paths, seed=seed)


@dataclass
class SubmartingaleReport:
    times: np.ndarray
    values: np.ndarray          # weighted means of exp(K t)|Z_t|^2
    stderrs: np.ndarray         # stderr of each weighted mean
    pair_deltas: np.ndarray     # consecutive differences
    pair_stderrs: np.ndarray    # paired delta-method stderr of each difference
    k_rate: float
    n_paths: int
    seed: int

    @property
    def violations(self) -> List[dict]:
        out = []
        for i, (d, se) in enumerate(zip(self.pair_deltas, self.pair_stderrs)):
            if d < -3.0 * se:
                conf = d / se if se > 0 else -math.inf
                out.append({"from_t": float(self.times[i]),
                            "to_t": float(self.times[i + 1]),
                            "delta": float(d), "stderr": float(se),
                            "z_score": float(conf)})
        return out

    @property
    def passed(self) -> bool:
        return not self.violations


def submartingale_diagnostic(problem: BSDEProblem, k_rate: float,
                             t_grid: Sequence[float], n_paths: int, seed: int,
                             dt: float = 1e-2) -> SubmartingaleReport:
    """Monotonicity of t -> E_Q[exp(K t) |Z_t|^2] across the grid.

    Each mark uses its own measurable weight R_t; consecutive pairs are
    compared with a paired delta-method standard error, and a violation is a
    decrease beyond 3 stderr.
    """
    res = sweep(problem, t_grid, n_paths, seed, dt=dt)
    r = res.weights()
    weights_final = GirsanovWeights(times=res.times, r=r, seed=seed)
    weights_final.require_healthy()
    K = len(res.times)
    values = np.empty(K)
    stderrs = np.empty(K)
    infl = np.empty((n_paths, K))
    for c in range(K):
        g = math.exp(k_rate * res.times[c]) * res.z_sq[:, c]
        w = r[:, c]
        v, se, _ = weighted_mean(w, g)
        values[c] = v
        stderrs[c] = se
        infl[:, c] = w * (g - v) / w.mean()
    deltas = np.diff(values)
    pair_se = np.empty(K - 1)
    for c in range(K - 1):
        h = (infl[:, c + 1] - infl[:, c]) / n_paths
        pair_se[c] = float(np.sqrt((h ** 2).sum()))
    return SubmartingaleReport(times=res.times, values=values, stderrs=stderrs,
                               pair_deltas=deltas, pair_stderrs=pair_se,
                               k_rate=k_rate, n_paths=n_paths, seed=seed)


# ---------------------------------------------------------------------------
# reciprocal-identity demo
# ---------------------------------------------------------------------------

@dataclass
class ReciprocalDemoResult:
    estimate: MCEstimate
    exact: Optional[float]      # closed form, constant-terminal branch only
    pde_value: Optional[float]  # semilinear grid solve, general branch only


def _semilinear_table(g0_values: np.ndarray, grid: TorusGrid, horizon: float,
                      n_dim: int, dt_solve: float):
    """Strang-split solve of dv/ds = (1/2) lap v - v^2/n backwards from the
    terminal; returns v and grad(log v) sampled at every solver step."""
    steps = max(1, int(round(horizon / dt_solve)))
    ds = horizon / steps
    lam_k = None
    N = grid.points
    k = np.fft.fftfreq(N, d=1.0 / N)
    lam_k = -(4.0 / grid.h ** 2) * np.sin(np.pi * k / N) ** 2
    amp = (1.0 + 0.25 * ds * lam_k) / (1.0 - 0.25 * ds * lam_k)

    def half_reaction(v):
        return v / (1.0 + v * ds / (2.0 * n_dim))

    v = g0_values.astype(float).copy()
    if v.min() <= 0:
        raise TerminalSignError("terminal data must be strictly positive")
    v_rows = [v.copy()]
    for _ in range(steps):
        v = half_reaction(v)
        v = np.real(np.fft.ifft(amp * np.fft.fft(v)))
        v = half_reaction(v)
        if v.min() <= 0:
            raise TerminalSignError("semilinear solve lost positivity")
        v_rows.append(v.copy())
    v_tab = np.stack(v_rows)          # index j: remaining time s = j * ds
    logv = np.log(v_tab)
    dlogv = np.stack([gradient(grid, row)[0] for row in logv])
    return v_tab, dlogv, ds


def liyau_bsde_demo(c: float, n_dim: int, horizon: float, n_paths: int,
                    seed: int, terminal: Optional[Callable] = None,
                    dt: float = 1e-2, grid_n: int = 512) -> ReciprocalDemoResult:
    """Estimate Y_0 from the identity Y_0 = 1/(T/n + E_Q[1/Y_T]).

    With no ``terminal`` the terminal value is the constant ``c`` (the
    Gaussian-initial equality case): Z vanishes, Q = P, and the identity gives
    exactly c/((T/n) c + 1).  A user terminal (1-D periodic callable, strictly
    positive) activates the general branch: the value function of the
    quadratic-in-Y backward equation is solved on the grid, the measure change
    uses its log-gradient, and the grid value at (0, x0) is reported alongside
    for comparison.
    """
    if horizon <= 0 or n_dim < 1 or n_paths < 1:
        raise ValueError("need positive horizon, dimension and path count")
    steps = int(round(horizon / dt))
    if abs(steps * dt - horizon) > 1e-9:
        raise ValueError(f"dt={dt} does not divide the horizon {horizon}")

    if terminal is None:
        if c <= 0:
            raise TerminalSignError(f"constant terminal must be positive, got {c}")
        exact = c / ((horizon / n_dim) * c + 1.0)
        # Q = P and 1/Y_T is constant across paths
        recips = np.full(n_paths, 1.0 / c)
        e_q = float(recips.mean())
        se_e = float(recips.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
        value = 1.0 / (horizon / n_dim + e_q)
        stderr = se_e * value ** 2
        return ReciprocalDemoResult(
            estimate=MCEstimate(value=value, stderr=stderr,
                                n_paths=n_paths, seed=seed),
            exact=exact, pde_value=None)

    if n_dim != 1:
        raise NotImplementedError("general terminals are 1-D periodic only")
    grid = TorusGrid(n=1, points=grid_n)
    g0 = np.asarray(terminal(grid.axis()), dtype=float)
    if g0.min() <= 0:
        raise TerminalSignError(
            f"terminal sample minimum {g0.min():.3e} is not positive"
        )
    v_tab, dlogv_tab, ds = _semilinear_table(g0, grid, horizon, n_dim, dt)

    def interp(table, s, xs):
        pos_t = s / ds
        j0 = min(int(math.floor(pos_t + 1e-12)), table.shape[0] - 2)
        lam = pos_t - j0
        posx = np.mod(xs, grid.length) / grid.h
        i0 = np.floor(posx).astype(int) % grid.points
        frac = posx - np.floor(posx)
        i1 = (i0 + 1) % grid.points
        row0 = (1 - frac) * table[j0][i0] + frac * table[j0][i1]
        row1 = (1 - frac) * table[j0 + 1][i0] + frac * table[j0 + 1][i1]
        return (1 - lam) * row0 + lam * row1

    x0 = 0.0
    pde_value = float(interp(v_tab, horizon, np.array([x0]))[0])

    # measure change: theta_t = grad log v(t, X_t), dQ/dP = exp(int theta dB - ...)
    a_run = np.zeros(n_paths)
    q_run = np.zeros(n_paths)
    x = np.full(n_paths, x0)
    chunked = brownian_increments(seed, 0, n_paths, steps, 1, dt)[:, :, 0]
    for k in range(steps):
        s_remaining = horizon - k * dt
        theta = interp(dlogv_tab, s_remaining, x)
        dwk = chunked[:, k]
        a_run += theta * dwk
        q_run += theta ** 2 * dt
        x = x + dwk
    r_T = np.exp(a_run - 0.5 * q_run)
    g_T = np.asarray(terminal(np.mod(x, grid.length)), dtype=float)
    if g_T.min() <= 0:
        raise TerminalSignError("terminal sample along paths is not positive")
    e_q, se_e, ess = weighted_mean(r_T, 1.0 / g_T)
    if ess < ESS_GUARD_FRACTION * n_paths:
        raise WeightDegeneracyError(f"demo weights degenerate (ESS={ess:.1f})")
    value = 1.0 / (horizon / n_dim + e_q)
    stderr = se_e * value ** 2
    return ReciprocalDemoResult(
        estimate=MCEstimate(value=value, stderr=stderr,
                            n_paths=n_paths, seed=seed),
        exact=None, pde_value=pde_value)


# ---------------------------------------------------------------------------
# manifest / report helpers
# ---------------------------------------------------------------------------

def params_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def estimate_csv_row(op: str, params: dict, est: MCEstimate) -> list:
    return [op, params_hash(params), repr(est.value), repr(est.stderr),
            est.n_paths, est.seed]


ESTIMATE_CSV_HEADER = ["op", "params_hash", "value", "stderr", "n_paths", "seed"]
