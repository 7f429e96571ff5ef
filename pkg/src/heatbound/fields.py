"""Vector-field calculus on R^n: Lie brackets, a curvature proxy built from
double brackets, estimation of the structure constants C1/C2 entering the
gradient bounds, and a Frobenius integrability check.

Index conventions used throughout:

* ``value(alpha, x)`` returns the components ``A_alpha^j`` as a length-n array.
* ``d1(alpha, x)[i, j] = d A_alpha^j / d x^i`` (derivative index first).
* ``d2(alpha, x)[i, k, j] = d^2 A_alpha^j / d x^i d x^k``.

``alpha = 0`` is the drift field; ``alpha = 1..m`` are the diffusion fields.
"""

from __future__ import annotations

import importlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import qmc


class DegenerateConditionError(ValueError):
    """The quadratic-form condition admits no finite constant.

    Raised when the denominator form vanishes along a direction where the
    left-hand side is negative; carries the witness point and the
    unconstrained minimum of the left-hand side there.
    """

    def __init__(self, point: np.ndarray, lhs_min: float, which: str):
        self.point = np.asarray(point, dtype=float)
        self.lhs_min = float(lhs_min)
        self.which = which
        super().__init__(
            f"{which}: denominator-degenerate at x={self.point.tolist()} "
            f"with unconstrained LHS minimum {self.lhs_min:.3e}"
        )


# ---------------------------------------------------------------------------
# field specification
# ---------------------------------------------------------------------------

@dataclass
class VectorFieldSpec:
    """A family A_0..A_m of smooth vector fields with derivative access.

    Derivatives come either from analytic callbacks or from central finite
    differences with step ``h_fd`` (exact on quadratic fields up to rounding).
    ``derivative_bound`` records the caller-declared bound on the first
    derivatives; it is reporting-only, never enforced.
    """

    n: int
    m: int
    value: Callable[[int, np.ndarray], np.ndarray]
    d1: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    d2: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    h_fd: float = 1e-5
    derivative_bound: Optional[float] = None
    name: str = "custom"
    value_batch: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    d1_batch: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    d2_batch: Optional[Callable[[int, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.m < 1:
            raise ValueError(f"need at least one diffusion field, got m={self.m}")
        if self.h_fd <= 0:
            raise ValueError(f"finite-difference step must be positive, got {self.h_fd}")

    @property
    def derivative_mode(self) -> str:
        return "analytic" if self.d1 is not None else "finite-difference"

    def _check_index(self, alpha: int) -> None:
        if not (0 <= alpha <= self.m):
            raise IndexError(f"field index {alpha} out of range 0..{self.m}")

    def value_at(self, alpha: int, x: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        v = np.asarray(self.value(alpha, np.asarray(x, dtype=float)), dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"value callback returned shape {v.shape}, "
                             f"expected ({self.n},)")
        return v

    def d1_at(self, alpha: int, x: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        x = np.asarray(x, dtype=float)
        if self.d1 is not None:
            out = np.asarray(self.d1(alpha, x), dtype=float)
            if out.shape != (self.n, self.n):
                raise ValueError(f"d1 callback returned shape {out.shape}")
            return out
        h = self.h_fd
        out = np.empty((self.n, self.n))
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = h
            out[i] = (self.value_at(alpha, x + e) - self.value_at(alpha, x - e)) / (2 * h)
        return out

    def d2_at(self, alpha: int, x: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        x = np.asarray(x, dtype=float)
        if self.d2 is not None:
            out = np.asarray(self.d2(alpha, x), dtype=float)
            if out.shape != (self.n, self.n, self.n):
                raise ValueError(f"d2 callback returned shape {out.shape}")
            return out
        h = self.h_fd
        out = np.empty((self.n, self.n, self.n))
        base = self.value_at(alpha, x)
        for i in range(self.n):
            ei = np.zeros(self.n)
            ei[i] = h
            out[i, i] = (self.value_at(alpha, x + ei) - 2 * base
                         + self.value_at(alpha, x - ei)) / h ** 2
            for k in range(i + 1, self.n):
                ek = np.zeros(self.n)
                ek[k] = h
                mixed = (self.value_at(alpha, x + ei + ek)
                         - self.value_at(alpha, x + ei - ek)
                         - self.value_at(alpha, x - ei + ek)
                         + self.value_at(alpha, x - ei - ek)) / (4 * h ** 2)
                out[i, k] = mixed
                out[k, i] = mixed
        return out

    # Batched variants used by the flow simulator; fall back to a loop.
    def values_at(self, alpha: int, xs: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        xs = np.asarray(xs, dtype=float)
        if self.value_batch is not None:
            return np.asarray(self.value_batch(alpha, xs), dtype=float)
        return np.stack([self.value_at(alpha, x) for x in xs])

    def d1s_at(self, alpha: int, xs: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        xs = np.asarray(xs, dtype=float)
        if self.d1_batch is not None:
            return np.asarray(self.d1_batch(alpha, xs), dtype=float)
        return np.stack([self.d1_at(alpha, x) for x in xs])

    def d2s_at(self, alpha: int, xs: np.ndarray) -> np.ndarray:
        self._check_index(alpha)
        xs = np.asarray(xs, dtype=float)
        if self.d2_batch is not None:
            return np.asarray(self.d2_batch(alpha, xs), dtype=float)
        return np.stack([self.d2_at(alpha, x) for x in xs])


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

def constant_fields(vectors: Sequence[Sequence[float]]) -> VectorFieldSpec:
    """Fields A_alpha(x) = const; ``vectors[alpha]`` is A_alpha, alpha = 0..m."""
    vecs = np.asarray(vectors, dtype=float)
    if vecs.ndim != 2 or vecs.shape[0] < 2:
        raise ValueError("need at least [A0, A1] constant vectors")
    m = vecs.shape[0] - 1
    n = vecs.shape[1]
    zero1 = np.zeros((n, n))
    zero2 = np.zeros((n, n, n))
    return VectorFieldSpec(
        n=n, m=m,
        value=lambda a, x: vecs[a].copy(),
        d1=lambda a, x: zero1.copy(),
        d2=lambda a, x: zero2.copy(),
        derivative_bound=0.0,
        name="constant",
        value_batch=lambda a, xs: np.broadcast_to(vecs[a], xs.shape).copy(),
        d1_batch=lambda a, xs: np.zeros((len(xs), n, n)),
        d2_batch=lambda a, xs: np.zeros((len(xs), n, n, n)),
    )


def linear_fields(matrices: Sequence[Sequence[Sequence[float]]],
                  offsets: Optional[Sequence[Sequence[float]]] = None) -> VectorFieldSpec:
    """Affine fields A_alpha(x) = M_alpha @ x + b_alpha, alpha = 0..m."""
    mats = np.asarray(matrices, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError("matrices must be a stack of square matrices")
    n = mats.shape[1]
    m = mats.shape[0] - 1
    if m < 1:
        raise ValueError("need at least [M0, M1]")
    if offsets is None:
        offs = np.zeros((m + 1, n))
    else:
        offs = np.asarray(offsets, dtype=float)
        if offs.shape != (m + 1, n):
            raise ValueError(f"offsets must have shape {(m + 1, n)}")
    # d1[i, j] = d(M x + b)^j / dx^i = M[j, i]
    return VectorFieldSpec(
        n=n, m=m,
        value=lambda a, x: mats[a] @ x + offs[a],
        d1=lambda a, x: mats[a].T.copy(),
        d2=lambda a, x: np.zeros((n, n, n)),
        derivative_bound=float(np.max(np.abs(mats))),
        name="linear",
        value_batch=lambda a, xs: xs @ mats[a].T + offs[a],
        d1_batch=lambda a, xs: np.broadcast_to(mats[a].T, (len(xs), n, n)).copy(),
        d2_batch=lambda a, xs: np.zeros((len(xs), n, n, n)),
    )


def heisenberg_fields() -> VectorFieldSpec:
    """The Heisenberg frame on R^3: A1 = d/dx, A2 = d/dy + x d/dz, A0 = 0."""
    n = 3

    def value(a, x):
        if a == 0:
            return np.zeros(3)
        if a == 1:
            return np.array([1.0, 0.0, 0.0])
        return np.array([0.0, 1.0, x[0]])

    def d1(a, x):
        out = np.zeros((3, 3))
        if a == 2:
            out[0, 2] = 1.0  # dA2^z/dx
        return out

    def value_batch(a, xs):
        out = np.zeros_like(xs)
        if a == 1:
            out[:, 0] = 1.0
        elif a == 2:
            out[:, 1] = 1.0
            out[:, 2] = xs[:, 0]
        return out

    def d1_batch(a, xs):
        out = np.zeros((len(xs), 3, 3))
        if a == 2:
            out[:, 0, 2] = 1.0
        return out

    return VectorFieldSpec(
        n=n, m=2, value=value, d1=d1,
        d2=lambda a, x: np.zeros((3, 3, 3)),
        derivative_bound=1.0, name="heisenberg",
        value_batch=value_batch, d1_batch=d1_batch,
        d2_batch=lambda a, xs: np.zeros((len(xs), 3, 3, 3)),
    )


def spec_from_config(config: dict) -> VectorFieldSpec:
    """Build a field family from a config mapping.

    Supported: ``{"family": "constant", "vectors": [...]}``,
    ``{"family": "linear", "matrices": [...], "offsets": [...]}``,
    ``{"family": "heisenberg"}`` and
    ``{"family": "plugin", "module": "pkg.mod", "attribute": "make_spec"}``
    where the attribute is a zero-argument callable returning a spec.
    """
    family = config.get("family")
    if family == "constant":
        return constant_fields(config["vectors"])
    if family == "linear":
        return linear_fields(config["matrices"], config.get("offsets"))
    if family == "heisenberg":
        return heisenberg_fields()
    if family == "plugin":
        mod = importlib.import_module(config["module"])
        factory = getattr(mod, config.get("attribute", "make_spec"))
        spec = factory()
        if not isinstance(spec, VectorFieldSpec):
            raise TypeError("plugin factory must return a VectorFieldSpec")
        return spec
    raise ValueError(f"unknown field family {family!r}")


def load_spec(path: str) -> VectorFieldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_config(json.load(fh))


# ---------------------------------------------------------------------------
# brackets
# ---------------------------------------------------------------------------

def lie_bracket(spec: VectorFieldSpec, beta: int, alpha: int,
                x: np.ndarray) -> np.ndarray:
    """Coefficients of [A_beta, A_alpha]: A_beta^i dA_alpha^j/dx^i - A_alpha^i dA_beta^j/dx^i."""
    x = np.asarray(x, dtype=float)
    vb = spec.value_at(beta, x)
    va = spec.value_at(alpha, x)
    return vb @ spec.d1_at(alpha, x) - va @ spec.d1_at(beta, x)


def triple_bracket(spec: VectorFieldSpec, beta: int, alpha: int,
                   x: np.ndarray) -> np.ndarray:
    """Coefficients of [A_beta, [A_beta, A_alpha]] via the closed five-term formula.

    Requires second-derivative data; agrees with the nested two-bracket
    evaluation for exact derivatives.
    """
    if not (1 <= beta <= spec.m) or not (1 <= alpha <= spec.m):
        raise IndexError(f"triple bracket needs 1 <= beta, alpha <= {spec.m}")
    x = np.asarray(x, dtype=float)
    vb = spec.value_at(beta, x)
    va = spec.value_at(alpha, x)
    db = spec.d1_at(beta, x)    # db[i, j] = dA_beta^j/dx^i
    da = spec.d1_at(alpha, x)
    hb = spec.d2_at(beta, x)    # hb[i, k, j] = d2 A_beta^j / dx^i dx^k
    ha = spec.d2_at(alpha, x)
    # A_b^j A_b^i d2A_a^k/dx^i dx^j
    t1 = np.einsum("j,i,ijk->k", vb, vb, ha)
    # -A_b^j A_a^i d2A_b^k/dx^i dx^j
    t2 = -np.einsum("j,i,ijk->k", vb, va, hb)
    # +A_b^i (dA_a^k/dx^j)(dA_b^j/dx^i)
    t3 = np.einsum("i,jk,ij->k", vb, da, db)
    # -2 A_b^j (dA_a^i/dx^j)(dA_b^k/dx^i)
    t4 = -2.0 * np.einsum("j,ji,ik->k", vb, da, db)
    # +A_a^i (dA_b^j/dx^i)(dA_b^k/dx^j)
    t5 = np.einsum("i,ij,jk->k", va, db, db)
    return t1 + t2 + t3 + t4 + t5


def ricci_proxy(spec: VectorFieldSpec, alpha: int, x: np.ndarray) -> np.ndarray:
    """Curvature proxy R_alpha = sum over beta of [A_beta, [A_beta, A_alpha]]."""
    if not (1 <= alpha <= spec.m):
        raise IndexError(f"ricci proxy needs 1 <= alpha <= {spec.m}")
    x = np.asarray(x, dtype=float)
    out = np.zeros(spec.n)
    for beta in range(1, spec.m + 1):
        out += triple_bracket(spec, beta, alpha, x)
    return out


@dataclass
class BracketTable:
    """All bracket data of a field family at one point."""

    spec: VectorFieldSpec
    x: np.ndarray

    def pair(self, beta: int, alpha: int) -> np.ndarray:
        return lie_bracket(self.spec, beta, alpha, self.x)

    def triple(self, beta: int, alpha: int) -> np.ndarray:
        return triple_bracket(self.spec, beta, alpha, self.x)

    def ricci(self, alpha: int) -> np.ndarray:
        return ricci_proxy(self.spec, alpha, self.x)


# ---------------------------------------------------------------------------
# quadratic-form conditions
# ---------------------------------------------------------------------------

def _frame_data(spec: VectorFieldSpec, x: np.ndarray):
    """Values and pairwise brackets needed by both condition forms."""
    a = [spec.value_at(alpha, x) for alpha in range(spec.m + 1)]
    br = {}
    for beta in range(spec.m + 1):
        for alpha in range(1, spec.m + 1):
            br[(beta, alpha)] = lie_bracket(spec, beta, alpha, x)
    return a, br


def condition_c1_matrices(spec: VectorFieldSpec, x: np.ndarray):
    """Symmetric matrices (S, E) of the first structure condition at x.

    Joint variable v = (xi, theta_1, ..., theta_m) in R^{n(m+1)}; the condition
    reads v' S v >= -C1 * v' E v with E acting on the xi block only.
    """
    n, m = spec.n, spec.m
    a, br = _frame_data(spec, x)
    dim = n * (m + 1)
    S = np.zeros((dim, dim))
    E = np.zeros((dim, dim))
    P = np.zeros((n, n))
    for alpha in range(1, m + 1):
        P += np.outer(a[alpha], a[alpha])
    E[:n, :n] = P
    for beta in range(1, m + 1):
        sl = slice(n * beta, n * (beta + 1))
        S[sl, sl] = P
        M = np.zeros((n, n))
        for alpha in range(1, m + 1):
            b = br[(beta, alpha)]
            M += np.outer(a[alpha], b) + np.outer(b, a[alpha])
        S[:n, sl] = M
        S[sl, :n] = M.T
    return S, E


def condition_c2_matrices(spec: VectorFieldSpec, x: np.ndarray):
    """Symmetric matrices (S, E) of the second structure condition at x.

    Variable is xi in R^n alone: xi' S xi >= -C2 * xi' E xi, where S collects
    the curvature proxy, the drift brackets [A_0, A_alpha] and the squared
    pairwise brackets.
    """
    n, m = spec.n, spec.m
    a, br = _frame_data(spec, x)
    W = np.zeros((n, n))
    for alpha in range(1, m + 1):
        r = ricci_proxy(spec, alpha, x)
        W += np.outer(a[alpha], r) + 2.0 * np.outer(a[alpha], br[(0, alpha)])
        for beta in range(1, m + 1):
            b = br[(beta, alpha)]
            W += np.outer(b, b)
    S = 0.5 * (W + W.T)
    E = np.zeros((n, n))
    for alpha in range(1, m + 1):
        E += np.outer(a[alpha], a[alpha])
    return S, E


def _smallest_constant(S: np.ndarray, E: np.ndarray, tol: float = 1e-10):
    """Smallest c >= 0 with S + c E psd, or None if no finite c exists.

    Returns (c, lhs_min_on_kernel).  E is psd; the analysis splits along
    eigenvectors of E with eigenvalue above/below ``tol * max_eig``.
    """
    S = 0.5 * (S + S.T)
    E = 0.5 * (E + E.T)
    evals, evecs = np.linalg.eigh(E)
    emax = max(evals.max(), 0.0)
    cut = tol * max(emax, 1.0)
    pos = evals > cut
    if not pos.any():
        # denominator identically zero: finite c exists iff S is psd
        smin = float(np.linalg.eigvalsh(S).min())
        if smin < -tol * max(1.0, float(np.abs(S).max())):
            return None, smin
        return 0.0, smin
    U1 = evecs[:, pos]
    L1 = evals[pos]
    if pos.all():
        mu = scipy.linalg.eigh(S, E, eigvals_only=True)
        return max(0.0, -float(mu.min())), 0.0
    U0 = evecs[:, ~pos]
    S00 = U0.T @ S @ U0
    w0, v0 = np.linalg.eigh(S00)
    scale = max(1.0, float(np.abs(S).max()))
    if w0.min() < -tol * scale:
        return None, float(w0.min())
    S10 = U1.T @ S @ U0
    # directions in ker(E) where S00 also vanishes must decouple from the rest
    null = np.abs(w0) <= tol * scale
    if null.any():
        coupling = S10 @ v0[:, null]
        if np.abs(coupling).max() > tol * scale:
            return None, 0.0
    # Schur complement onto the positive-denominator subspace
    wpos = ~null
    if wpos.any():
        Vp = v0[:, wpos]
        pinv = Vp @ np.diag(1.0 / w0[wpos]) @ Vp.T
        T = U1.T @ S @ U1 - S10 @ pinv @ S10.T
    else:
        T = U1.T @ S @ U1
    mu = scipy.linalg.eigh(0.5 * (T + T.T), np.diag(L1), eigvals_only=True)
    return max(0.0, -float(mu.min())), 0.0


def sample_box(box: Sequence[Sequence[float]], n_samples: int, seed: int) -> np.ndarray:
    """Nested sampling of a box: interleaved seeded-uniform and Halton points.

    Prefix property: the first k rows for ``n_samples = N`` equal the rows for
    ``n_samples = k``, so growing the sample can only grow a max-based
    estimate.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ValueError("box must be a sequence of (lo, hi) pairs")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    lo, hi = box[:, 0], box[:, 1]
    if np.any(hi < lo):
        raise ValueError("box is empty")
    d = box.shape[0]
    n_uniform = (n_samples + 1) // 2
    n_halton = n_samples // 2
    rng = np.random.default_rng(seed)
    uniform = rng.uniform(lo, hi, size=(n_uniform, d))
    out = np.empty((n_samples, d))
    out[0::2] = uniform
    if n_halton:
        halton = qmc.Halton(d=d, scramble=False).random(n_halton)
        out[1::2] = lo + halton * (hi - lo)
    return out


def estimate_c1(spec: VectorFieldSpec, sample_domain: Sequence[Sequence[float]],
                n_samples: int, seed: int) -> float:
    """Smallest constant C1 for the first structure condition over sampled points.

    Per point the exact optimum over (xi, theta) comes from a generalized
    eigenvalue analysis of the associated quadratic forms; the estimate is the
    maximum over the sample.  Raises :class:`DegenerateConditionError` when no
    finite constant exists at some sampled point.
    """
    best = 0.0
    for x in sample_box(sample_domain, n_samples, seed):
        S, E = condition_c1_matrices(spec, x)
        c, lhs_min = _smallest_constant(S, E)
        if c is None:
            raise DegenerateConditionError(x, lhs_min, "C1")
        best = max(best, c)
    return best


def estimate_c2(spec: VectorFieldSpec, sample_domain: Sequence[Sequence[float]],
                n_samples: int, seed: int) -> float:
    """Smallest constant C2 for the second structure condition over sampled points."""
    best = 0.0
    for x in sample_box(sample_domain, n_samples, seed):
        S, E = condition_c2_matrices(spec, x)
        c, lhs_min = _smallest_constant(S, E)
        if c is None:
            raise DegenerateConditionError(x, lhs_min, "C2")
        best = max(best, c)
    return best


# ---------------------------------------------------------------------------
# Frobenius integrability
# ---------------------------------------------------------------------------

@dataclass
class FrobeniusReport:
    max_relative_residual: float
    worst_point: Optional[np.ndarray]
    effective_ranks: list
    min_rank: int


def frobenius_report(spec: VectorFieldSpec,
                     sample_points: Sequence[np.ndarray],
                     atol: float = 1e-12) -> FrobeniusReport:
    """Residuals of all brackets [A_beta, A_alpha] against span{A_1..A_m}.

    The relative residual at a point is ||b - proj b|| / ||b|| for each
    bracket b (0 for vanishing brackets); rank deficiency of the span is
    handled by the pseudo-inverse and reported per point.
    """
    points = [np.asarray(p, dtype=float) for p in sample_points]
    if not points:
        raise ValueError("need at least one sample point")
    worst = 0.0
    worst_point = None
    ranks = []
    for x in points:
        frame = np.stack([spec.value_at(alpha, x)
                          for alpha in range(1, spec.m + 1)], axis=1)
        ranks.append(int(np.linalg.matrix_rank(frame, tol=1e-10)))
        pinv = np.linalg.pinv(frame, rcond=1e-12)
        for beta in range(spec.m + 1):
            for alpha in range(1, spec.m + 1):
                b = lie_bracket(spec, beta, alpha, x)
                norm = np.linalg.norm(b)
                if norm <= atol:
                    continue
                resid = np.linalg.norm(b - frame @ (pinv @ b)) / norm
                if resid > worst:
                    worst = resid
                    worst_point = x
    return FrobeniusReport(max_relative_residual=worst, worst_point=worst_point,
                           effective_ranks=ranks, min_rank=min(ranks))


def frobenius_check(spec: VectorFieldSpec,
                    sample_points: Sequence[np.ndarray]) -> float:
    """Maximum relative bracket residual over the sample (0 means integrable)."""
    return frobenius_report(spec, sample_points).max_relative_residual


# ---------------------------------------------------------------------------
# condition report
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    """Estimated structure constants plus the Frobenius residual."""

    c1_hat: float
    c2_hat: float
    frobenius_residual: float
    sample_count: int
    sample_domain: list
    c1_status: str = "ok"
    c2_status: str = "ok"
    min_span_rank: Optional[int] = None

    @property
    def k_hat(self) -> float:
        return self.c1_hat + self.c2_hat

    def to_dict(self) -> dict:
        return {
            "c1_hat": self.c1_hat,
            "c2_hat": self.c2_hat,
            "k_hat": self.k_hat,
            "frobenius_residual": self.frobenius_residual,
            "sample_count": self.sample_count,
            "sample_domain": self.sample_domain,
            "c1_status": self.c1_status,
            "c2_status": self.c2_status,
            "min_span_rank": self.min_span_rank,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def condition_report(spec: VectorFieldSpec,
                     sample_domain: Sequence[Sequence[float]],
                     n_samples: int, seed: int) -> ConditionReport:
    """Estimate C1, C2 and the Frobenius residual on one shared sample."""
    points = sample_box(sample_domain, n_samples, seed)
    c1, c1_status = 0.0, "ok"
    c2, c2_status = 0.0, "ok"
    try:
        c1 = estimate_c1(spec, sample_domain, n_samples, seed)
    except DegenerateConditionError:
        c1, c1_status = math.nan, "denominator-degenerate"
    try:
        c2 = estimate_c2(spec, sample_domain, n_samples, seed)
    except DegenerateConditionError:
        c2, c2_status = math.nan, "denominator-degenerate"
    frob = frobenius_report(spec, list(points))
    return ConditionReport(
        c1_hat=c1, c2_hat=c2,
        frobenius_residual=frob.max_relative_residual,
        sample_count=n_samples,
        sample_domain=np.asarray(sample_domain, dtype=float).tolist(),
        c1_status=c1_status, c2_status=c2_status,
        min_span_rank=frob.min_rank,
    )
