"""Euler-Maruyama simulation of the stochastic flow phi of
dphi = A_0(phi) dt + sum_alpha A_alpha(phi) o dw^alpha     (Stratonovich),
together with its Jacobian J = dphi/dx and the inverse K = J^{-1}.

Everything is integrated in Ito form with the converted drifts:

* phi:   dphi^j   = [A_0^j + (1/2) sum_a A_a^i dA_a^j/dx^i] dt + sum_a A_a^j dw^a
* J:     dJ       = B J dt + sum_a G_a J dw^a
* K:     dK       = -K C dt - sum_a K G_a dw^a

with G_a[i, l] = dA_a^i/dx^l, S_a[i, l] = A_a^k d2A_a^i/(dx^l dx^k),
B = G_0 + (1/2) sum_a (S_a + G_a^2) and C = G_0 + (1/2) sum_a (S_a - G_a^2).
In the continuum d(K J) = 0 exactly, so the residual ||J K - I|| measures the
time-discretisation error alone.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .fields import VectorFieldSpec
from .sampling import brownian_increments, path_generator


class BlowUpError(RuntimeError):
    """Too many paths left the finite range during integration."""


@dataclass
class FlowConfig:
    spec: VectorFieldSpec
    t_end: float
    dt: float
    n_paths: int
    seed: int
    x0: Sequence[float]
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_paths < 1:
            raise ValueError(f"need at least one path, got {self.n_paths}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end={self.t_end} must be at least dt={self.dt}")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.spec.n,):
            raise ValueError(f"start point has shape {self.x0.shape}, "
                             f"expected ({self.spec.n},)")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class PathEnsemble:
    """Recorded flow trajectories plus the driving increments.

    ``phi``/``jac``/``kinv`` are recorded every ``record_every`` steps at the
    times in ``times`` (always including 0 and t_end); ``increments`` holds
    every Brownian increment so the run regenerates bit-identically from
    (seed, path index).
    """

    spec: VectorFieldSpec
    seed: int
    dt: float
    steps: int
    times: np.ndarray          # (K,)
    increments: np.ndarray     # (P, steps, m)
    phi: np.ndarray            # (P, K, n)
    jac: np.ndarray            # (P, K, n, n)
    kinv: np.ndarray           # (P, K, n, n)
    blown: np.ndarray          # (P,) bool

    @property
    def n_paths(self) -> int:
        return self.phi.shape[0]

    def alive(self) -> np.ndarray:
        return ~self.blown

    def exclusion_fraction(self) -> float:
        return float(self.blown.mean())

    def require_healthy(self, max_fraction: float = 1e-3) -> None:
        frac = self.exclusion_fraction()
        if frac > max_fraction:
            raise BlowUpError(
                f"{frac:.2%} of paths blew up (limit {max_fraction:.2%})"
            )

    def summary_rows(self) -> List[list]:
        alive = self.alive()
        rows = []
        for k, t in enumerate(self.times):
            pos = self.phi[alive, k, :]
            rows.append([repr(float(t)),
                         repr(float(pos.mean())),
                         repr(float(pos.std())),
                         int(alive.sum())])
        return rows

    def summary_to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "mean", "std", "paths"])
            writer.writerows(self.summary_rows())

    def save_binary(self, path: str) -> None:
        """Little-endian dump: header (n, m, recorded steps, paths, seed) as
        int64, then the recorded phi trajectories as float64."""
        n, m = self.spec.n, self.spec.m
        with open(path, "wb") as fh:
            fh.write(struct.pack("<5q", n, m, len(self.times),
                                 self.n_paths, self.seed))
            fh.write(self.times.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.phi, dtype="<f8").tobytes())


def load_binary(path: str):
    """Read back a :meth:`PathEnsemble.save_binary` dump."""
    with open(path, "rb") as fh:
        n, m, k, p, seed = struct.unpack("<5q", fh.read(40))
        times = np.frombuffer(fh.read(8 * k), dtype="<f8")
        phi = np.frombuffer(fh.read(8 * p * k * n), dtype="<f8").reshape(p, k, n)
    return {"n": n, "m": m, "paths": p, "seed": seed, "times": times, "phi": phi}


def _batched_fields(spec: VectorFieldSpec, xs: np.ndarray):
    """Values, transposed first derivatives and second-derivative contractions
    at a batch of points.

    Returns (vals, g, s): vals[a] is (P, n); g[a][p, i, l] = dA_a^i/dx^l;
    s[a][p, i, l] = A_a^k d2A_a^i/(dx^l dx^k).
    """
    vals, g, s = [], [], []
    for alpha in range(spec.m + 1):
        v = spec.values_at(alpha, xs)
        d1 = spec.d1s_at(alpha, xs)           # d1[p, l, i] = dA^i/dx^l
        vals.append(v)
        g.append(np.swapaxes(d1, 1, 2))
        if alpha >= 1:
            d2 = spec.d2s_at(alpha, xs)       # d2[p, l, k, i]
            s.append(np.einsum("pk,plki->pil", v, d2))
        else:
            s.append(None)
    return vals, g, s


def simulate_flow(cfg: FlowConfig) -> PathEnsemble:
    """Integrate phi, J and K from shared increments; flag non-finite paths.

    A path that leaves the finite range is frozen at its last finite state and
    marked in ``blown``; downstream estimators exclude flagged paths and
    :meth:`PathEnsemble.require_healthy` aborts when exclusions exceed 0.1%.
    """
    spec = cfg.spec
    n, m, P = spec.n, spec.m, cfg.n_paths
    steps = cfg.steps
    dw = brownian_increments(cfg.seed, 0, P, steps, m, cfg.dt)

    record_idx = list(range(0, steps + 1, cfg.record_every))
    if record_idx[-1] != steps:
        record_idx.append(steps)
    record_set = set(record_idx)
    times = np.array([k * cfg.dt for k in record_idx])
    K_rec = len(record_idx)

    phi = np.broadcast_to(cfg.x0, (P, n)).copy()
    J = np.broadcast_to(np.eye(n), (P, n, n)).copy()
    Km = J.copy()
    ok = np.ones(P, dtype=bool)

    phi_rec = np.empty((P, K_rec, n))
    jac_rec = np.empty((P, K_rec, n, n))
    kinv_rec = np.empty((P, K_rec, n, n))
    rec_pos = 0

    def record():
        nonlocal rec_pos
        phi_rec[:, rec_pos] = phi
        jac_rec[:, rec_pos] = J
        kinv_rec[:, rec_pos] = Km
        rec_pos += 1

    record()
    with np.errstate(all="ignore"):
        for k in range(steps):
            vals, g, s = _batched_fields(spec, phi)
            drift = vals[0].copy()
            BJ = g[0].copy()
            CK = g[0].copy()
            diff_phi = np.zeros_like(phi)
            dJ_noise = np.zeros_like(J)
            dK_noise = np.zeros_like(Km)
            for a in range(1, m + 1):
                va, ga, sa = vals[a], g[a], s[a]
                # Ito drift correction A_a^i dA_a^j/dx^i = (g_a v_a)^j
                drift += 0.5 * np.einsum("pji,pi->pj", ga, va)
                gg = np.einsum("pij,pjl->pil", ga, ga)
                BJ += 0.5 * (sa + gg)
                CK += 0.5 * (sa - gg)
                w = dw[:, k, a - 1][:, None]
                diff_phi += va * w
                dJ_noise += np.einsum("pil,plj->pij", ga, J) * w[:, :, None]
                dK_noise += np.einsum("pil,plj->pij", Km, ga) * w[:, :, None]
            phi_new = phi + drift * cfg.dt + diff_phi
            J_new = J + np.einsum("pil,plj->pij", BJ, J) * cfg.dt + dJ_noise
            K_new = Km - np.einsum("pil,plj->pij", Km, CK) * cfg.dt - dK_noise

            finite = (np.isfinite(phi_new).all(axis=1)
                      & np.isfinite(J_new).all(axis=(1, 2))
                      & np.isfinite(K_new).all(axis=(1, 2)))
            ok = ok & finite
            phi[ok] = phi_new[ok]
            J[ok] = J_new[ok]
            Km[ok] = K_new[ok]
            if (k + 1) in record_set:
                record()

    return PathEnsemble(spec=spec, seed=cfg.seed, dt=cfg.dt, steps=steps,
                        times=times, increments=dw, phi=phi_rec,
                        jac=jac_rec, kinv=kinv_rec, blown=~ok)


def jk_identity_residual(ensemble: PathEnsemble) -> float:
    """Max over healthy paths and recorded times of ||J K - I||_inf."""
    alive = ensemble.alive()
    if not alive.any():
        raise BlowUpError("no healthy paths")
    J = ensemble.jac[alive]
    K = ensemble.kinv[alive]
    eye = np.eye(ensemble.spec.n)
    prod = np.einsum("pkij,pkjl->pkil", J, K)
    return float(np.max(np.abs(prod - eye)))


class ZPair(NamedTuple):
    """Both evaluations of the Z process at one recorded time.

    ``transport`` pushes the supplied Euclidean gradient through J and back
    through K (the flow representation); ``direct`` applies the fields to the
    gradient at the current position.  The two agree up to the J K residual.
    """

    transport: np.ndarray  # (P, m)
    direct: np.ndarray     # (P, m)


def z_from_flow(ensemble: PathEnsemble,
                grad_f: Callable[[np.ndarray], np.ndarray],
                record_index: int) -> ZPair:
    """Z^alpha along paths at a recorded time, both ways.

    ``grad_f`` maps positions (P, n) to the Euclidean gradient (P, n) of the
    relevant solution at the matching time; the caller owns that bookkeeping.
    """
    spec = ensemble.spec
    phi = ensemble.phi[:, record_index, :]
    g = np.asarray(grad_f(phi), dtype=float)
    if g.shape != phi.shape:
        raise ValueError(f"gradient callback returned {g.shape}, expected {phi.shape}")
    if not np.all(np.isfinite(g[ensemble.alive()])):
        raise ValueError("gradient callback produced non-finite values")
    J = ensemble.jac[:, record_index]
    K = ensemble.kinv[:, record_index]
    # Y_l = J^j_l g_j, then (df/dphi)_k = K^l_k Y_l = ((J K)^T g)_k
    y = np.einsum("pjl,pj->pl", J, g)
    df_dphi = np.einsum("plk,pl->pk", K, y)
    m = spec.m
    transport = np.empty((ensemble.n_paths, m))
    direct = np.empty((ensemble.n_paths, m))
    for a in range(1, m + 1):
        va = spec.values_at(a, phi)
        transport[:, a - 1] = np.einsum("pk,pk->p", va, df_dphi)
        direct[:, a - 1] = np.einsum("pk,pk->p", va, g)
    return ZPair(transport=transport, direct=direct)
