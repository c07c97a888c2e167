"""Pinned Gaussian free fields and Gaussian maxima.

A GFF pinned at ``v0`` is the centred Gaussian vector with covariance
``L_g^{-1}`` (grounded Laplacian), so ``E(eta_v - eta_w)^2 = R_eff(v, w)``
and ``eta_{v0} = 0``. Samples come from an exact sparse factorisation of
``L_g``; nothing here is approximate beyond Monte Carlo error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DominationViolated, NotPSD
from .graph import Graph, bfs_distances
from .resistance import LaplacianFactor

EULER_GAMMA = 0.5772156649015329
DEFAULT_REPLICAS = 2000
DEFAULT_ALPHA = 0.05
CHUNK = 64


@dataclass(frozen=True)
class GffSample:
    pin: int
    eta: np.ndarray = field(repr=False)
    seed: int | None = None


def sample_gff(g: Graph, v0: int, rng: np.random.Generator | int | None = None,
               factor: LaplacianFactor | None = None) -> GffSample:
    """One draw of the GFF on ``g`` pinned at ``v0``."""
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    fac = factor if factor is not None else LaplacianFactor(g, v0)
    if fac.pin != v0:
        raise ValueError("factor was built for a different pin")
    eta = fac.sample(rng.standard_normal(g.vertex_count - 1))
    return GffSample(int(v0), eta, seed)


def replica_maxima(fac: LaplacianFactor, replicas: int, rng: np.random.Generator,
                   chunk: int = CHUNK) -> np.ndarray:
    """``max_v eta_v`` for ``replicas`` independent fields, in replica order."""
    out = np.empty(replicas)
    n_free = fac.n - 1
    for start in range(0, replicas, chunk):
        r = min(chunk, replicas - start)
        z = rng.standard_normal((n_free, r))
        out[start:start + r] = fac.sample(z).max(axis=0)
    return out


@dataclass(frozen=True)
class MEstimate:
    """Monte Carlo estimate of ``M = E max_v eta_v``."""

    replicas: int
    mean: float
    se: float
    sigma2: float           # max_v Var(eta_v) over the probed vertices
    sigma2_bound: int       # eccentricity of the pin (R_eff <= hop distance)
    radius: float           # sigma * sqrt(2 ln(2/alpha))
    alpha: float
    maxima: np.ndarray = field(repr=False)

    @property
    def M(self) -> float:
        return self.mean


def estimate_M(g: Graph, v0: int, replicas: int = DEFAULT_REPLICAS,
               rng: np.random.Generator | int | None = None, *,
               alpha: float = DEFAULT_ALPHA, probe: int = 256,
               factor: LaplacianFactor | None = None) -> MEstimate:
    """Estimate ``M`` from ``replicas`` exact GFF draws pinned at ``v0``.

    ``sigma2`` is the largest ``R_eff(v, v0)`` among ``probe`` random
    vertices plus the BFS-farthest ones from ``v0``; the concentration
    radius is ``sqrt(sigma2) * sqrt(2 ln(2/alpha))``.
    """
    if replicas < 100:
        raise ValueError("estimate_M needs at least 100 replicas")
    rng = np.random.default_rng(rng)
    fac = factor if factor is not None else LaplacianFactor(g, v0)
    maxima = replica_maxima(fac, replicas, rng)
    dist = bfs_distances(g, [v0]).dist
    far = np.flatnonzero(dist == dist.max())[:16]
    probes = np.unique(np.concatenate([far, rng.integers(0, g.vertex_count, size=probe)]))
    sigma2 = float(fac.resistances_to_pin(probes).max())
    return MEstimate(
        replicas=replicas,
        mean=float(maxima.mean()),
        se=float(maxima.std(ddof=1) / math.sqrt(replicas)),
        sigma2=sigma2,
        sigma2_bound=int(dist.max()),
        radius=math.sqrt(sigma2) * math.sqrt(2 * math.log(2 / alpha)),
        alpha=alpha,
        maxima=maxima,
    )


# --------------------------------------------------------------------------
# Gaussian toolkit

def expected_max_iid_normals(s: int) -> float:
    """Asymptotic ``E max`` of ``s`` i.i.d. standard normals (with the log-log correction).

    ``sqrt(2 ln s) - (ln ln s + ln 4 pi - 2 gamma) / sqrt(8 ln s)``;
    returns 0 for ``s = 1``.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    if s == 1:
        return 0.0
    ls = math.log(s)
    return math.sqrt(2 * ls) - (math.log(ls) + math.log(4 * math.pi) - 2 * EULER_GAMMA) / math.sqrt(8 * ls)


def union_bound_max(sigma: float, s: int) -> float:
    """Upper bound ``sigma * sqrt(2 ln s)`` on ``E max`` of ``s`` centred Gaussians
    with variances at most ``sigma**2``."""
    if sigma <= 0 or s < 1:
        raise ValueError("need sigma > 0 and s >= 1")
    return sigma * math.sqrt(2 * math.log(s))


def concentration_bound(t: float, sigma2: float) -> float:
    """``Pr(|max - E max| > t) <= 2 exp(-t^2 / (2 sigma^2))``."""
    return 2.0 * math.exp(-t * t / (2.0 * sigma2))


def increment_variances(cov: np.ndarray) -> np.ndarray:
    """Matrix of ``E(X_i - X_j)^2`` for a centred vector with covariance ``cov``."""
    d = np.diag(cov)
    return d[:, None] + d[None, :] - 2 * cov


@dataclass(frozen=True)
class SlepianReport:
    mean_x: float
    se_x: float
    mean_y: float
    se_y: float
    replicas: int

    @property
    def combined_se(self) -> float:
        return math.hypot(self.se_x, self.se_y)

    @property
    def holds(self) -> bool:
        """``E max X <= E max Y`` up to three combined standard errors."""
        return self.mean_x <= self.mean_y + 3 * self.combined_se


def _check_psd(cov: np.ndarray, name: str) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise NotPSD(f"{name} is not a symmetric square matrix")
    w = np.linalg.eigvalsh(cov)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise NotPSD(f"{name} has a negative eigenvalue {w.min():.3g}")
    return cov


def slepian_check(cov_x: np.ndarray, cov_y: np.ndarray, replicas: int,
                  rng: np.random.Generator | int | None = None) -> SlepianReport:
    """Monte Carlo comparison of ``E max X`` and ``E max Y`` under increment domination.

    Requires ``E(X_i - X_j)^2 <= E(Y_i - Y_j)^2`` for every pair, which is
    checked first.
    """
    cx = _check_psd(cov_x, "cov_x")
    cy = _check_psd(cov_y, "cov_y")
    if cx.shape != cy.shape:
        raise ValueError("covariances must have the same shape")
    if (increment_variances(cx) > increment_variances(cy) + 1e-12).any():
        raise DominationViolated("increment variances of X exceed those of Y")
    rng = np.random.default_rng(rng)

    def maxima(cov):
        w, v = np.linalg.eigh(cov)
        root = v * np.sqrt(np.clip(w, 0, None))
        z = rng.standard_normal((replicas, len(cov)))
        return (z @ root.T).max(axis=1)

    mx, my = maxima(cx), maxima(cy)
    sq = math.sqrt(replicas)
    return SlepianReport(float(mx.mean()), float(mx.std(ddof=1) / sq),
                         float(my.mean()), float(my.std(ddof=1) / sq), replicas)
