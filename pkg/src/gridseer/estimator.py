"""Weighted least-squares DC state estimation, residual-based bad data
detection, and structured (undetectable) injection attacks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .grid import Jacobian
from .linalg import null_space, rank

SUPPORT_TOL = 1e-12


class UnobservableError(ValueError):
    """The measurement matrix does not determine every state variable.

    ``certificate`` is a nonzero state vector ``c`` with ``H c = 0``; buses where
    it is nonzero cannot be estimated.
    """

    def __init__(self, msg: str, certificate: np.ndarray, buses: tuple[int, ...] = ()):
        super().__init__(msg)
        self.certificate = certificate
        self.buses = buses


@dataclass(frozen=True)
class EstimatorConfig:
    weights: np.ndarray | None = None
    noise_sigma: float = 0.01

    def weight_vector(self, m: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(m)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (m,):
            raise ValueError(f"expected {m} weights, got shape {w.shape}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        return w


@dataclass(frozen=True)
class BddConfig:
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @classmethod
    def chi_square(cls, m: int, n: int, sigma: float, p: float = 0.99) -> BddConfig:
        """Threshold with ``tau**2 = chi2.ppf(p, m - n) * sigma**2``."""
        if m <= n:
            raise ValueError("chi-square threshold needs redundant measurements (m > n)")
        return cls(float(sigma * np.sqrt(chi2.ppf(p, m - n))))


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: np.ndarray
    residual: np.ndarray
    residual_norm: float
    weighted_residual_norm: float
    detected: bool | None = None

    def to_dict(self, z: np.ndarray | None = None) -> dict:
        d = {"theta_hat": self.theta_hat.tolist(), "residual_norm": self.residual_norm,
             "detected": self.detected}
        if z is not None:
            d = {"z": np.asarray(z).tolist(), **d}
        return d


@dataclass(frozen=True)
class AttackVector:
    a: np.ndarray
    support: tuple[str, ...]
    bias: np.ndarray | None = field(default=None)


def _certificate(H: np.ndarray) -> np.ndarray:
    N = null_space(H)
    c = N[:, 0]
    k = int(np.argmax(np.abs(c)))
    return c / c[k]


def wls_estimate(H: Jacobian | np.ndarray, z, cfg: EstimatorConfig | None = None) -> EstimationResult:
    """Minimize ``(z - H theta)' W (z - H theta)`` for diagonal ``W``.

    Solved through the row-scaled system ``sqrt(W) H theta = sqrt(W) z`` with an
    orthogonal (SVD based) least-squares routine.
    """
    cfg = cfg or EstimatorConfig()
    labels = H.state_buses if isinstance(H, Jacobian) else ()
    H = H.matrix if isinstance(H, Jacobian) else np.asarray(H, dtype=float)
    z = np.asarray(z, dtype=float)
    m, n = H.shape
    if z.shape != (m,):
        raise ValueError(f"measurement vector has shape {z.shape}, expected ({m},)")
    if rank(H) < n:
        c = _certificate(H)
        bad = tuple(labels[k] for k in np.flatnonzero(np.abs(c) > 1e-9)) if labels else ()
        raise UnobservableError(f"unobservable system: rank(H) < {n}", c, bad)
    w = cfg.weight_vector(m)
    sw = np.sqrt(w)
    theta, *_ = np.linalg.lstsq(H * sw[:, None], z * sw, rcond=None)
    r = z - H @ theta
    return EstimationResult(theta, r, float(np.linalg.norm(r)), float(np.linalg.norm(r * sw)))


def bdd_check(result: EstimationResult, cfg: BddConfig, weighted: bool = False) -> bool:
    """True when the residual norm exceeds the threshold (data flagged as bad)."""
    norm = result.weighted_residual_norm if weighted else result.residual_norm
    return bool(norm > cfg.tau)


def estimate_and_check(H, z, est: EstimatorConfig | None, bdd: BddConfig,
                       weighted: bool = False) -> EstimationResult:
    res = wls_estimate(H, z, est)
    return EstimationResult(res.theta_hat, res.residual, res.residual_norm,
                            res.weighted_residual_norm, bdd_check(res, bdd, weighted))


def forge_attack(H: Jacobian, c) -> AttackVector:
    """Structured injection ``a = H c``; biases the estimate by ``c``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (H.matrix.shape[1],):
        raise ValueError(f"bias has shape {c.shape}, expected ({H.matrix.shape[1]},)")
    a = H.matrix @ c
    support = tuple(mid for mid, v in zip(H.meter_ids, a) if abs(v) > SUPPORT_TOL)
    return AttackVector(a, support, c)


def verify_undetectable(H: Jacobian | np.ndarray, a, tol: float = 1e-9) -> bool:
    """True iff ``a`` lies in the column space of ``H`` up to ``tol``."""
    M = H.matrix if isinstance(H, Jacobian) else np.asarray(H, dtype=float)
    a = a.a if isinstance(a, AttackVector) else np.asarray(a, dtype=float)
    if not np.any(a):
        return True
    x, *_ = np.linalg.lstsq(M, a, rcond=None)
    return bool(np.linalg.norm(a - M @ x) <= tol)


def simulate_measurements(H: Jacobian | np.ndarray, theta, sigma: float,
                          rng: np.random.Generator) -> np.ndarray:
    M = H.matrix if isinstance(H, Jacobian) else np.asarray(H, dtype=float)
    z = M @ np.asarray(theta, dtype=float)
    if sigma > 0:
        z = z + rng.normal(0.0, sigma, size=z.shape)
    return z
