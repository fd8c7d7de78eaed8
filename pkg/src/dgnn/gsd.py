"""Graph signal denoising: the exact smoother and its one-hop approximation.

Denoising trades fidelity to a noisy signal ``S`` against Dirichlet energy,

    min_F  ||F - S||_F^2 + lam * tr(F^T L F),

whose minimizer solves ``(I + lam L) F = S``. Replacing the inverse by its
first-order expansion at ``lam = 1`` leaves ``A_hat @ S``, one step of GCN
propagation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

MAX_DENSE_NODES = 5000


@dataclass
class GsdProblem:
    signal: np.ndarray
    laplacian: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if sp.issparse(self.laplacian):
            self.laplacian = self.laplacian.toarray()
        self.laplacian = np.asarray(self.laplacian, dtype=np.float64)
        if self.signal.ndim == 1:
            self.signal = self.signal[:, None]
        n = self.laplacian.shape[0]
        if self.laplacian.shape != (n, n) or self.signal.shape[0] != n:
            raise ValueError(
                f"laplacian {self.laplacian.shape} does not conform to signal {self.signal.shape}"
            )
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")


def gsd_exact(p: GsdProblem, max_nodes: int = MAX_DENSE_NODES) -> np.ndarray:
    """Solve ``(I + lam L) F = S`` with a dense Cholesky factorization."""
    n = p.laplacian.shape[0]
    if n > max_nodes:
        raise ValueError(f"dense solve refused: n={n} exceeds guard {max_nodes}")
    system = np.eye(n) + p.lam * p.laplacian
    # L is PSD, so I + lam L is SPD for lam >= 0.
    factor = scipy.linalg.cho_factor(system, lower=True)
    return scipy.linalg.cho_solve(factor, p.signal)


def gsd_first_order(signal, norm_adj):
    """One-hop approximation ``A_hat @ S``."""
    s = np.asarray(signal, dtype=np.float64)
    if norm_adj.shape[1] != s.shape[0]:
        raise ValueError(f"shape mismatch: A_hat {norm_adj.shape} vs S {s.shape}")
    return np.asarray(norm_adj @ s)


def gsd_objective(f, p: GsdProblem) -> float:
    f = np.asarray(f, dtype=np.float64).reshape(p.signal.shape)
    diff = f - p.signal
    return float(np.sum(diff * diff) + p.lam * np.sum(f * (p.laplacian @ f)))


def gsd_gradient(f, p: GsdProblem) -> np.ndarray:
    """Analytic gradient ``2(F - S) + 2 lam L F``."""
    f = np.asarray(f, dtype=np.float64).reshape(p.signal.shape)
    return 2.0 * (f - p.signal) + 2.0 * p.lam * (p.laplacian @ f)
