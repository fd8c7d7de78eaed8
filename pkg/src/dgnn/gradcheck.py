"""End-to-end gradient check of the classification loss through the unrolled layer."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import cosine_similarity, normalize, semantic_graph
from .model import DgnnHyperparams, ReconFactor, forward
from .oracle import FdConfig, fd_gradient, relative_error
from .train import ClassifierParams, concat, logits


@dataclass
class GradcheckResult:
    max_rel_err: dict
    checked: int

    @property
    def worst(self):
        return max(self.max_rel_err.values())

    def passed(self, tol):
        return self.worst < tol


def random_instance(rng, n, d, c=3, p_edge=0.35, k=2):
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    a = np.triu((rng.random((n, n)) < p_edge).astype(float), 1)
    a = a + a.T
    sem = semantic_graph(cosine_similarity(x), min(k, n - 1))
    y = rng.integers(0, c, size=n)
    mask = np.sort(rng.choice(n, size=max(1, (6 * n) // 10), replace=False))
    return x, normalize(a), sem.normalized, y, mask


def check_instance(seed, n=8, d=5, layers=2, hp=None, cfg=None, c=3):
    """Compare backward gradients of ``W, W_c, b`` with central differences."""
    rng = np.random.default_rng(seed)
    hp = hp or DgnnHyperparams(lam=1.0, alpha=1.0, beta=0.01, epsilon=0.5, layers=layers)
    cfg = cfg or FdConfig()
    x, a_hat, a_hat_f, y, mask = random_instance(rng, n, d, c)
    factor = ReconFactor.initialize(d, rng, noise=0.3)
    cp = ClassifierParams.initialize(d, c, rng)
    cp.b.value[:] = rng.uniform(-0.5, 0.5, size=cp.b.shape)
    params = [factor.W, cp.Wc, cp.b]

    def loss():
        state = forward(x, a_hat, a_hat_f, factor, hp)
        return ad.cross_entropy(logits(concat(state), cp), y, mask)

    grads = ad.backward(loss())
    with ad.no_grad():
        numeric = fd_gradient(lambda: loss().value[0, 0], [p.value for p in params], cfg, rng)
    errs, count = {}, 0
    for p, (idx, vals) in zip(params, numeric):
        analytic = grads[p].ravel()[idx]
        errs[p.name] = float(relative_error(analytic, vals, cfg.abs_floor).max())
        count += len(idx)
    return GradcheckResult(errs, count)
