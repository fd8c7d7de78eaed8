"""Unrolled decoupled layer: attribute, topology and semantic embedding streams.

One layer approximately minimizes

    ||F - X||^2 + lam tr(H^T L H) + alpha tr(Hf^T Lf Hf)
        + beta ||F Ws F^T - [eps H Ws H^T + (1 - eps) Hf Ws Hf^T]||^2

over ``(F, H, Hf)`` with the shared factor ``Ws = W W^T``. Each unrolled
round applies the three alternating updates, all reading the previous
round's state. In ``network`` mode the structural residual passes through a
sigmoid before it scales the correction; ``analytic`` mode leaves it out and
recovers the plain stationarity iteration.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import DiffMatrix

MODES = ("network", "analytic")
DEFAULT_MEM_BUDGET = 8 * 2**30
# N x N intermediates kept alive per unrolled round (Gram products, residual
# chain, gates); used by the memory guard.
NN_PER_ROUND = 12


class ConfigurationError(ValueError):
    pass


class MemoryBudgetError(MemoryError):
    pass


@dataclass(frozen=True)
class DgnnHyperparams:
    lam: float = 1.0
    alpha: float = 1.0
    beta: float = 0.01
    epsilon: float = 0.5
    layers: int = 2
    k: int = 5
    mode: str = "network"

    def __post_init__(self):
        for name in ("lam", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.layers < 1:
            raise ConfigurationError(f"layers must be >= 1, got {self.layers}")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def h_coef(self) -> float:
        """Step size ``eps * beta / lam`` of the topology-stream correction."""
        if self.beta == 0 or self.epsilon == 0:
            return 0.0
        if self.lam == 0:
            raise ConfigurationError("lam = 0 with beta > 0 and epsilon > 0 divides by zero")
        return self.epsilon * self.beta / self.lam

    @property
    def hf_coef(self) -> float:
        """Step size ``(1 - eps) * beta / alpha`` of the semantic-stream correction."""
        if self.beta == 0 or self.epsilon == 1:
            return 0.0
        if self.alpha == 0:
            raise ConfigurationError("alpha = 0 with beta > 0 and epsilon < 1 divides by zero")
        return (1.0 - self.epsilon) * self.beta / self.alpha


@dataclass
class ReconFactor:
    """Trainable ``W``; the shared factor is ``Ws = W W^T`` (symmetric PSD)."""

    W: DiffMatrix

    @classmethod
    def initialize(cls, d, rng, noise=1e-2):
        w = np.eye(d) + rng.uniform(-noise, noise, size=(d, d))
        return cls(DiffMatrix(w, requires_grad=True, name="W"))

    def ws(self) -> DiffMatrix:
        return self.W @ self.W.T


@dataclass
class EmbeddingState:
    F: DiffMatrix
    H: DiffMatrix
    Hf: DiffMatrix

    @property
    def shape(self):
        return self.F.shape

    def values(self):
        return self.F.value, self.H.value, self.Hf.value


def init_state(X) -> EmbeddingState:
    X = ad.const(X)
    return EmbeddingState(ad.copy(X), ad.copy(X), ad.copy(X))


class _RoundTerms:
    """Products shared by the three updates of one round, computed on demand."""

    def __init__(self, state, ws, epsilon, symmetric=False):
        f, h, hf = state.F, state.H, state.Hf
        if not (f.shape == h.shape == hf.shape):
            raise ValueError(f"state shapes differ: {f.shape}, {h.shape}, {hf.shape}")
        if ws.shape != (f.shape[1], f.shape[1]):
            raise ValueError(f"Ws {ws.shape} does not match embedding width {f.shape[1]}")
        self.state = state
        self.ws = ws
        self.epsilon = epsilon
        self.symmetric = symmetric
        self._cache = {}

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def times_ws(self, which):
        return self._get(("mw", which), lambda: getattr(self.state, which) @ self.ws)

    def residual(self):
        def make():
            s = self.state
            g_f = self.times_ws("F") @ s.F.T
            g_h = self.times_ws("H") @ s.H.T
            g_hf = self.times_ws("Hf") @ s.Hf.T
            return g_f - self.epsilon * g_h - (1.0 - self.epsilon) * g_hf

        return self._get("residual", make)

    def direction(self, which):
        """``M Ws + M Ws^T`` for stream ``which``."""
        mw = self.times_ws(which)
        if self.symmetric:
            return 2.0 * mw
        ws_t = self._get("ws_t", lambda: self.ws.T)
        return mw + getattr(self.state, which) @ ws_t

    def gate(self, sign, mode):
        """Residual (``sign=+1``) or its negation, through the sigmoid in network mode."""

        def make():
            r = self.residual() if sign > 0 else -self.residual()
            return ad.sigmoid(r) if mode == "network" else r

        return self._get(("gate", sign, mode), make)


def consistency_residual(state, factor, epsilon) -> DiffMatrix:
    """``F Ws F^T - eps H Ws H^T - (1 - eps) Hf Ws Hf^T``."""
    return _RoundTerms(state, factor.ws(), epsilon).residual()


def update_F(state, X, factor, hp, terms=None, symmetric=False) -> DiffMatrix:
    X = ad.const(X)
    if X.shape != state.F.shape:
        raise ValueError(f"X {X.shape} does not match F {state.F.shape}")
    if hp.beta == 0:
        return ad.copy(X)
    t = terms or _RoundTerms(state, factor.ws(), hp.epsilon, symmetric)
    return X - hp.beta * (t.gate(+1, hp.mode) @ t.direction("F"))


def update_H(state, a_hat, factor, hp, terms=None, symmetric=False) -> DiffMatrix:
    coef = hp.h_coef
    a_hat = ad.const(a_hat)
    if a_hat.shape[1] != state.H.shape[0]:
        raise ValueError(f"A_hat {a_hat.shape} does not match H {state.H.shape}")
    prop = a_hat @ state.H
    if coef == 0:
        return prop
    t = terms or _RoundTerms(state, factor.ws(), hp.epsilon, symmetric)
    return prop - coef * (t.gate(-1, hp.mode) @ t.direction("H"))


def update_Hf(state, a_hat_f, factor, hp, terms=None, symmetric=False) -> DiffMatrix:
    coef = hp.hf_coef
    a_hat_f = ad.const(a_hat_f)
    if a_hat_f.shape[1] != state.Hf.shape[0]:
        raise ValueError(f"A_hat_f {a_hat_f.shape} does not match Hf {state.Hf.shape}")
    prop = a_hat_f @ state.Hf
    if coef == 0:
        return prop
    t = terms or _RoundTerms(state, factor.ws(), hp.epsilon, symmetric)
    return prop - coef * (t.gate(-1, hp.mode) @ t.direction("Hf"))


def estimated_bytes(n, layers):
    return 8 * n * n * (NN_PER_ROUND * layers + 4)


def check_memory(n, layers, budget=DEFAULT_MEM_BUDGET):
    need = estimated_bytes(n, layers)
    if need > budget:
        raise MemoryBudgetError(
            f"forward on n={n} with {layers} rounds needs ~{need / 2**30:.1f} GiB "
            f"of N x N intermediates, budget is {budget / 2**30:.1f} GiB"
        )


def forward(X, a_hat, a_hat_f, factor, hp, symmetric=False, mem_budget=DEFAULT_MEM_BUDGET):
    """Run ``hp.layers`` unrolled rounds from ``F = H = Hf = X``.

    ``symmetric=True`` computes ``M Ws + M Ws^T`` as ``2 M Ws``, valid because
    ``Ws = W W^T``.
    """
    X = ad.const(X)
    check_memory(X.shape[0], hp.layers, mem_budget)
    # surface division-by-zero configurations before any work
    hp.h_coef, hp.hf_coef
    a_hat, a_hat_f = ad.const(a_hat), ad.const(a_hat_f)
    ws = factor.ws() if hp.beta != 0 else None

    state = init_state(X)
    for _ in range(hp.layers):
        terms = _RoundTerms(state, ws, hp.epsilon, symmetric) if ws is not None else None
        state = EmbeddingState(
            update_F(state, X, factor, hp, terms),
            update_H(state, a_hat, factor, hp, terms),
            update_Hf(state, a_hat_f, factor, hp, terms),
        )
    return state


def round_cost(n, d):
    """Leading-order cost of one round, ``D N^2 + D^2 N`` multiply-adds."""
    return d * n * n + d * d * n


def _values(m):
    return m.value if isinstance(m, DiffMatrix) else np.asarray(m, dtype=np.float64)


def objective_terms(state, X, lap, lap_f, factor, hp):
    """The four terms of the layer objective, evaluated without recording."""
    f, h, hf = (_values(m) for m in (state.F, state.H, state.Hf))
    x = _values(X)
    w = _values(factor.W)
    ws = w @ w.T
    eps = hp.epsilon
    r = f @ ws @ f.T - eps * (h @ ws @ h.T) - (1.0 - eps) * (hf @ ws @ hf.T)
    return {
        "fidelity": float(np.sum((f - x) ** 2)),
        "topology": hp.lam * float(np.sum(h * (lap @ h))),
        "semantic": hp.alpha * float(np.sum(hf * (lap_f @ hf))),
        "consistency": hp.beta * float(np.sum(r * r)),
    }


def objective_value(state, X, lap, lap_f, factor, hp) -> float:
    return sum(objective_terms(state, X, lap, lap_f, factor, hp).values())


def omega_gram(f, h) -> float:
    """Unparameterized consistency ``||F F^T - H H^T||^2``."""
    f, h = _values(f), _values(h)
    d = f @ f.T - h @ h.T
    return float(np.sum(d * d))


def omega_factor(f, h, ws) -> float:
    """Consistency through an arbitrary shared factor, ``||F Ws F^T - H Ws H^T||^2``."""
    f, h, ws = _values(f), _values(h), _values(ws)
    d = f @ ws @ f.T - h @ ws @ h.T
    return float(np.sum(d * d))


ABLATIONS = ("A1", "A2", "A3")


def ablation_config(variant, base: DgnnHyperparams) -> DgnnHyperparams:
    """A1 drops topology, A2 drops the semantic graph, A3 drops consistency."""
    if variant == "A1":
        return replace(base, lam=0.0, epsilon=0.0)
    if variant == "A2":
        return replace(base, alpha=0.0, epsilon=1.0)
    if variant == "A3":
        return replace(base, beta=0.0)
    raise ValueError(f"unknown ablation {variant!r}; expected one of {ABLATIONS}")
