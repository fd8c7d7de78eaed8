"""Independent reference computations used to check the production paths.

Everything here is written with explicit index loops over plain Python
floats and imports nothing from the rest of the package, so a shared bug
cannot make both sides agree. Sizes are guarded because the loops are slow.
"""

import math
from dataclasses import dataclass

import numpy as np

MAX_LOOP_NODES = 16
MAX_LOOP_DIM = 8


@dataclass
class FdConfig:
    h: float = 1e-5
    tol: float = 1e-4
    samples: int = 64
    # denominator floor for the relative error of near-zero entries
    abs_floor: float = 1e-6

    def __post_init__(self):
        if self.h <= 0 or self.tol <= 0:
            raise ValueError("step and tolerance must be positive")


def fd_gradient(f, params, cfg=None, rng=None):
    """Central differences of scalar ``f()`` w.r.t. sampled entries of ``params``.

    ``params`` are float arrays that ``f`` reads when called; they are
    perturbed in place and restored. Returns, per array, ``(flat_indices,
    values)``. Arrays with at most ``cfg.samples`` entries are differenced in
    full.
    """
    cfg = cfg or FdConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for p in params:
        if not p.flags.c_contiguous:
            raise ValueError("fd_gradient needs C-contiguous parameter arrays")
        flat = p.reshape(-1)
        if flat.size <= cfg.samples:
            idx = np.arange(flat.size)
        else:
            idx = np.sort(rng.choice(flat.size, size=cfg.samples, replace=False))
        vals = np.empty(len(idx))
        for n, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + cfg.h
            fp = float(f())
            flat[i] = old - cfg.h
            fm = float(f())
            flat[i] = old
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise FloatingPointError(f"non-finite loss while perturbing entry {i}")
            vals[n] = (fp - fm) / (2.0 * cfg.h)
        out.append((idx, vals))
    return out


def relative_error(analytic, numeric, floor=1e-6):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def _tolist(m):
    return [[float(v) for v in row] for row in np.asarray(m, dtype=np.float64)]


def _guard(n, d):
    if n > MAX_LOOP_NODES or d > MAX_LOOP_DIM:
        raise ValueError(
            f"loop oracle limited to N <= {MAX_LOOP_NODES}, D <= {MAX_LOOP_DIM}; got N={n}, D={d}"
        )


def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def loop_normalize(adj):
    a = _tolist(adj)
    n = len(a)
    deg = [1.0 + sum(a[i]) for i in range(n)]
    return np.array(
        [[((1.0 if i == j else 0.0) + a[i][j]) / math.sqrt(deg[i] * deg[j]) for j in range(n)]
         for i in range(n)]
    )


def loop_cosine(x):
    x = _tolist(x)
    n = len(x)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            dot = sum(a * b for a, b in zip(x[i], x[j]))
            ni = math.sqrt(sum(a * a for a in x[i]))
            nj = math.sqrt(sum(b * b for b in x[j]))
            out[i][j] = 0.0 if ni == 0 or nj == 0 else dot / (ni * nj)
    return np.array(out)


def loop_top_k(sim, k):
    """Brute-force kNN adjacency: repeated arg-max scans, lowest index on ties."""
    s = _tolist(sim)
    n = len(s)
    a = [[0.0] * n for _ in range(n)]
    for i in range(n):
        taken = {i}
        for _ in range(k):
            best = None
            for j in range(n):
                if j in taken:
                    continue
                if best is None or s[i][j] > s[i][best]:
                    best = j
            taken.add(best)
            a[i][best] = 1.0
            a[best][i] = 1.0
    return np.array(a)


def _matmul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(m)) for j in range(p)] for i in range(n)]


def _gram(m, ws):
    """Entry (i, j) = sum_{p,q} m[i][p] ws[p][q] m[j][q]."""
    n, d = len(m), len(ws)
    return [[sum(m[i][p] * ws[p][q] * m[j][q] for p in range(d) for q in range(d))
             for j in range(n)] for i in range(n)]


def loop_residual(f, h, hf, ws, epsilon):
    f, h, hf, ws = _tolist(f), _tolist(h), _tolist(hf), _tolist(ws)
    _guard(len(f), len(ws))
    gf, gh, ghf = _gram(f, ws), _gram(h, ws), _gram(hf, ws)
    n = len(f)
    return np.array([[gf[i][j] - epsilon * gh[i][j] - (1.0 - epsilon) * ghf[i][j]
                      for j in range(n)] for i in range(n)])


def scalar_update_oracle(state, graphs, w, hp, which):
    """One update of stream ``which`` ('F', 'H' or 'Hf') by explicit loops.

    ``state`` is ``(F, H, Hf)`` as arrays, ``graphs`` is ``(X, A_hat,
    A_hat_f)``, ``w`` is the raw factor ``W`` and ``hp`` any object with
    ``lam, alpha, beta, epsilon, mode`` attributes.
    """
    f, h, hf = (_tolist(m) for m in state)
    x, a, af = (_tolist(m) for m in graphs)
    w = _tolist(w)
    n, d = len(f), len(w)
    _guard(n, d)
    ws = [[sum(w[p][t] * w[q][t] for t in range(d)) for q in range(d)] for p in range(d)]
    eps, beta = hp.epsilon, hp.beta
    r = loop_residual(f, h, hf, ws, eps).tolist()

    def gate(v):
        return _sig(v) if hp.mode == "network" else v

    if which == "F":
        m, base, sign, coef = f, x, 1.0, beta
    elif which == "H":
        m, base, sign = h, _matmul(a, h), -1.0
        coef = 0.0 if beta == 0 or eps == 0 else eps * beta / hp.lam
    elif which == "Hf":
        m, base, sign = hf, _matmul(af, hf), -1.0
        coef = 0.0 if beta == 0 or eps == 1 else (1.0 - eps) * beta / hp.alpha
    else:
        raise ValueError(f"unknown stream {which!r}")

    out = [[0.0] * d for _ in range(n)]
    for i in range(n):
        for c in range(d):
            corr = 0.0
            if coef != 0.0:
                for j in range(n):
                    dir_jc = sum(m[j][p] * (ws[p][c] + ws[c][p]) for p in range(d))
                    corr += gate(sign * r[i][j]) * dir_jc
            out[i][c] = base[i][c] - coef * corr
    return np.array(out)


def loop_forward(x, a, af, w, hp):
    """``hp.layers`` rounds of the loop updates from ``F = H = Hf = X``."""
    state = (np.array(x, dtype=float),) * 3
    graphs = (x, a, af)
    for _ in range(hp.layers):
        state = tuple(scalar_update_oracle(state, graphs, w, hp, s) for s in ("F", "H", "Hf"))
    return state


def loop_objective(state, x, lap, lap_f, w, hp):
    f, h, hf = (_tolist(m) for m in state)
    x, lap, lap_f, w = _tolist(x), _tolist(lap), _tolist(lap_f), _tolist(w)
    n, d = len(f), len(w)
    ws = [[sum(w[p][t] * w[q][t] for t in range(d)) for q in range(d)] for p in range(d)]
    fid = sum((f[i][c] - x[i][c]) ** 2 for i in range(n) for c in range(d))
    top = sum(h[i][c] * lap[i][j] * h[j][c] for i in range(n) for j in range(n) for c in range(d))
    sem = sum(hf[i][c] * lap_f[i][j] * hf[j][c] for i in range(n) for j in range(n) for c in range(d))
    r = loop_residual(f, h, hf, ws, hp.epsilon)
    cons = float(np.sum(r * r))
    return fid + hp.lam * top + hp.alpha * sem + hp.beta * cons


def gcn_reference_layer(x, a_hat, w):
    """``A_hat (X W)`` without activation, by loops."""
    if hasattr(a_hat, "toarray"):
        a_hat = a_hat.toarray()
    x, a, w = _tolist(x), _tolist(a_hat), _tolist(w)
    if len(x[0]) != len(w) or len(a[0]) != len(x):
        raise ValueError("shape mismatch")
    return np.array(_matmul(a, _matmul(x, w)))


def gsd_descent(signal, lap, lam, steps=10_000, lr=None):
    """Plain gradient descent on the denoising objective, starting at ``S``."""
    s = np.asarray(signal, dtype=float)
    lap = np.asarray(lap, dtype=float)
    # gradient is 2(I + lam L) F - 2 S; Lipschitz constant 2 (1 + lam ||L||)
    if lr is None:
        lr = 1.0 / (2.0 * (1.0 + lam * np.abs(lap).sum(axis=1).max()))
    f = s.copy()
    for _ in range(steps):
        f = f - lr * (2.0 * (f - s) + 2.0 * lam * (lap @ f))
    return f
