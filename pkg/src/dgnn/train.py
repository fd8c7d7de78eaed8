"""Semi-supervised node classification on top of the unrolled layer."""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import DiffMatrix
from .graph import Graph, cosine_similarity, laplacian, normalize, semantic_graph
from .model import (
    DEFAULT_MEM_BUDGET,
    DgnnHyperparams,
    EmbeddingState,
    ReconFactor,
    forward,
    objective_value,
)

log = logging.getLogger(__name__)

EPSILON_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
LAM_ALPHA_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
BETA_GRID = (0.001, 0.005, 0.01, 0.02)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def subset(self, name):
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown subset {name!r}")
        return getattr(self, name)


def make_split(n, seed) -> Split:
    """Seeded 60/20/20 shuffle split; rounding remainders go to test."""
    if n < 5:
        raise ValueError(f"need at least 5 nodes for a 60/20/20 split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train, n_val = (6 * n) // 10, (2 * n) // 10
    return Split(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
    )


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    dropout: float = 0.0
    epochs: int = 500
    patience: int = 100
    weight_decay: float = 5e-4
    seed: int = 0
    normalize_features: bool = True
    dropout_input: bool = True
    dropout_embedding: bool = True
    symmetric: bool = False
    mem_budget: int = DEFAULT_MEM_BUDGET

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 1 or self.patience < 1:
            raise ValueError("epochs and patience must be positive")


@dataclass
class PreparedGraph:
    """Dense operators and features derived once per (graph, K)."""

    X: np.ndarray
    a_hat: np.ndarray
    a_hat_f: np.ndarray
    lap: np.ndarray
    lap_f: np.ndarray
    labels: np.ndarray
    n_classes: int
    k: int

    @property
    def n(self):
        return self.X.shape[0]


def row_normalize(x):
    s = np.abs(x).sum(axis=1, keepdims=True)
    return x / np.where(s > 0, s, 1.0)


def prepare(graph: Graph, k=5, normalize_features=True) -> PreparedGraph:
    x = np.asarray(graph.features, dtype=np.float64)
    a_hat = normalize(graph.adjacency(dense=True))
    # cosine similarity is invariant to row scaling, so the kNN graph is the
    # same with or without feature normalization
    sem = semantic_graph(cosine_similarity(x), k)
    return PreparedGraph(
        X=row_normalize(x) if normalize_features else x.copy(),
        a_hat=a_hat,
        a_hat_f=sem.normalized,
        lap=laplacian(a_hat),
        lap_f=laplacian(sem.normalized),
        labels=np.asarray(graph.labels, dtype=np.int64),
        n_classes=graph.num_classes,
        k=k,
    )


@dataclass
class ClassifierParams:
    """``W_c`` stacks the blocks for ``[F, H, Hf]`` row-wise; ``b`` is a bias row."""

    Wc: DiffMatrix
    b: DiffMatrix

    @classmethod
    def initialize(cls, d, c, rng):
        bound = math.sqrt(6.0 / (3 * d + c))
        return cls(
            DiffMatrix(rng.uniform(-bound, bound, size=(3 * d, c)), requires_grad=True, name="Wc"),
            DiffMatrix(np.zeros((1, c)), requires_grad=True, name="b"),
        )

    def blocks(self):
        d = self.Wc.shape[0] // 3
        w = self.Wc.value
        return w[:d], w[d:2 * d], w[2 * d:]


def concat(state: EmbeddingState) -> DiffMatrix:
    return ad.hstack([state.F, state.H, state.Hf])


def logits(z, cp: ClassifierParams) -> DiffMatrix:
    if z.shape[1] != cp.Wc.shape[0]:
        raise ValueError(f"Z has {z.shape[1]} columns but W_c expects {cp.Wc.shape[0]}")
    return z @ cp.Wc + cp.b


def predict(z, cp: ClassifierParams) -> DiffMatrix:
    return ad.softmax_rows(logits(ad.const(z), cp))


class Adam:
    """Adaptive-moment updates with L2 weight decay folded into the gradient."""

    def __init__(self, params, lr, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr, self.weight_decay, self.eps = lr, weight_decay, eps
        self.b1, self.b2 = betas
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = grads[p]
            if self.weight_decay:
                g = g + self.weight_decay * p.value
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    loss: float
    train_acc: float
    val_acc: float
    test_acc: float


@dataclass
class TrainReport:
    seed: int
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    test_acc: float = float("nan")
    val_acc: float = float("nan")
    wall_time: float = 0.0

    CSV_HEADER = "seed,epoch,objective,loss,train_acc,val_acc,test_acc"

    def csv_rows(self):
        for r in self.epochs:
            yield (
                f"{self.seed},{r.epoch},{r.objective:.9g},{r.loss:.9g},"
                f"{r.train_acc:.9g},{r.val_acc:.9g},{r.test_acc:.9g}"
            )


def _accuracy(scores, labels, idx):
    if len(idx) == 0:
        raise ValueError("empty subset")
    return float(np.mean(scores[idx].argmax(axis=1) == labels[idx]))


def _run_model(prep, factor, cp, hp, tc, rng, training):
    x = ad.const(prep.X)
    use_dropout = training and tc.dropout > 0
    if use_dropout and tc.dropout_input:
        x = ad.dropout(x, tc.dropout, rng, training=True)
    state = forward(x, prep.a_hat, prep.a_hat_f, factor, hp,
                    symmetric=tc.symmetric, mem_budget=tc.mem_budget)
    z = concat(state)
    if use_dropout and tc.dropout_embedding:
        z = ad.dropout(z, tc.dropout, rng, training=True)
    return state, logits(z, cp)


def _as_prepared(graph, hp, tc):
    if isinstance(graph, PreparedGraph):
        if graph.k != hp.k:
            raise ValueError(f"prepared graph uses K={graph.k} but hyperparameters ask for K={hp.k}")
        return graph
    return prepare(graph, hp.k, tc.normalize_features)


def train(graph, hp: DgnnHyperparams, tc: TrainConfig, split: Split):
    """Fit ``W``, ``W_c`` and ``b``; returns ``(factor, classifier, report)``.

    Parameters are restored to the epoch with the highest validation
    accuracy (earliest on ties) and the report's test accuracy is taken there.
    """
    prep = _as_prepared(graph, hp, tc)
    rng = np.random.default_rng(tc.seed)
    d = prep.X.shape[1]
    factor = ReconFactor.initialize(d, rng)
    cp = ClassifierParams.initialize(d, prep.n_classes, rng)
    params = [factor.W, cp.Wc, cp.b]
    opt = Adam(params, tc.lr, tc.weight_decay)

    report = TrainReport(seed=tc.seed)
    best_val, best_values = -1.0, None
    start = time.perf_counter()
    for epoch in range(1, tc.epochs + 1):
        _, out = _run_model(prep, factor, cp, hp, tc, rng, training=True)
        loss = ad.cross_entropy(out, prep.labels, split.train)
        loss_val = float(loss.value[0, 0])
        if not math.isfinite(loss_val):
            raise TrainingDiverged(
                f"seed {tc.seed}: non-finite loss at epoch {epoch}; "
                f"try a smaller learning rate than {tc.lr}"
            )
        opt.step(ad.backward(loss))

        with ad.no_grad():
            state, out = _run_model(prep, factor, cp, hp, tc, rng, training=False)
        scores = out.value
        rec = EpochRecord(
            epoch=epoch,
            objective=objective_value(state, prep.X, prep.lap, prep.lap_f, factor, hp),
            loss=loss_val,
            train_acc=_accuracy(scores, prep.labels, split.train),
            val_acc=_accuracy(scores, prep.labels, split.val),
            test_acc=_accuracy(scores, prep.labels, split.test),
        )
        report.epochs.append(rec)
        if rec.val_acc > best_val:
            best_val = rec.val_acc
            best_values = [p.value.copy() for p in params]
            report.best_epoch = epoch
        elif epoch - report.best_epoch >= tc.patience:
            break

    for p, v in zip(params, best_values):
        p.value = v
    best = report.epochs[report.best_epoch - 1]
    report.val_acc, report.test_acc = best.val_acc, best.test_acc
    report.wall_time = time.perf_counter() - start
    log.info("seed %d: best epoch %d val %.4f test %.4f (%.1fs)",
             tc.seed, report.best_epoch, report.val_acc, report.test_acc, report.wall_time)
    return factor, cp, report


def embed(graph, factor, hp, tc=None):
    """Eval-mode embeddings ``(F, H, Hf)`` for trained parameters."""
    tc = tc or TrainConfig()
    prep = _as_prepared(graph, hp, tc)
    with ad.no_grad():
        return forward(prep.X, prep.a_hat, prep.a_hat_f, factor, hp,
                       symmetric=tc.symmetric, mem_budget=tc.mem_budget)


def evaluate(graph, params, hp, split, subset="test", tc=None) -> float:
    """Accuracy of ``params = (factor, classifier)`` on one split subset, dropout off."""
    tc = tc or TrainConfig()
    prep = _as_prepared(graph, hp, tc)
    factor, cp = params
    with ad.no_grad():
        _, out = _run_model(prep, factor, cp, hp, tc, None, training=False)
    return _accuracy(out.value, prep.labels, split.subset(subset))


@dataclass
class TrialSummary:
    seeds: list
    accuracies: np.ndarray
    reports: list
    params: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.accuracies))

    @property
    def std(self):
        return float(np.std(self.accuracies, ddof=1))

    def formatted(self):
        """Percent mean and sample std, e.g. ``91.06±0.36``."""
        return f"{100 * self.mean:.2f}±{100 * self.std:.2f}"


def _one_trial(args):
    prep, hp, tc, seed = args
    split = make_split(prep.n, seed)
    factor, cp, report = train(prep, hp, replace(tc, seed=seed), split)
    return report, {"W": factor.W.value, "Wc": cp.Wc.value, "b": cp.b.value}


def run_trials(graph, hp, tc, seeds, jobs=1) -> TrialSummary:
    """Independent split and initialization per seed; mean and sample std of test accuracy."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("run_trials needs at least two seeds")
    prep = _as_prepared(graph, hp, tc)
    work = [(prep, hp, tc, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_trial, work))
    else:
        results = [_one_trial(w) for w in work]
    reports = [r for r, _ in results]
    return TrialSummary(seeds, np.array([r.test_acc for r in reports]), reports,
                        [p for _, p in results])


def sweep(graph, hp, tc, axis, values, seeds, jobs=1):
    """One :func:`run_trials` per grid point.

    ``axis="epsilon"`` takes a sequence of epsilon values. ``axis="lam_alpha"``
    takes a mapping with ``lam``, ``alpha`` and ``beta`` sequences and walks the
    ``lam x alpha`` grid once per beta. Returns a list of row dicts.
    """
    prep = None
    rows = []
    if axis == "epsilon":
        points = [{"epsilon": float(e)} for e in values]
    elif axis == "lam_alpha":
        points = [
            {"beta": float(b), "lam": float(l), "alpha": float(a)}
            for b in values["beta"] for l in values["lam"] for a in values["alpha"]
        ]
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")
    for point in points:
        point_hp = replace(hp, **point)
        if prep is None:
            prep = _as_prepared(graph, point_hp, tc)
        summary = run_trials(prep, point_hp, tc, seeds, jobs)
        rows.append({**point, "mean": summary.mean, "std": summary.std,
                     "formatted": summary.formatted()})
    return rows
