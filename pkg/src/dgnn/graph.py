"""Topological and feature-derived graphs: construction, normalization, statistics."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class Graph:
    """Undirected, unweighted attributed graph.

    ``edges`` holds each undirected edge once as a row ``(i, j)`` with
    ``i < j``, sorted lexicographically. ``n_input_pairs`` remembers how many
    pairs the source listed before deduplication, which is the figure most
    published dataset tables quote.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    n_input_pairs: int = 0
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None or len(self.labels) == 0:
            return 0
        return int(self.labels.max()) + 1

    def adjacency(self, dense=False):
        """0/1 symmetric adjacency with an empty diagonal."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        a = sp.coo_matrix(
            (data, (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        ).tocsr()
        return a.toarray() if dense else a


def build_graph(edge_list, features, labels=None, n=None, name=""):
    """Build a :class:`Graph` from raw node pairs.

    Duplicate and reversed pairs collapse into one undirected edge and
    self-pairs are dropped. ``n`` defaults to the number of feature rows.

    Raises
    ------
    ValueError
        If an endpoint falls outside ``[0, n)`` or the feature and label row
        counts disagree.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    if n is None:
        n = features.shape[0]
    if features.shape[0] != n:
        raise ValueError(f"features have {features.shape[0]} rows but n={n}")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"labels have {labels.shape[0]} rows but features have {n}")

    pairs = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= n).any(axis=1)][0]
        raise ValueError(f"edge endpoint out of range [0, {n}): {tuple(bad)}")

    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keep = lo != hi
    und = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    und = und.reshape(-1, 2)

    return Graph(
        n=n,
        edges=und,
        features=features,
        labels=labels,
        n_input_pairs=len(pairs),
        name=name,
        meta={"self_pairs_dropped": int((~keep).sum())},
    )


def normalize(adjacency):
    """Symmetric normalization with self-loops, ``D^-1/2 (A + I) D^-1/2``.

    Accepts a dense array or a scipy sparse matrix and returns the same kind.
    The self-loop makes every degree at least one, so no guard is needed.
    """
    if sp.issparse(adjacency):
        a = sp.csr_matrix(adjacency, dtype=np.float64)
        a_tilde = a + sp.identity(a.shape[0], format="csr")
        d = np.asarray(a_tilde.sum(axis=1)).ravel()
        d_inv_sqrt = sp.diags(1.0 / np.sqrt(d))
        return (d_inv_sqrt @ a_tilde @ d_inv_sqrt).tocsr()

    a = np.asarray(adjacency, dtype=np.float64)
    a_tilde = a + np.eye(a.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return d_inv_sqrt[:, None] * a_tilde * d_inv_sqrt[None, :]


def laplacian(norm_adj):
    """``I - A_hat`` for a normalized adjacency (dense or sparse)."""
    if sp.issparse(norm_adj):
        return (sp.identity(norm_adj.shape[0], format="csr") - norm_adj).tocsr()
    return np.eye(norm_adj.shape[0]) - np.asarray(norm_adj)


def cosine_similarity(features):
    """Pairwise cosine similarity of feature rows.

    Any pair involving an all-zero row scores 0, including the row with itself.
    """
    x = np.asarray(features, dtype=np.float64)
    # divide by the row max first so tiny rows do not underflow to a zero norm
    peak = np.abs(x).max(axis=1, initial=0.0)
    x = x / np.where(peak > 0, peak, 1.0)[:, None]
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    xn = x / safe[:, None]
    sim = xn @ xn.T
    zero = norms == 0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    return sim


@dataclass
class SemanticGraph:
    adjacency: np.ndarray
    k: int
    normalized: np.ndarray


def top_k_neighbors(sim, k):
    """Indices of the ``k`` most similar other nodes per row.

    Ties go to the lower node index; a stable sort on the negated scores
    gives exactly that ordering.
    """
    sim = np.asarray(sim, dtype=np.float64)
    n = sim.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    scores = sim.copy()
    np.fill_diagonal(scores, -np.inf)
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def semantic_graph(sim, k=5):
    """kNN graph over a similarity matrix, symmetrized by union."""
    nbrs = top_k_neighbors(sim, k)
    n = nbrs.shape[0]
    a = np.zeros((n, n))
    a[np.repeat(np.arange(n), k), nbrs.ravel()] = 1.0
    a = np.maximum(a, a.T)
    return SemanticGraph(adjacency=a, k=k, normalized=normalize(a))


def homophily_rate(graph):
    """Edge homophily: share of undirected edges joining same-label nodes."""
    if graph.labels is None:
        raise ValueError("graph has no labels")
    if graph.num_edges == 0:
        raise ValueError("empty graph")
    y = graph.labels
    return float(np.mean(y[graph.edges[:, 0]] == y[graph.edges[:, 1]]))
