"""Dataset directories, raw-format converters, and synthetic block-model graphs.

A dataset directory holds three UTF-8 text files:

``graph.edges``
    two whitespace-separated 0-based node ids per line; ``#`` starts a comment.
``features.csv``
    one comma-separated row of decimals per node.
``labels.csv``
    one integer class id per line.
"""

import csv
import logging
import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph, homophily_rate

log = logging.getLogger(__name__)

EDGES_FILE = "graph.edges"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetProfile:
    """Published statistics and tuned hyperparameters for one benchmark."""

    name: str
    nodes: int
    features: int
    classes: int
    edges: int
    homophily: float
    lam: float
    alpha: float
    beta: float
    layers: int
    dropout: float
    lr: float


PROFILES = {
    p.name: p
    for p in [
        DatasetProfile("cora", 2708, 1433, 7, 5429, 0.809, 1.0, 2.0, 0.02, 2, 0.25, 0.002),
        DatasetProfile("citeseer", 3327, 3703, 6, 4732, 0.721, 2.0, 0.5, 0.01, 3, 0.15, 0.003),
        DatasetProfile("chameleon", 2277, 2325, 5, 36101, 0.233, 1.0, 2.5, 0.01, 2, 0.02, 0.05),
        DatasetProfile("squirrel", 5201, 2089, 5, 217073, 0.203, 1.0, 2.5, 0.01, 2, 0.0, 0.02),
        DatasetProfile("computers", 13752, 767, 10, 245861, 0.791, 2.0, 1.0, 0.01, 2, 0.05, 0.03),
        DatasetProfile("photo", 7650, 745, 8, 119081, 0.824, 2.0, 0.5, 0.01, 2, 0.15, 0.02),
    ]
}


def _read_edges(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two node ids, got {line.rstrip()!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer node id in {line.rstrip()!r}") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _read_features(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: unparseable feature row") from None
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DatasetError(f"{path}: rows have differing widths {sorted(widths)}")
    return np.array(rows, dtype=np.float64)


def _read_labels(path):
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.strip()
            if not body:
                continue
            try:
                labels.append(int(body))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: label {body!r} is not an integer") from None
    return np.array(labels, dtype=np.int64)


def check_labels(labels):
    """Reject negative ids and gaps; class count is ``max + 1``."""
    if len(labels) == 0:
        return
    if labels.min() < 0:
        raise DatasetError("negative class id")
    missing = sorted(set(range(int(labels.max()) + 1)) - set(labels.tolist()))
    if missing:
        raise DatasetError(f"label ids have gaps; missing {missing}")


def load_dataset(directory, name=None):
    """Read a dataset directory into a :class:`Graph`."""
    directory = Path(directory)
    paths = {f: directory / f for f in (EDGES_FILE, FEATURES_FILE, LABELS_FILE)}
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise DatasetError(f"missing dataset files: {', '.join(missing)}")

    features = _read_features(paths[FEATURES_FILE])
    labels = _read_labels(paths[LABELS_FILE])
    if len(labels) != len(features):
        raise DatasetError(
            f"{len(features)} feature rows but {len(labels)} labels in {directory}"
        )
    check_labels(labels)
    pairs = _read_edges(paths[EDGES_FILE])
    try:
        g = build_graph(pairs, features, labels, name=name or directory.name)
    except ValueError as e:
        raise DatasetError(f"{paths[EDGES_FILE]}: {e}") from None
    stats = dataset_stats(g)
    log.info(
        "%s: n=%d D=%d c=%d edges=%d (unique %d) homophily=%.3f",
        g.name, g.n, g.num_features, g.num_classes, g.n_input_pairs, g.num_edges,
        stats["homophily"],
    )
    profile = PROFILES.get(g.name.lower())
    if profile is not None:
        for field, expected, found in compare_to_profile(stats, profile):
            log.warning("%s: %s is %s, published copy has %s", g.name, field, found, expected)
    return g


def dataset_stats(g):
    return {
        "nodes": g.n,
        "features": g.num_features,
        "classes": g.num_classes,
        "edges": g.n_input_pairs,
        "unique_edges": g.num_edges,
        "homophily": homophily_rate(g) if g.num_edges else float("nan"),
    }


def compare_to_profile(stats, profile, homophily_tol=0.01):
    """List of ``(field, expected, found)`` for every mismatching statistic."""
    out = []
    for field in ("nodes", "features", "classes", "edges"):
        if stats[field] != getattr(profile, field):
            out.append((field, getattr(profile, field), stats[field]))
    if not abs(stats["homophily"] - profile.homophily) <= homophily_tol:
        out.append(("homophily", profile.homophily, round(stats["homophily"], 4)))
    return out


def _write_raw(directory, pairs, features, labels):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / EDGES_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in pairs:
            fh.write(f"{i} {j}\n")
    with open(directory / FEATURES_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for row in features:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
    with open(directory / LABELS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(y)}\n" for y in labels)


def convert_linqs(content_path, cites_path, out_dir):
    """Convert a LINQS ``.content``/``.cites`` pair (e.g. Cora).

    Every citation line is kept, so the written edge file has as many lines as
    the source; citations naming unknown papers are dropped with a warning.
    Class names are numbered in sorted order.
    """
    ids, feats, names = [], [], []
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            feats.append([float(v) for v in parts[1:-1]])
            names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = {c: k for k, c in enumerate(sorted(set(names)))}
    pairs, dropped = [], 0
    with open(cites_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] in index and parts[1] in index:
                pairs.append((index[parts[0]], index[parts[1]]))
            else:
                dropped += 1
    if dropped:
        log.warning("dropped %d citations to papers without content rows", dropped)
    _write_raw(out_dir, pairs, feats, [classes[c] for c in names])


def convert_geom_gcn(node_file, edge_file, out_dir):
    """Convert the tab-separated web-page layout (Chameleon, Squirrel).

    ``node_file`` rows are ``id<TAB>comma features<TAB>label`` after a header;
    ``edge_file`` rows are ``src<TAB>dst`` after a header.
    """
    rows = {}
    with open(node_file, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            nid, feat, label = line.rstrip("\n").split("\t")
            rows[int(nid)] = ([float(v) for v in feat.split(",")], int(label))
    n = len(rows)
    feats = [rows[i][0] for i in range(n)]
    labels = [rows[i][1] for i in range(n)]
    pairs = []
    with open(edge_file, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            a, b = line.split()
            pairs.append((int(a), int(b)))
    _write_raw(out_dir, pairs, feats, labels)


def convert_planetoid(raw_dir, name, out_dir):
    """Convert the pickled ``ind.<name>.*`` split files (Citeseer, Cora, Pubmed).

    Test indices missing from the published split (Citeseer's isolated nodes)
    receive zero features and class 0. Each adjacency-list entry ``(i, j)``
    with ``i <= j`` becomes one edge line.
    """
    import scipy.sparse as sp

    raw_dir = Path(raw_dir)

    def load(ext):
        with open(raw_dir / f"ind.{name}.{ext}", "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (load(e) for e in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw_dir / f"ind.{name}.test.index", dtype=np.int64)
    lo, hi = test_idx.min(), test_idx.max()
    if name == "citeseer":
        full = np.arange(lo, hi + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_idx - lo, :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_idx - lo, :] = ty
        ty = ty_ext
    feats = sp.vstack([allx, tx]).tolil()
    labels = np.vstack([ally, ty])
    feats[test_idx, :] = feats[np.sort(test_idx), :]
    labels[test_idx, :] = labels[np.sort(test_idx), :]
    pairs = [(i, j) for i, nbrs in graph.items() for j in nbrs if i <= j]
    _write_raw(out_dir, pairs, feats.toarray(), labels.argmax(axis=1))


def write_dataset(g, directory):
    """Write ``g`` in the canonical layout (unique edges, ``%.9g`` decimals)."""
    _write_raw(directory, g.edges, g.features, g.labels)


@dataclass(frozen=True)
class SbmSpec:
    nodes_per_class: int = 50
    classes: int = 2
    p_in: float = 0.1
    p_out: float = 0.01
    dim: int = 16
    separation: float = 1.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.p_in <= 1 and 0 <= self.p_out <= 1):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if min(self.nodes_per_class, self.classes, self.dim) < 1:
            raise ValueError("counts must be positive")


def generate_sbm(spec: SbmSpec) -> Graph:
    """Stochastic block model with Gaussian class-conditional features.

    Class means are random unit directions scaled by ``separation``; each
    node adds isotropic noise of standard deviation ``noise``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.nodes_per_class * spec.classes
    labels = np.repeat(np.arange(spec.classes), spec.nodes_per_class)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    keep = rng.random(len(iu)) < prob
    pairs = np.stack([iu[keep], ju[keep]], axis=1)

    means = rng.standard_normal((spec.classes, spec.dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    feats = spec.separation * means[labels] + spec.noise * rng.standard_normal((n, spec.dim))
    return build_graph(pairs, feats, labels, name=f"sbm-{spec.seed}")


def expected_sbm_homophily(spec: SbmSpec) -> float:
    """Expected same-class share of edges (ratio of expected counts)."""
    m, c = spec.nodes_per_class, spec.classes
    same = spec.p_in * c * m * (m - 1) / 2
    cross = spec.p_out * (c * (c - 1) / 2) * m * m
    return same / (same + cross)


def embedding_header(d):
    return (
        ["node_id", "label"]
        + [f"f_{i}" for i in range(d)]
        + [f"h_{i}" for i in range(d)]
        + [f"hf_{i}" for i in range(d)]
    )


def export_embeddings(state, labels, path):
    """Write ``node_id,label,f_*,h_*,hf_*`` rows with 9 significant digits."""
    f, h, hf = (np.asarray(getattr(m, "value", m)) for m in (state.F, state.H, state.Hf))
    n, d = f.shape
    path = Path(path)
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise OSError(f"cannot write embeddings to {path}: {e.strerror}") from e
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(embedding_header(d))
        for i in range(n):
            w.writerow(
                [i, int(labels[i])] + [f"{v:.9g}" for v in np.concatenate([f[i], h[i], hf[i]])]
            )
    return path


def read_embeddings(path):
    """Inverse of :func:`export_embeddings`: ``(labels, F, H, Hf)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = (data.shape[1] - 2) // 3
    return data[:, 1].astype(np.int64), data[:, 2:2 + d], data[:, 2 + d:2 + 2 * d], data[:, 2 + 2 * d:]


def find_dataset(name, root=None):
    """``<root>/<name>`` where ``root`` defaults to ``$DGNN_DATA`` or ``./data``."""
    root = Path(root or os.environ.get("DGNN_DATA", "data"))
    return root / name
