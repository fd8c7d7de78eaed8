"""
Inside the unrolled layer
=========================

Three embedding streams start from the raw attributes: F stays anchored to
X, H diffuses over the citation graph, Hf over the kNN similarity graph. A
shared factor Ws = W W^T measures how well the reconstructed adjacencies of
the streams agree, and every round nudges the streams toward agreement.
"""

import numpy as np

from dgnn import autodiff as ad
from dgnn.datasets import SbmSpec, generate_sbm
from dgnn.graph import cosine_similarity, normalize, semantic_graph
from dgnn.model import DgnnHyperparams, ReconFactor, consistency_residual, forward, round_cost

g = generate_sbm(SbmSpec(nodes_per_class=30, classes=3, p_in=0.2, p_out=0.02, dim=8, seed=1))
x = g.features / np.abs(g.features).sum(axis=1, keepdims=True)
a_hat = normalize(g.adjacency(dense=True))
a_hat_f = semantic_graph(cosine_similarity(x), k=5).normalized
factor = ReconFactor.initialize(x.shape[1], np.random.default_rng(0))

# %% With the consistency weight off the layer is plain propagation.
plain = forward(x, a_hat, a_hat_f, factor, DgnnHyperparams(beta=0.0, layers=2))
print("beta=0, H == A^2 X:", np.allclose(plain.H.value, a_hat @ a_hat @ x, atol=1e-12))
print("beta=0, F == X:   ", np.array_equal(plain.F.value, x))

# %% Network mode gates the residual through a sigmoid. Because
# sigmoid(0) = 0.5, a perfectly consistent state still gets a correction;
# analytic mode drops the sigmoid and leaves such a state alone.
for mode in ("analytic", "network"):
    s = forward(x, a_hat, a_hat_f, factor, DgnnHyperparams(beta=0.05, layers=1, mode=mode))
    moved = np.abs(s.F.value - x).max()
    r = consistency_residual(s, factor, 0.5).value
    print(f"{mode:8s}  max |F - X| = {moved:.3e}   ||R||_F = {np.linalg.norm(r):.3e}")

# %% Cost per round is dominated by N x N products.
n, d = x.shape
with ad.count_ops() as c:
    forward(x, a_hat, a_hat_f, factor, DgnnHyperparams(layers=3))
print(f"multiply-adds per round: {c.macs / 3:.3g}  (D N^2 + D^2 N = {round_cost(n, d):.3g})")
