"""Random instance generators shared by the property and acceptance tests."""

import numpy as np

from coopdecode.codes import ParityCheckMatrix, build_hamming74
from coopdecode.coop_core import build_propagation_matrix, pairwise_decomposition, scope_neighbourhoods
from coopdecode.ldpc_coop import TannerDecomposition


def random_pairwise(rng, n=None, domain=2, density=0.35, scale=5.0):
    """Connected random pairwise instance with nonnegative factor tables."""
    n = n or int(rng.integers(3, 13))
    edges = {(i - 1, i) for i in range(1, n)}  # path keeps it connected
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[a]), int(order[b])))) for a, b in edges}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density / n * 3:
                edges.add((a, b))
    factors = {e: scale * rng.random((domain, domain)) for e in sorted(edges)}
    dec = pairwise_decomposition(n, factors, domain)
    return dec, build_propagation_matrix(scope_neighbourhoods(dec))


def random_small_code(rng, n=None):
    """Random parity-check matrix on at most 12 variables with a connected Tanner graph."""
    while True:
        n = n or int(rng.integers(5, 13))
        rows = []
        for _ in range(int(rng.integers(2, max(3, n // 2 + 1)))):
            w = int(rng.integers(2, min(n, 5) + 1))
            rows.append(sorted(rng.choice(n, size=w, replace=False).tolist()))
        h = ParityCheckMatrix.from_rows(n, rows)
        if all(len(c) for c in h.col_support):
            try:
                TannerDecomposition(h, np.zeros((n, 2))).propagation_matrix()
            except Exception:
                continue
            return h


def random_ldpc(rng, n=None, ebn0_scale=1.5):
    """LDPC-derived decomposition with random channel costs (shifted nonnegative)."""
    h = build_hamming74().h if rng.random() < 0.3 else random_small_code(rng, n)
    llr = ebn0_scale * rng.standard_normal(h.n)
    dec = TannerDecomposition.from_llr(h, llr)
    return dec.as_cost_decomposition(), dec.propagation_matrix(), dec


def random_instances(seed, count, ldpc_every=3):
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        if t % ldpc_every == ldpc_every - 1:
            dec, w, _ = random_ldpc(rng)
        else:
            dec, w = random_pairwise(rng)
        out.append((dec, w))
    return out


def random_tree_code(rng, n_max=12):
    """Cycle-free Tanner graph: each new check touches exactly one existing variable."""
    first = int(rng.integers(2, 5))
    rows = [list(range(first))]
    n = first
    while n < n_max:
        new = int(rng.integers(1, min(3, n_max - n) + 1))
        anchor = int(rng.integers(0, n))
        rows.append([anchor] + list(range(n, n + new)))
        n += new
        if rng.random() < 0.25:
            break
    return ParityCheckMatrix.from_rows(n, rows)
