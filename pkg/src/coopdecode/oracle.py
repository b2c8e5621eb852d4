"""Exhaustive references used to check the decoders and the cooperative engine."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import logsumexp

from .codes import LinearCode, ParityCheckMatrix, syndrome
from .coop_core import AssignmentConstraints, CostDecomposition, PropagationMatrix, coop_iterate
from .errors import CapacityError
from .ldpc_coop import unary_costs

MAX_ENUM_BITS = 24
TIE_TOL = 1e-12
_CHUNK_BITS = 16


def _info_words(k: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def enumerate_codewords(code: LinearCode):
    """Yield all codewords in chunks, ordered by information word."""
    k = code.dimension
    if k > MAX_ENUM_BITS:
        raise CapacityError(f"dimension {k} too large to enumerate (cap {MAX_ENUM_BITS})")
    total = 1 << k
    step = 1 << _CHUNK_BITS
    for start in range(0, total, step):
        yield code.encode(_info_words(k, start, min(total, start + step)))


def codeword_costs(code: LinearCode, llr) -> tuple[np.ndarray, np.ndarray]:
    """All codewords and their sum_i f_i(x_i)."""
    f = unary_costs(llr)
    words = np.concatenate(list(enumerate_codewords(code)))
    costs = np.where(words == 1, f[:, 1], f[:, 0]).sum(axis=1)
    return words, costs


def _tie_tol(llr) -> float:
    return TIE_TOL * max(1.0, float(np.abs(unary_costs(llr)).sum()))


def ml_decode_bruteforce(code: LinearCode, llr):
    """Maximum-likelihood codeword by enumeration: (codeword, cost, is_tie)."""
    words, costs = codeword_costs(code, llr)
    best = int(np.argmin(costs))
    is_tie = int(np.count_nonzero(costs <= costs[best] + _tie_tol(llr))) > 1
    return words[best], float(costs[best]), is_tie


def min_cost_gap(code: LinearCode, llr) -> float:
    """Smallest positive difference between the best codeword cost and any other."""
    _, costs = codeword_costs(code, llr)
    best = costs.min()
    others = costs[costs > best + _tie_tol(llr)]
    return float(others.min() - best) if others.size else np.inf


def ml_decode_fullspace(h: ParityCheckMatrix, llr, max_bits: int = 22):
    """ML by scanning all 2^n words and keeping those with zero syndrome."""
    if h.n > max_bits:
        raise CapacityError(f"n={h.n} too large for a full-space scan")
    words = _info_words(h.n, 0, 1 << h.n)
    words = words[~syndrome(h, words).any(axis=1)]
    f = unary_costs(llr)
    costs = np.where(words == 1, f[:, 1], f[:, 0]).sum(axis=1)
    best = int(np.argmin(costs))
    return words[best], float(costs[best])


def bitwise_map_bruteforce(code: LinearCode, llr) -> np.ndarray:
    """Exact per-bit posterior log P(x_i=1|y)/P(x_i=0|y), uniform prior over codewords."""
    words = np.concatenate(list(enumerate_codewords(code)))
    loglik = words.astype(float) @ np.asarray(llr, dtype=float)
    out = np.empty(code.n)
    for i in range(code.n):
        ones = words[:, i] == 1
        out[i] = logsumexp(loglik[ones]) - logsumexp(loglik[~ones])
    return out


def minimize_bruteforce(dec: CostDecomposition, chunk: int = 1 << 14):
    """Global minimizer of sum_i E_i by exhaustive scan; infeasible points never win."""
    space = int(np.prod(dec.domains, dtype=object))
    if space > 1 << MAX_ENUM_BITS:
        raise CapacityError(f"assignment space {space} exceeds 2^{MAX_ENUM_BITS}")
    best_x, best_cost = None, np.inf
    grid = itertools.product(*[range(d) for d in dec.domains])
    while True:
        block = np.array(list(itertools.islice(grid, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        costs = dec.energies(block)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost, best_x = float(costs[i]), block[i]
    return best_x, best_cost


def all_assignments(domains) -> np.ndarray:
    return np.array(list(itertools.product(*[range(d) for d in domains])), dtype=np.int64)


def estimate_equilibrium(dec: CostDecomposition, w: PropagationMatrix, lam: float, iterations: int = 2000):
    """Iterate from c = 0 with constant lam; returns (final tables, last residual)."""
    c = AssignmentConstraints.zeros(dec.domains)
    residual = np.inf
    for _ in range(iterations):
        c, report = coop_iterate(dec, w, c, lam)
        residual = report.residual
        if residual == 0.0:
            break
    return c, residual
