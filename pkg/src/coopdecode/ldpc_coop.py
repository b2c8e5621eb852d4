"""Cooperative decoding of binary LDPC codes.

Each variable owns the sub-problem made of its checks and the variables in
them. Check constraints are hard (0 / inf) and are minimized natively, so soft
tables never hold infinities. Inside a sub-problem the checks are minimized
independently given the owner's value; a leaf shared by two of the owner's
checks (a 4-cycle) is split into copies that each carry an equal share of its
soft cost, which relaxes E_i from below.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .codes import LinearCode, ParityCheckMatrix
from .coop_core import (
    CostDecomposition,
    PropagationMatrix,
    build_propagation_matrix,
)
from .errors import DimensionError, ParameterError


def unary_costs(llr) -> np.ndarray:
    """Per-bit cost tables, shape (..., n, 2): +2a for bit 0, -2a for bit 1."""
    a = np.asarray(llr, dtype=float)
    return np.stack((2.0 * a, -2.0 * a), axis=-1)


def parity_constrained_min(costs: Sequence[tuple[float, float]], required_parity: int) -> tuple[float, list[int]]:
    """Cheapest bit assignment with the given XOR.

    Among equally cheap assignments the lexicographically smallest bit list is
    returned (index 0 most significant).
    """
    c = np.asarray(costs, dtype=float).reshape(-1, 2)
    if len(c) == 0:
        raise ParameterError("parity_constrained_min needs at least one variable")
    bits = (c[:, 1] < c[:, 0]).astype(np.int64)
    if int(bits.sum()) % 2 != required_parity % 2:
        diff = np.abs(c[:, 1] - c[:, 0])
        best = np.flatnonzero(diff == diff.min())
        ones = best[bits[best] == 1]
        flip = ones[0] if ones.size else best[-1]
        bits[flip] ^= 1
    total = 0.0
    for i, b in enumerate(bits):
        total += float(c[i, b])
    return total, [int(b) for b in bits]


def _pcm_value(costs: np.ndarray, parity: int) -> float:
    if len(costs) == 0:
        return 0.0 if parity % 2 == 0 else np.inf
    return parity_constrained_min(costs, parity)[0]


class TannerSubproblem:
    """Sub-problem of one variable: its unary cost plus every adjacent check whole."""

    def __init__(self, owner: int, h: ParityCheckMatrix, unary: np.ndarray):
        self.owner = owner
        self.checks = h.col_support[owner]
        self.leaves = [tuple(v for v in h.row_support[j] if v != owner) for j in self.checks]
        self.supports = [h.row_support[j] for j in self.checks]
        self.scope = tuple(sorted({owner}.union(*[set(s) for s in self.supports])))
        self.copies: dict[int, int] = {}
        for leaves in self.leaves:
            for v in leaves:
                self.copies[v] = self.copies.get(v, 0) + 1
        self.unary = np.asarray(unary, dtype=float)

    def _leaf_costs(self, soft, leaves, skip=None):
        zero = np.zeros(2)
        return np.array([soft.get(v, zero) / self.copies[v] for v in leaves if v != skip]).reshape(-1, 2)

    def _own_terms(self, own_weight, soft):
        return own_weight * self.unary + soft.get(self.owner, np.zeros(2))

    def blended_min(self, own_weight, soft):
        out = self._own_terms(own_weight, soft).copy()
        for leaves in self.leaves:
            costs = self._leaf_costs(soft, leaves)
            out += np.array([_pcm_value(costs, 0), _pcm_value(costs, 1)])
        return out

    def marginals(self, own_weight, soft):
        own = self._own_terms(own_weight, soft)
        per_check = []
        for leaves in self.leaves:
            costs = self._leaf_costs(soft, leaves)
            per_check.append(np.array([_pcm_value(costs, 0), _pcm_value(costs, 1)]))
        out = {self.owner: own + sum(per_check, np.zeros(2))}
        zero = np.zeros(2)
        for var in self.scope:
            if var == self.owner:
                continue
            share = soft.get(var, zero) / self.copies[var]
            g = np.empty(2)
            for v in (0, 1):
                best = np.inf
                for p in (0, 1):
                    total = own[p]
                    for leaves, pc in zip(self.leaves, per_check):
                        if var in leaves:
                            rest = self._leaf_costs(soft, leaves, skip=var)
                            total += share[v] + _pcm_value(rest, p ^ v)
                        else:
                            total += pc[p]
                    best = min(best, total)
                g[v] = best
            out[var] = g
        return out

    def costs(self, assignments):
        x = np.atleast_2d(assignments)
        value = self.unary[x[:, self.owner]].astype(float)
        for support in self.supports:
            odd = x[:, list(support)].sum(axis=1) % 2 == 1
            value = np.where(odd, np.inf, value)
        return value


@dataclass
class TannerDecomposition:
    """Depth-1 Tanner neighbourhood decomposition of sum_i f_i(x_i) + sum_j [check j]."""

    h: ParityCheckMatrix
    unary: np.ndarray
    subproblems: list = field(init=False)

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=float)
        if self.unary.shape != (self.h.n, 2):
            raise DimensionError(f"unary table shape {self.unary.shape} != ({self.h.n}, 2)")
        self.subproblems = [TannerSubproblem(i, self.h, self.unary[i]) for i in range(self.h.n)]

    @classmethod
    def from_llr(cls, h: ParityCheckMatrix, llr, nonnegative: bool = True) -> "TannerDecomposition":
        f = unary_costs(llr)
        if nonnegative:
            f = f - f.min(axis=1, keepdims=True)
        return cls(h, f)

    def scope(self, i: int) -> tuple[int, ...]:
        return self.subproblems[i].scope

    def neighbourhoods(self) -> list[set[int]]:
        return [set(s.scope) - {s.owner} for s in self.subproblems]

    def propagation_matrix(self) -> PropagationMatrix:
        return build_propagation_matrix(self.neighbourhoods())

    def as_cost_decomposition(self) -> CostDecomposition:
        return CostDecomposition((2,) * self.h.n, list(self.subproblems))

    def subproblem_min(self, i: int, pin: int, c_prev, lambda_k: float, w_row) -> float:
        """Blended sub-problem minimum for variable i with x_i = pin.

        ``c_prev`` is indexable by variable giving a length-2 table; ``w_row``
        is row i of W, dense or as a {j: w_ij} mapping.
        """
        sub = self.subproblems[i]
        weights = w_row if isinstance(w_row, Mapping) else {j: float(x) for j, x in enumerate(w_row) if x}
        scope = set(sub.scope)
        soft = {}
        const = 0.0
        for j, wij in weights.items():
            if j in scope:
                soft[j] = lambda_k * wij * np.asarray(c_prev[j], dtype=float)
            else:
                const += lambda_k * wij * float(np.min(c_prev[j]))
        return float(sub.blended_min(1.0 - lambda_k, soft)[pin]) + const


# -- decoder ---------------------------------------------------------------


class DecodeStatus(str, enum.Enum):
    CONSENSUS = "Consensus"
    SYNDROME_ONLY = "SyndromeOnly"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class DecodeResult:
    codeword: np.ndarray
    consensus: bool
    syndrome_ok: bool
    iterations: int
    gap_certificate: float | None
    lower_bound_trace: list[float]
    status: DecodeStatus
    posterior: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class CoopDecoderConfig:
    lam: float | Callable[[int], float] = 0.9
    max_iterations: int = 120
    consensus_window: int = 1
    syndrome_patience: int | None = 3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if self.consensus_window < 1:
            raise ParameterError("consensus_window must be >= 1")
        if not callable(self.lam) and not 0.0 <= float(self.lam) < 1.0:
            raise ParameterError(f"lambda must lie in [0, 1), got {self.lam}")

    def lam_at(self, k: int) -> float:
        value = float(self.lam(k)) if callable(self.lam) else float(self.lam)
        if not 0.0 <= value < 1.0:
            raise ParameterError(f"lambda_{k} = {value} outside [0, 1)")
        return value


class CooperativeDecoder:
    """Batched cooperative decoder over a fixed parity-check matrix.

    All per-frame arithmetic is elementwise or reduced along the edge axis, so
    a frame's result does not depend on which other frames share its batch.
    """

    def __init__(self, code: LinearCode | ParityCheckMatrix, config: CoopDecoderConfig = CoopDecoderConfig()):
        h = code.h if isinstance(code, LinearCode) else code
        self.h = h
        self.config = config
        n = h.n
        checks, edge_vars = h.edges
        row_len = np.array([len(r) for r in h.row_support])
        row_ptr = np.concatenate(([0], np.cumsum(row_len)))

        # slots: (owner, check) pairs, ordered by owner then check
        order = np.lexsort((checks, edge_vars))
        slot_owner = edge_vars[order]
        slot_check = checks[order]
        reps = row_len[slot_check]
        slot_of_pos = np.repeat(np.arange(len(slot_owner)), reps)
        first = np.repeat(np.cumsum(reps) - reps, reps)
        offset = np.arange(reps.sum()) - first
        leaf = edge_vars[row_ptr[slot_check][slot_of_pos] + offset]
        keep = leaf != slot_owner[slot_of_pos]
        self.tri_leaf = leaf[keep]
        self.tri_slot = slot_of_pos[keep]
        self.tri_owner = slot_owner[self.tri_slot]
        self.slot_owner = slot_owner
        self.slot_start = np.concatenate(([0], np.cumsum(reps - 1)[:-1]))

        degree = np.bincount(slot_owner, minlength=n)
        self.has_slots = degree > 0
        self.all_have_slots = bool(self.has_slots.all())
        self.own_start = (np.cumsum(degree) - degree)[self.has_slots]

        key = self.tri_owner * n + self.tri_leaf
        _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
        copies = counts[inverse]

        neighbours = [set() for _ in range(n)]
        for i, l in zip(self.tri_owner.tolist(), self.tri_leaf.tolist()):
            neighbours[i].add(l)
        self.w = build_propagation_matrix(neighbours)
        w_pair = np.asarray(self.w.matrix[self.tri_owner, self.tri_leaf]).ravel()
        self.tri_weight = w_pair / copies
        self.w_self = self.w.diagonal()

        self.check_edge_vars = edge_vars
        self.check_start = row_ptr[:-1]

    # one synchronous update on a (B, n, 2) state
    def _step(self, c, fp, lam):
        lc = (lam * self.tri_weight)[None, :, None] * c[:, self.tri_leaf, :]
        c0, c1 = lc[..., 0], lc[..., 1]
        base = np.minimum(c0, c1)
        dd = c1 - c0
        bit = dd < 0
        ad = np.abs(dd)
        base_s = np.add.reduceat(base, self.slot_start, axis=1)
        par_s = np.add.reduceat(bit.astype(np.int32), self.slot_start, axis=1) & 1
        min_s = np.minimum.reduceat(ad, self.slot_start, axis=1)
        s0 = base_s + min_s * par_s
        s1 = base_s + min_s * (1 - par_s)
        new = (1.0 - lam) * fp + (lam * self.w_self)[None, :, None] * c
        new[..., 0] += self._owner_sum(s0)
        new[..., 1] += self._owner_sum(s1)
        return new, (bit, ad, par_s, min_s)

    def _owner_sum(self, slot_values):
        summed = np.add.reduceat(slot_values, self.own_start, axis=1)
        if self.all_have_slots:
            return summed
        out = np.zeros((slot_values.shape[0], self.h.n))
        out[:, self.has_slots] = summed
        return out

    def _consensus(self, new, parts):
        bit, ad, par_s, min_s = parts
        strict = new[..., 0] != new[..., 1]
        xt = new[..., 1] < new[..., 0]
        mismatch = par_s != xt[:, self.slot_owner]
        is_min = ad == min_s[:, self.tri_slot]
        n_min = np.add.reduceat(is_min.astype(np.int32), self.slot_start, axis=1)
        n_zero = np.add.reduceat((ad == 0).astype(np.int32), self.slot_start, axis=1)
        unique = np.where(mismatch, n_min == 1, n_zero <= 1)
        leaf_bit = bit ^ (mismatch[:, self.tri_slot] & is_min)
        agree = leaf_bit == xt[:, self.tri_leaf]
        return strict.all(axis=1) & unique.all(axis=1) & agree.all(axis=1), xt

    def _syndrome_ok(self, xt):
        s = np.add.reduceat(xt[:, self.check_edge_vars].astype(np.int32), self.check_start, axis=1) & 1
        return ~s.any(axis=1)

    def decode(self, llr) -> DecodeResult:
        return self.decode_batch(np.asarray(llr, dtype=float)[None, :])[0]

    def decode_batch(self, llr) -> list[DecodeResult]:
        llr = np.atleast_2d(np.asarray(llr, dtype=float))
        if llr.shape[1] != self.h.n:
            raise DimensionError(f"llr length {llr.shape[1]} != n={self.h.n}")
        cfg = self.config
        batch, n = llr.shape
        f = unary_costs(llr)
        shift = f.min(axis=2)
        fp = f - shift[..., None]
        offset = shift.sum(axis=1)

        results: list[DecodeResult | None] = [None] * batch
        idx = np.arange(batch)
        c = np.zeros((batch, n, 2))
        fp_a = fp
        streak = np.zeros(batch, dtype=np.int64)
        streak_x = np.zeros((batch, n), dtype=bool)
        lam_prod = np.ones(batch)
        bound_before = np.zeros(batch)
        prev_bound = np.zeros(batch)
        synd_run = np.zeros(batch, dtype=np.int64)
        bounds = np.full((batch, cfg.max_iterations), np.nan)
        patience = cfg.syndrome_patience

        for k in range(1, cfg.max_iterations + 1):
            lam = cfg.lam_at(k)
            new, parts = self._step(c, fp_a, lam)
            cons, xt = self._consensus(new, parts)
            synd_ok = self._syndrome_ok(xt)
            bound = np.minimum(new[..., 0], new[..., 1]).sum(axis=1)
            bounds[idx, k - 1] = bound + offset[idx]

            same = (streak > 0) & (streak_x == xt).all(axis=1)
            extend = cons & same
            start = cons & ~same
            streak = np.where(extend, streak + 1, np.where(start, 1, 0))
            lam_prod = np.where(extend, lam_prod * lam, np.where(start, lam, 1.0))
            bound_before = np.where(start, prev_bound, bound_before)
            streak_x = np.where(cons[:, None], xt, streak_x)
            synd_run = np.where(synd_ok, synd_run + 1, 0)
            prev_bound = bound

            by_consensus = (streak >= cfg.consensus_window) & synd_ok
            by_syndrome = ~by_consensus & (synd_run >= patience) if patience else np.zeros_like(by_consensus)
            finished = by_consensus | by_syndrome | (k == cfg.max_iterations)

            for pos in np.flatnonzero(finished):
                b = int(idx[pos])
                if by_consensus[pos]:
                    status = DecodeStatus.CONSENSUS
                elif by_syndrome[pos]:
                    status = DecodeStatus.SYNDROME_ONLY
                else:
                    status = DecodeStatus.MAX_ITERATIONS
                gap = None
                if streak[pos] > 0:
                    e_tilde = float(np.where(xt[pos], fp_a[pos, :, 1], fp_a[pos, :, 0]).sum())
                    gap = float(lam_prod[pos] * max(e_tilde - bound_before[pos], 0.0))
                results[b] = DecodeResult(
                    codeword=xt[pos].astype(np.uint8),
                    consensus=bool(cons[pos]),
                    syndrome_ok=bool(synd_ok[pos]),
                    iterations=k,
                    gap_certificate=gap,
                    lower_bound_trace=bounds[b, :k].tolist(),
                    status=status,
                )
            if finished.all():
                break
            live = ~finished
            idx = idx[live]
            c = new[live]
            fp_a = fp_a[live]
            streak, streak_x, lam_prod = streak[live], streak_x[live], lam_prod[live]
            bound_before, prev_bound, synd_run = bound_before[live], prev_bound[live], synd_run[live]
        return results


def decode_cooperative(code: LinearCode | ParityCheckMatrix, llr, config: CoopDecoderConfig = CoopDecoderConfig()) -> DecodeResult:
    return CooperativeDecoder(code, config).decode(llr)


def codeword_cost(llr, x) -> float:
    """sum_i f_i(x_i) in the unshifted frame."""
    f = unary_costs(llr)
    x = np.asarray(x, dtype=np.int64)
    return float(f[np.arange(len(x)), x].sum())
