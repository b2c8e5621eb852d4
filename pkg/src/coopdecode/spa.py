"""Sum-product (belief propagation) baseline with a flooding schedule."""

from __future__ import annotations

import numpy as np

from .codes import LinearCode, ParityCheckMatrix
from .errors import DimensionError, ParameterError
from .ldpc_coop import DecodeResult, DecodeStatus

CLAMP = 30.0
_EDGE = 1.0 - 1e-15


class SumProductDecoder:
    """Tanh-rule BP on LLRs; internally messages are log P(0)/P(1)."""

    def __init__(self, code: LinearCode | ParityCheckMatrix, max_iterations: int = 30, early_stop: bool = True):
        if max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        h = code.h if isinstance(code, LinearCode) else code
        self.h = h
        self.max_iterations = max_iterations
        self.early_stop = early_stop
        checks, variables = h.edges
        self.e_check = checks
        self.e_var = variables
        self.check_start = np.concatenate(([0], np.cumsum([len(r) for r in h.row_support])[:-1]))
        self.by_var = np.lexsort((checks, variables))
        degree = np.bincount(variables, minlength=h.n)
        self.has_edges = degree > 0
        self.var_start = (np.cumsum(degree) - degree)[self.has_edges]

    def _var_sum(self, msgs):
        summed = np.add.reduceat(msgs[:, self.by_var], self.var_start, axis=1)
        if self.has_edges.all():
            return summed
        out = np.zeros((msgs.shape[0], self.h.n))
        out[:, self.has_edges] = summed
        return out

    def _check_update(self, v2c):
        t = np.tanh(np.clip(v2c, -CLAMP, CLAMP) / 2.0)
        mag = np.abs(t)
        zero = mag == 0
        neg = t < 0
        logmag = np.log(np.where(zero, 1.0, mag))
        s = np.add.reduceat(logmag, self.check_start, axis=1)[:, self.e_check] - logmag
        z = np.add.reduceat(zero.astype(np.int32), self.check_start, axis=1)[:, self.e_check] - zero
        sign = (np.add.reduceat(neg.astype(np.int32), self.check_start, axis=1)[:, self.e_check] - neg) & 1
        prod = np.where(z > 0, 0.0, np.exp(s))
        prod = np.where(sign == 1, -prod, prod)
        return 2.0 * np.arctanh(np.clip(prod, -_EDGE, _EDGE))

    def _syndrome_ok(self, bits):
        s = np.add.reduceat(bits[:, self.e_var].astype(np.int32), self.check_start, axis=1) & 1
        return ~s.any(axis=1)

    def decode(self, llr) -> DecodeResult:
        return self.decode_batch(np.asarray(llr, dtype=float)[None, :])[0]

    def decode_batch(self, llr) -> list[DecodeResult]:
        llr = np.atleast_2d(np.asarray(llr, dtype=float))
        if llr.shape[1] != self.h.n:
            raise DimensionError(f"llr length {llr.shape[1]} != n={self.h.n}")
        batch = llr.shape[0]
        channel = -llr
        c2v = np.zeros((batch, len(self.e_var)))
        idx = np.arange(batch)
        results: list[DecodeResult | None] = [None] * batch
        for k in range(1, self.max_iterations + 1):
            total = channel + self._var_sum(c2v)
            c2v = self._check_update(total[:, self.e_var] - c2v)
            post = channel + self._var_sum(c2v)
            bits = post < 0
            ok = self._syndrome_ok(bits)
            finished = ok if self.early_stop else np.zeros_like(ok)
            if k == self.max_iterations:
                finished = np.ones_like(ok)
            for pos in np.flatnonzero(finished):
                results[int(idx[pos])] = DecodeResult(
                    codeword=bits[pos].astype(np.uint8),
                    consensus=False,
                    syndrome_ok=bool(ok[pos]),
                    iterations=k,
                    gap_certificate=None,
                    lower_bound_trace=[],
                    status=DecodeStatus.SYNDROME_ONLY if ok[pos] else DecodeStatus.MAX_ITERATIONS,
                    posterior=-post[pos],
                )
            if finished.all():
                break
            live = ~finished
            idx, channel, c2v = idx[live], channel[live], c2v[live]
        return results


def decode_sum_product(code: LinearCode | ParityCheckMatrix, llr, max_iterations: int = 30, early_stop: bool = True) -> DecodeResult:
    return SumProductDecoder(code, max_iterations, early_stop).decode(llr)
