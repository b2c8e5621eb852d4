"""BPSK over AWGN: noise level conventions, transmission and channel LLRs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for unit-energy BPSK at the given Eb/N0 and code rate."""
    if rate <= 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def frame_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one frame, keyed on (seed, *keys)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *(int(k) for k in keys)]))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float
    seed: int = 0
    sigma: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise ParameterError(f"rate must lie in (0, 1], got {self.rate}")
        object.__setattr__(self, "sigma", sigma_from_ebn0(self.ebn0_db, self.rate))

    @classmethod
    def with_sigma(cls, sigma: float, rate: float, seed: int = 0) -> "ChannelParams":
        if sigma <= 0:
            raise ParameterError("sigma must be positive")
        ebn0_db = 10.0 * math.log10(1.0 / (2.0 * rate * sigma * sigma))
        return cls(ebn0_db, rate, seed)


@dataclass(frozen=True)
class ReceivedFrame:
    y: np.ndarray
    llr: np.ndarray
    truth: np.ndarray | None = None


def llr(y, sigma: float) -> np.ndarray:
    """log P(y|x=1) / P(y|x=0) for symbols 2x-1 in Gaussian noise."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return 2.0 * np.asarray(y, dtype=float) / (sigma * sigma)


def modulate(x) -> np.ndarray:
    return 2.0 * np.asarray(x, dtype=float) - 1.0


def transmit(x, params: ChannelParams, frame_index: int = 0, rng: np.random.Generator | None = None) -> ReceivedFrame:
    """Send one codeword; noise comes from the (seed, frame_index) stream unless ``rng`` is given."""
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 1:
        raise DimensionError("transmit takes a single codeword")
    if rng is None:
        rng = frame_rng(params.seed, frame_index)
    y = modulate(x) + params.sigma * rng.standard_normal(x.shape[0])
    return ReceivedFrame(y, llr(y, params.sigma), x.copy())
