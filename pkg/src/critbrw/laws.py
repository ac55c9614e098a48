"""Critical offspring laws and their size-biased versions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import stats

# Truncation point for laws with unbounded support; the neglected tail mass
# is below 1e-20 for every preset.
_TAIL_CUTOFF = 80


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """A critical offspring distribution on the nonnegative integers.

    ``pmf[k]`` is the probability of ``k`` children.  Presets with unbounded
    support store a truncated table; ``kind`` selects an exact sampler.
    """

    name: str
    pmf: np.ndarray
    variance: float
    kind: str = "table"
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "_cdf", np.cumsum(pmf))
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: probabilities sum to {pmf.sum()!r}")
        if abs(self.mean - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: law is not critical (mean {self.mean!r})")
        if not 0 < self.variance < math.inf or (len(pmf) > 1 and pmf[1] >= 1):
            raise ValueError(f"{self.name}: degenerate law")

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    @property
    def sigma_z(self) -> float:
        return math.sqrt(self.variance)

    @property
    def sigma(self) -> float:
        """Scaling constant 2/sigma_Z of the tree metric."""
        return 2.0 / self.sigma_z

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pmf > 0)

    @property
    def support_period(self) -> int:
        return int(reduce(math.gcd, (int(k) for k in self.support), 0))

    def p(self, k: int) -> float:
        if self.kind == "geometric":
            return 0.5 ** (k + 1)
        if self.kind == "poisson":
            return math.exp(-1.0) / math.factorial(k)
        return float(self.pmf[k]) if 0 <= k < len(self.pmf) else 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "geometric":
            return rng.geometric(0.5, size=size) - 1
        if self.kind == "poisson":
            return rng.poisson(1.0, size=size)
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64)

    def size_possible(self, n: int) -> bool:
        """Whether a tree with exactly ``n`` vertices has positive probability."""
        if n < 1:
            return False
        if n == 1:
            return True
        if (n - 1) % self.support_period:
            return False
        support = [int(k) for k in self.support if k > 0]
        if self.kind != "table" or 1 in support:
            return True
        # n offspring counts summing to n - 1: need n - 1 written as a sum of
        # at most n positive support values.
        big = n + 1
        fewest = [0] + [big] * (n - 1)
        for s in range(1, n):
            fewest[s] = min((fewest[s - k] + 1 for k in support if k <= s), default=big)
        return fewest[n - 1] <= n

    def __repr__(self):
        return f"OffspringLaw({self.name!r})"


def geometric_half() -> OffspringLaw:
    k = np.arange(_TAIL_CUTOFF)
    pmf = 0.5 ** (k + 1)
    pmf[-1] += 1.0 - pmf.sum()
    return OffspringLaw("geometric", pmf, variance=2.0, kind="geometric")


def poisson_one() -> OffspringLaw:
    pmf = stats.poisson.pmf(np.arange(_TAIL_CUTOFF // 2), 1.0)
    pmf[-1] += 1.0 - pmf.sum()
    return OffspringLaw("poisson", pmf, variance=1.0, kind="poisson")


def binary() -> OffspringLaw:
    return OffspringLaw("binary", np.array([0.5, 0.0, 0.5]), variance=1.0)


def from_pmf(pmf, name: str = "custom") -> OffspringLaw:
    pmf = np.asarray(pmf, dtype=float)
    k = np.arange(len(pmf))
    var = float(np.dot(k * k, pmf) - 1.0)
    return OffspringLaw(name, pmf, variance=var)


PRESETS = {
    "geometric": geometric_half,
    "poisson": poisson_one,
    "binary": binary,
}


def get_law(name: str) -> OffspringLaw:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown offspring law {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True, eq=False)
class SizeBiasedLaw:
    """Law of Z~ with P[Z~ = k] = k p_k."""

    base: OffspringLaw
    pmf: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        kind = self.base.kind
        if kind == "poisson":
            return rng.poisson(1.0, size=size) + 1
        if kind == "geometric":
            # k 2^-(k+1) is negative binomial: 1 + NB(2, 1/2)
            return rng.negative_binomial(2, 0.5, size=size) + 1
        cdf = np.cumsum(self.pmf)
        return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def size_biased_law(law: OffspringLaw) -> SizeBiasedLaw:
    pmf = np.arange(len(law.pmf)) * law.pmf
    pmf = pmf / pmf.sum()
    pmf.setflags(write=False)
    return SizeBiasedLaw(law, pmf)
