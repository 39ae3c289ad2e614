"""Young's lattice and the reduced 2D chain.

Configurations of the driven square lattice reachable from the flipped corner
are staircases in the corner, labelled by integer partitions (column heights).
The single-box partition is the base of the lattice; each level ``n`` holds the
partitions of ``n`` together with their path weights (the number of ways to
build the shape one box at a time, i.e. standard Young tableaux counts).

The coupled state ``|n>`` is the normalised weight vector over level ``n``.
Because the squared weights of a level sum to ``n!``, consecutive coupled
states are linked by ``Omega * sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping

from .errors import ConfigError, SizeLimitError

#: Largest excitation number accepted by the enumerators (p(40) = 37338).
MAX_N = 40


@dataclass(frozen=True, order=False)
class Partition:
    """A non-increasing sequence of positive integers.

    Parameters
    ----------
    parts : tuple of int
        Column heights, largest first. The empty tuple is the partition of 0.
    """

    parts: tuple[int, ...] = ()

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if any(p < 1 for p in parts):
            raise ValueError(f"parts must be positive: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"parts must be non-increasing: {parts}")

    @property
    def n(self) -> int:
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __lt__(self, other: "Partition") -> bool:
        # reverse lexicographic: (3) < (2, 1) < (1, 1, 1)
        return self.parts > other.parts

    def __str__(self) -> str:
        return ",".join(str(p) for p in self.parts)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        text = text.strip()
        if not text:
            return cls(())
        return cls(tuple(int(t) for t in text.split(",")))


def _check_n(n: int, low: int = 0) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise ConfigError(f"excitation number must be an integer, got {n!r}")
    n = int(n)
    if n < low:
        raise ConfigError(f"excitation number must be >= {low}, got {n}")
    if n > MAX_N:
        raise SizeLimitError(f"n = {n} exceeds the enumeration cap {MAX_N}")
    return n


def _partitions_desc(n: int, largest: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions_desc(n - first, first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _partitions_cached(n: int) -> tuple[Partition, ...]:
    return tuple(Partition(p) for p in _partitions_desc(n, n))


def partitions_of(n: int) -> list[Partition]:
    """All partitions of ``n`` in reverse lexicographic order.

    >>> [str(p) for p in partitions_of(3)]
    ['3', '2,1', '1,1,1']
    """
    return list(_partitions_cached(_check_n(n)))


def parents(lam: Partition) -> list[Partition]:
    """Partitions obtained by removing one box from ``lam``."""
    if lam.n < 1:
        raise ValueError("the empty partition has no parents")
    parts = lam.parts
    out = []
    for i, p in enumerate(parts):
        # removable iff the next part is strictly smaller
        nxt = parts[i + 1] if i + 1 < len(parts) else 0
        if p > nxt:
            new = parts[:i] + ((p - 1,) if p > 1 else ()) + parts[i + 1:]
            out.append(Partition(new))
    return sorted(out)


def children(lam: Partition) -> list[Partition]:
    """Partitions obtained by adding one box to ``lam``."""
    parts = lam.parts
    out = []
    for i, p in enumerate(parts):
        prev = parts[i - 1] if i > 0 else math.inf
        if p < prev:
            out.append(Partition(parts[:i] + (p + 1,) + parts[i + 1:]))
    out.append(Partition(parts + (1,)))
    return sorted(out)


@dataclass(frozen=True)
class LatticeLevel:
    """Level ``n`` of Young's lattice with exact integer path weights."""

    n: int
    entries: Mapping[Partition, int]

    def sum_sq(self) -> int:
        return sum(w * w for w in self.entries.values())

    def dump(self) -> str:
        return "\n".join(f"{lam}\t{w}" for lam, w in self.entries.items())


@lru_cache(maxsize=None)
def _level_weights(n: int) -> tuple[tuple[Partition, int], ...]:
    if n == 1:
        return ((Partition((1,)), 1),)
    prev = dict(_level_weights(n - 1))
    return tuple(
        (lam, sum(prev[mu] for mu in parents(lam)))
        for lam in _partitions_cached(n)
    )


def level(n: int) -> LatticeLevel:
    """Weights of level ``n`` from the parent-sum recursion.

    The recursion starts at the single-box partition, which carries weight 1.
    """
    n = _check_n(n, low=1)
    for k in range(1, n):  # fill the cache bottom-up, avoids deep recursion
        _level_weights(k)
    return LatticeLevel(n, dict(_level_weights(n)))


def format_levels(levels: list[LatticeLevel]) -> str:
    """Text dump: ``parts<TAB>weight`` per line, blank line between levels."""
    return "\n\n".join(lv.dump() for lv in levels) + "\n"


def parse_levels(text: str) -> list[dict[Partition, int]]:
    blocks = [b for b in text.strip("\n").split("\n\n") if b.strip()]
    out = []
    for block in blocks:
        entries = {}
        for line in block.splitlines():
            parts, w = line.split("\t")
            entries[Partition.parse(parts)] = int(w)
        out.append(entries)
    return out


@dataclass(frozen=True)
class CoupledState:
    """Normalised superposition of the partition states of level ``n``."""

    n: int
    coeffs: Mapping[Partition, float]

    def norm_sq(self) -> float:
        return math.fsum(c * c for c in self.coeffs.values())


def coupled_state(n: int) -> CoupledState:
    """Build ``|n>`` from ``|1>`` by repeated hyperplane elimination.

    The only level-(k+1) direction that ``|k>`` couples to has components
    ``beta_j = sum of c_i over parents i of j``; normalising it gives
    ``|k+1>``.
    """
    n = _check_n(n, low=1)
    coeffs = {Partition((1,)): 1.0}
    for k in range(1, n):
        beta = {
            lam: math.fsum(coeffs[mu] for mu in parents(lam))
            for lam in _partitions_cached(k + 1)
        }
        norm = math.sqrt(math.fsum(b * b for b in beta.values()))
        coeffs = {lam: b / norm for lam, b in beta.items()}
    return CoupledState(n, coeffs)


def exact_amplitude(weight: int, n: int) -> float:
    """``weight / sqrt(n!)`` evaluated as the root of an exact ratio."""
    return math.sqrt(Fraction(weight * weight, math.factorial(n)))


def hop_amplitude(n: int, omega: float = 1.0) -> float:
    """``<n+1|H|n>`` summed link by link from the coupled-state coefficients.

    Every parent-child link between partition states contributes ``omega``.
    """
    lower = coupled_state(n).coeffs
    upper = coupled_state(n + 1).coeffs
    total = math.fsum(
        c * lower[mu] for lam, c in upper.items() for mu in parents(lam)
    )
    return omega * total


def effective_coupling(n: int, omega: float) -> float:
    """Coupling between ``|n-1>`` and ``|n>``: ``omega * N_n / N_{n-1}``.

    With ``N_n = sqrt(n!)`` the ratio is ``sqrt(n)``.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega!r}")
    ratio = Fraction(math.factorial(int(n)), math.factorial(int(n) - 1))
    return omega * math.sqrt(ratio)
