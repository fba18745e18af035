"""Integer partitions as multiplicity sequences.

A partition of ``M`` is stored as the map ``k -> p_k`` of part sizes to the
number of parts of that size (zero counts are never stored).  Everything here
is exact: masses are ints, integrals of size distributions are Fractions and
partition numbers are big ints.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

ENUMERATION_CAP = 60


@dataclass(frozen=True)
class Partition:
    """Finite multiplicity sequence ``(p_k)``; immutable and hashable."""

    items: tuple[tuple[int, int], ...] = ()
    mass: int = field(init=False)

    def __post_init__(self):
        total = 0
        last = 0
        for k, c in self.items:
            if k <= last:
                raise ValueError("part sizes must be strictly increasing positive ints")
            if c <= 0:
                raise ValueError(f"count for part {k} must be positive, got {c}")
            total += k * c
            last = k
        object.__setattr__(self, "mass", total)

    @classmethod
    def from_multiplicities(cls, mult: Mapping[int, int]) -> "Partition":
        items = []
        for k, c in sorted(mult.items()):
            k, c = int(k), int(c)
            if k < 1 or c < 0:
                raise ValueError(f"invalid multiplicity {k}: {c}")
            if c:
                items.append((k, c))
        return cls(tuple(items))

    @classmethod
    def from_parts(cls, parts) -> "Partition":
        """Build from a list of summands, e.g. ``[1, 1, 2, 2, 3, 5]``."""
        mult: dict[int, int] = {}
        for k in parts:
            mult[int(k)] = mult.get(int(k), 0) + 1
        return cls.from_multiplicities(mult)

    @property
    def multiplicities(self) -> dict[int, int]:
        return dict(self.items)

    def count(self, k: int) -> int:
        return dict(self.items).get(k, 0)

    @property
    def num_parts(self) -> int:
        return sum(c for _, c in self.items)

    def parts(self) -> list[int]:
        """Summands in non-increasing order (rows of the Young diagram)."""
        out = []
        for k, c in reversed(self.items):
            out.extend([k] * c)
        return out

    def to_json(self) -> str:
        return json.dumps({"parts": {str(k): c for k, c in self.items}})

    @classmethod
    def from_json(cls, text: str | dict) -> "Partition":
        obj = json.loads(text) if isinstance(text, str) else text
        return cls.from_multiplicities({int(k): int(v) for k, v in obj["parts"].items()})

    def __str__(self):
        if not self.items:
            return "0"
        return "+".join(str(k) for k in reversed(self.parts()))


def mass(p: Partition) -> int:
    return p.mass


@dataclass(frozen=True)
class SizeDistribution:
    """Step function ``f(x) = #{parts >= x}`` of a partition.

    ``breakpoints[i] = (k_i, v_i)`` with ``k_i`` the distinct part sizes in
    increasing order and ``v_i = f(x)`` for ``k_{i-1} < x <= k_i``.
    ``f`` is non-increasing, equals ``v_0`` on ``(0, k_0]`` and 0 beyond the
    largest part.
    """

    breakpoints: tuple[tuple[int, int], ...]

    def __call__(self, x: float) -> int:
        for k, v in self.breakpoints:
            if x <= k:
                return v
        return 0

    @property
    def total_integral(self) -> Fraction:
        total = Fraction(0)
        prev = 0
        for k, v in self.breakpoints:
            total += Fraction(k - prev) * v
            prev = k
        return total

    def to_csv_rows(self) -> list[tuple[float, int]]:
        """Rows ``(x, f)`` at the left end of each constant piece, plus the drop to 0."""
        rows = []
        prev = 0
        for k, v in self.breakpoints:
            rows.append((float(prev), v))
            prev = k
        rows.append((float(prev), 0))
        return rows


def size_distribution(p: Partition) -> SizeDistribution:
    bps = []
    remaining = p.num_parts
    for k, c in p.items:
        bps.append((k, remaining))
        remaining -= c
    return SizeDistribution(tuple(bps))


def enumerate_partitions(M: int, cap: int = ENUMERATION_CAP) -> Iterator[Partition]:
    """Yield every partition of ``M`` once, largest part first, decreasing."""
    if M < 0:
        raise ValueError("M must be non-negative")
    if M > cap:
        raise ValueError(f"M={M} exceeds enumeration cap {cap}")

    def rec(remaining: int, largest: int) -> Iterator[list[int]]:
        if remaining == 0:
            yield []
            return
        for k in range(min(remaining, largest), 0, -1):
            for rest in rec(remaining - k, k):
                yield [k] + rest

    for parts in rec(M, M):
        yield Partition.from_parts(parts)


_Q_CACHE = [1]


def partition_number(M: int) -> int:
    """``Q_M`` by Euler's pentagonal-number recurrence (exact)."""
    if M < 0:
        return 0
    q = _Q_CACHE
    for n in range(len(q), M + 1):
        total = 0
        j = 1
        while True:
            g1 = j * (3 * j - 1) // 2
            if g1 > n:
                break
            sign = 1 if j % 2 else -1
            total += sign * q[n - g1]
            g2 = g1 + j
            if g2 <= n:
                total += sign * q[n - g2]
            j += 1
        q.append(total)
    return q[M]


def hardy_ramanujan_estimate(M: int) -> float:
    if M < 1:
        raise ValueError("M must be >= 1")
    return math.exp(math.pi * math.sqrt(2.0 * M / 3.0)) / (4.0 * M * math.sqrt(3.0))


def hardy_ramanujan_ratio(M: int) -> float:
    """``Q_M`` divided by the Hardy-Ramanujan estimate (computed in log space)."""
    log_q = math.log(partition_number(M))
    log_est = math.pi * math.sqrt(2.0 * M / 3.0) - math.log(4.0 * M * math.sqrt(3.0))
    return math.exp(log_q - log_est)
