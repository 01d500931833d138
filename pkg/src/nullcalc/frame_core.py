"""Exact component algebra in a null frame (e1, e2, e3, e4).

Frame indices are 1..4: 1 and 2 are horizontal, 3 and 4 are the null legs
with g(e3, e4) = -2.  Internally arrays are indexed 0..3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

Scalar = Union[Fraction, float]

FRAME_INDICES = (1, 2, 3, 4)
HORIZONTAL = (1, 2)


class FrameError(ValueError):
    """Raised for invalid frame indices or slot specifications."""


@dataclass(frozen=True, order=True)
class FrameIndex:
    value: int

    def __post_init__(self) -> None:
        if self.value not in FRAME_INDICES:
            raise FrameError(f"frame index must be one of 1..4, got {self.value!r}")

    @property
    def horizontal(self) -> bool:
        return self.value in HORIZONTAL

    @property
    def axis(self) -> int:
        return self.value - 1


def _idx(i: int | FrameIndex) -> int:
    return FrameIndex(i.value if isinstance(i, FrameIndex) else int(i)).value


def metric_component(i: int | FrameIndex, j: int | FrameIndex) -> Fraction:
    """g_ij in the null frame."""
    a, b = _idx(i), _idx(j)
    if a in HORIZONTAL and b in HORIZONTAL:
        return Fraction(int(a == b))
    if {a, b} == {3, 4}:
        return Fraction(-2)
    return Fraction(0)


def inverse_metric_component(i: int | FrameIndex, j: int | FrameIndex) -> Fraction:
    """g^ij in the null frame."""
    a, b = _idx(i), _idx(j)
    if a in HORIZONTAL and b in HORIZONTAL:
        return Fraction(int(a == b))
    if {a, b} == {3, 4}:
        return Fraction(-1, 2)
    return Fraction(0)


def _perm_sign(p: Sequence[int]) -> int:
    sign, seen = 1, list(p)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def epsilon4(i, j, k, l) -> Fraction:
    """Volume form with eps_1234 = +2 = sqrt|det g|."""
    idx = [_idx(x) for x in (i, j, k, l)]
    if len(set(idx)) < 4:
        return Fraction(0)
    return Fraction(2 * _perm_sign([x - 1 for x in idx]))


def epsilon2(a, b) -> Fraction:
    """Area form on the horizontal spheres, eps_12 = 1."""
    x, y = _idx(a), _idx(b)
    if x not in HORIZONTAL or y not in HORIZONTAL:
        raise FrameError("epsilon2 takes horizontal indices only")
    if x == y:
        return Fraction(0)
    return Fraction(1 if (x, y) == (1, 2) else -1)


@dataclass(frozen=True)
class Tensor4:
    """Dense rank-r array over the frame index set; entries Fraction or float.

    ``upper`` marks contravariant slots; by default every slot is covariant.
    """

    array: np.ndarray
    upper: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        if self.array.shape != (4,) * self.array.ndim:
            raise FrameError(f"expected shape (4,)*rank, got {self.array.shape}")
        up = (False,) * self.array.ndim if self.upper is None else tuple(self.upper)
        if len(up) != self.array.ndim:
            raise FrameError("variance tuple must match the rank")
        object.__setattr__(self, "upper", up)

    @property
    def rank(self) -> int:
        return self.array.ndim

    @property
    def exact(self) -> bool:
        return self.array.dtype == object

    def at(self, *idx: int) -> Scalar:
        """Entry addressed by 1-based frame indices."""
        if len(idx) != self.rank:
            raise FrameError(f"need {self.rank} indices, got {len(idx)}")
        return self.array[tuple(_idx(i) - 1 for i in idx)]

    def items(self) -> Iterable[tuple[tuple[int, ...], Scalar]]:
        for idx in itertools.product(FRAME_INDICES, repeat=self.rank):
            yield idx, self.at(*idx)

    def to_float(self) -> "Tensor4":
        return Tensor4(np.asarray(self.array, dtype=float), self.upper)

    @staticmethod
    def from_function(rank: int, fn, upper: tuple[bool, ...] | None = None) -> "Tensor4":
        arr = np.empty((4,) * rank, dtype=object)
        for idx in itertools.product(FRAME_INDICES, repeat=rank):
            arr[tuple(i - 1 for i in idx)] = Fraction(fn(*idx))
        return Tensor4(arr, upper)


METRIC = Tensor4.from_function(2, metric_component)
INVERSE_METRIC = Tensor4.from_function(2, inverse_metric_component, (True, True))
EPSILON4 = Tensor4.from_function(4, epsilon4)

# Float copies for the numeric oracles.
G = np.asarray(METRIC.array, dtype=float)
G_INV = np.asarray(INVERSE_METRIC.array, dtype=float)
EPS4 = np.asarray(EPSILON4.array, dtype=float)
EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def contract(t1: Tensor4, t2: Tensor4, pairs: Sequence[tuple[int, int]]) -> Tensor4:
    """Contract slot pairs of t1 and t2.

    An upper slot meets a lower one directly; two lower slots are linked by
    g^{mn} and two upper slots by g_{mn}.  Free slots of t1 come first, then
    those of t2, each in original order.
    """
    s1 = [p[0] for p in pairs]
    s2 = [p[1] for p in pairs]
    for s, t in ((s1, t1), (s2, t2)):
        if any(not 0 <= x < t.rank for x in s):
            raise FrameError(f"slot out of range for rank {t.rank}: {s}")
        if len(set(s)) != len(s):
            raise FrameError(f"overlapping slots in {list(pairs)}")
    exact = t1.exact and t2.exact
    gi = INVERSE_METRIC.array if exact else G_INV
    g = METRIC.array if exact else G
    a = t1.array if exact else np.asarray(t1.array, dtype=float)
    b = t2.array if exact else np.asarray(t2.array, dtype=float)
    # Flip the variance of t1's slot whenever it matches t2's, keeping order.
    for x, y in pairs:
        if t1.upper[x] == t2.upper[y]:
            link = g if t1.upper[x] else gi
            a = np.moveaxis(np.tensordot(a, link, axes=([x], [0])), -1, x)
    out = np.tensordot(a, b, axes=(s1, s2)) if pairs else np.multiply.outer(a, b)
    upper = tuple(u for i, u in enumerate(t1.upper) if i not in s1)
    upper += tuple(u for i, u in enumerate(t2.upper) if i not in s2)
    return Tensor4(np.asarray(out, dtype=object if exact else float), upper)
