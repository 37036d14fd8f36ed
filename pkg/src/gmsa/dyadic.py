"""Dyadic cubes of the unit cube and proper trees built from them.

A dyadic cube at level ``j`` with integer index ``k`` is the set
``2**-j * (k + [0, 1]**d)``.  Points are assigned to cubes with a half-open
convention, except that a coordinate equal to 1 belongs to the last cube
along its axis.  With this rule every point of ``[0, 1]**d`` lies in exactly
one cube per level.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LevelError, NoParentError

__all__ = [
    "J_MAX",
    "CubeSet",
    "DyadicCube",
    "ProperTree",
    "children",
    "complete_to_proper_tree",
    "locate",
    "locate_indices",
    "parent",
    "root",
]

#: Deepest supported level; keeps every index below ``2**24``.
J_MAX = 24

_LEVEL_BITS = 5
_DIM_BITS = 3
_INDEX_BITS = J_MAX


@dataclass(frozen=True, order=True)
class DyadicCube:
    """The cube ``2**-level * (index + [0, 1]**d)``."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.index, tuple):
            object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        if self.level > J_MAX:
            raise LevelError(f"level {self.level} exceeds J_MAX={J_MAX}")
        if not self.index:
            raise ValueError("a cube needs at least one dimension")
        n = 1 << self.level
        for k in self.index:
            if not 0 <= k < n:
                raise ValueError(f"index {self.index} out of range for level {self.level}")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.level * self.dim)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) * self.side

    @property
    def key(self) -> int:
        """Integer key packing ``(dim, level, index)``; unique per cube."""
        key = (self.dim - 1) | (self.level << _DIM_BITS)
        shift = _DIM_BITS + _LEVEL_BITS
        for k in self.index:
            key |= k << shift
            shift += _INDEX_BITS
        return key

    @classmethod
    def from_key(cls, key: int) -> "DyadicCube":
        dim = (key & ((1 << _DIM_BITS) - 1)) + 1
        level = (key >> _DIM_BITS) & ((1 << _LEVEL_BITS) - 1)
        shift = _DIM_BITS + _LEVEL_BITS
        mask = (1 << _INDEX_BITS) - 1
        index = tuple((key >> (shift + i * _INDEX_BITS)) & mask for i in range(dim))
        return cls(level, index)

    def contains(self, x) -> bool:
        """True if ``x`` is assigned to this cube by :func:`locate`."""
        return locate(x, self.level) == self

    def children(self) -> list["DyadicCube"]:
        return children(self)

    def parent(self) -> "DyadicCube":
        return parent(self)

    def __repr__(self):
        k = self.index[0] if self.dim == 1 else self.index
        return f"DyadicCube({self.level}, {k})"


def root(dim: int) -> DyadicCube:
    """The single level-0 cube ``[0, 1]**dim``."""
    return DyadicCube(0, (0,) * dim)


def children(cube: DyadicCube) -> list[DyadicCube]:
    """The ``2**d`` cubes at the next level whose union is ``cube``.

    Ordered lexicographically by index, so for ``d=2`` the child with
    offsets ``(b_1, b_2)`` sits at position ``2*b_1 + b_2``.
    """
    if cube.level >= J_MAX:
        raise LevelError(f"cube at level {cube.level} cannot be refined")
    base = [2 * k for k in cube.index]
    return [
        DyadicCube(cube.level + 1, tuple(b + o for b, o in zip(base, offs)))
        for offs in itertools.product((0, 1), repeat=cube.dim)
    ]


def parent(cube: DyadicCube) -> DyadicCube:
    if cube.level == 0:
        raise NoParentError("the root cube has no parent")
    return DyadicCube(cube.level - 1, tuple(k >> 1 for k in cube.index))


def locate_indices(x, level: int) -> np.ndarray:
    """Vectorized form of :func:`locate`: integer indices of shape ``x.shape``.

    ``x`` is an array whose last axis holds coordinates.  No domain check.
    """
    n = 1 << level
    k = np.floor(np.asarray(x, dtype=float) * n).astype(np.int64)
    return np.clip(k, 0, n - 1)


def locate(x, level: int) -> DyadicCube:
    """The level-``level`` cube containing the point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("locate expects a single point")
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise DomainError(f"point {x} is outside the unit cube")
    if level > J_MAX:
        raise LevelError(f"level {level} exceeds J_MAX={J_MAX}")
    return DyadicCube(level, tuple(int(k) for k in locate_indices(x, level)))


class CubeSet:
    """Cubes grouped by level: slot ``j`` holds members of ``D_j``."""

    def __init__(self, cubes: Iterable[DyadicCube] = ()):
        self._levels: dict[int, set[DyadicCube]] = {}
        for c in cubes:
            self.add(c)

    def add(self, cube: DyadicCube) -> None:
        self._levels.setdefault(cube.level, set()).add(cube)

    def __getitem__(self, level: int) -> set[DyadicCube]:
        return self._levels.get(level, set())

    def levels(self) -> list[int]:
        return sorted(j for j, s in self._levels.items() if s)

    def __iter__(self) -> Iterator[DyadicCube]:
        for j in self.levels():
            yield from sorted(self._levels[j])

    def __len__(self) -> int:
        return sum(len(s) for s in self._levels.values())


class ProperTree:
    """A set of dyadic cubes containing the root and closed under parents."""

    def __init__(self, nodes: Iterable[DyadicCube], dim: int):
        self.dim = dim
        self.nodes = frozenset(nodes)
        if root(dim) not in self.nodes:
            raise ValueError("a proper tree must contain the root cube")
        for c in self.nodes:
            if c.dim != dim:
                raise ValueError(f"cube {c} has dimension {c.dim}, expected {dim}")
            if c.level > 0 and parent(c) not in self.nodes:
                raise ValueError(f"parent of {c} missing from the tree")

    def __contains__(self, cube) -> bool:
        return cube in self.nodes

    def __iter__(self) -> Iterator[DyadicCube]:
        return iter(sorted(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        if isinstance(other, ProperTree):
            return self.dim == other.dim and self.nodes == other.nodes
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, self.nodes))

    def __le__(self, other: "ProperTree") -> bool:
        return self.nodes <= other.nodes

    def __repr__(self):
        return f"ProperTree(dim={self.dim}, size={len(self)}, depth={self.depth})"

    @property
    def depth(self) -> int:
        return max(c.level for c in self.nodes)

    def by_level(self) -> CubeSet:
        return CubeSet(self.nodes)

    def depth_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for c in self.nodes:
            hist[c.level] = hist.get(c.level, 0) + 1
        return dict(sorted(hist.items()))

    def leaves(self) -> list[DyadicCube]:
        """Nodes with no child in the tree."""
        has_child = {parent(c) for c in self.nodes if c.level > 0}
        return sorted(self.nodes - has_child)


def complete_to_proper_tree(cubes: Iterable[DyadicCube], dim: int | None = None) -> ProperTree:
    """Smallest proper tree containing ``cubes`` (ancestors plus the root)."""
    cubes = list(cubes)
    if dim is None:
        dim = cubes[0].dim if cubes else 1
    nodes = {root(dim)}
    for c in cubes:
        if c.dim != dim:
            raise ValueError(f"cube {c} has dimension {c.dim}, expected {dim}")
        while c not in nodes:
            nodes.add(c)
            if c.level == 0:
                break
            c = parent(c)
    return ProperTree(nodes, dim)
