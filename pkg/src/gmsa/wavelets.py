"""Haar multiresolution analysis on the unit cube.

Vertices ``e`` of ``{0, 1}**d`` are handled as bit masks: bit ``i`` of the
mask is ``e_i``, the generator (0 = scaling function, 1 = mother wavelet)
used along axis ``i``.  Coefficient blocks are stored per level as arrays of
shape ``(2**j,) * d + (2**d,)`` indexed by cube index and vertex mask.  Slot 0
holds the scaling coefficient at level 0 and is identically zero above it.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .dyadic import J_MAX, DyadicCube, locate_indices, root
from .errors import DomainError, LevelError

__all__ = [
    "CoeffBlock",
    "CoeffTree",
    "DyadicStep",
    "WaveletAtom",
    "WaveletSystem",
    "decompose",
    "detail_Qj",
    "eval_atom",
    "haar_analysis",
    "project_Pj",
    "sign_table",
    "vertex_mask",
    "vertex_tuple",
]

SQRT1_2 = 1.0 / math.sqrt(2.0)


def vertex_mask(e) -> int:
    return sum(int(b) << i for i, b in enumerate(e))


def vertex_tuple(mask: int, dim: int) -> tuple[int, ...]:
    return tuple((mask >> i) & 1 for i in range(dim))


def sign_table(dim: int) -> np.ndarray:
    """``S[c, e] = (-1)**popcount(c & e)``.

    ``c`` encodes which half of the cube the point occupies along each axis
    (bit set = upper half); ``e`` is the vertex mask.
    """
    n = 1 << dim
    c = np.arange(n)[:, None]
    e = np.arange(n)[None, :]
    pop = np.zeros((n, n), dtype=np.int64)
    v = c & e
    for i in range(dim):
        pop += (v >> i) & 1
    return np.where(pop % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class WaveletSystem:
    """Tensor-product wavelet system generated by a refinable function.

    Only ``kind="haar"`` is implemented; ``mask`` is the two-scale sequence
    ``h`` of the scaling function.
    """

    dim: int
    kind: str = "haar"
    mask: tuple[float, ...] = (SQRT1_2, SQRT1_2)

    def __post_init__(self):
        if self.kind != "haar":
            raise NotImplementedError(f"wavelet family {self.kind!r} is not implemented")
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    @staticmethod
    def scaling(u):
        u = np.asarray(u, dtype=float)
        return ((u >= 0.0) & (u < 1.0)).astype(float)

    @staticmethod
    def wavelet(u):
        u = np.asarray(u, dtype=float)
        return ((u >= 0.0) & (u < 0.5)).astype(float) - ((u >= 0.5) & (u < 1.0)).astype(float)

    def refine_scaling(self, u):
        """Right-hand side of the two-scale relation evaluated at ``u``."""
        return math.sqrt(2.0) * sum(h * self.scaling(2.0 * np.asarray(u) - k) for k, h in enumerate(self.mask))

    @property
    def vertices(self) -> list[tuple[int, ...]]:
        """All of ``E = {0, 1}**d`` in mask order."""
        return [vertex_tuple(m, self.dim) for m in range(1 << self.dim)]

    @property
    def nonzero_vertices(self) -> list[tuple[int, ...]]:
        return self.vertices[1:]


@dataclass(frozen=True)
class WaveletAtom:
    """The normalized function ``2**(j*d/2) * psi^e(2**j x - k)``."""

    cube: DyadicCube
    vertex: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.vertex, tuple):
            object.__setattr__(self, "vertex", tuple(int(v) for v in self.vertex))
        if len(self.vertex) != self.cube.dim or any(v not in (0, 1) for v in self.vertex):
            raise ValueError(f"vertex {self.vertex} invalid for dimension {self.cube.dim}")
        if self.cube.level >= 1 and not any(self.vertex):
            raise ValueError("scaling atoms only exist at level 0")

    @property
    def mask(self) -> int:
        return vertex_mask(self.vertex)

    @property
    def level(self) -> int:
        return self.cube.level

    @property
    def scale(self) -> float:
        return 2.0 ** (self.cube.level * self.cube.dim / 2.0)

    def __call__(self, x) -> float:
        return eval_atom(self, x)

    def __repr__(self):
        return f"WaveletAtom({self.cube!r}, e={self.vertex})"


def eval_atom(atom: WaveletAtom, x) -> float:
    """Value of ``atom`` at the point ``x``; zero off the atom's cube."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise DomainError(f"point {x} is outside the unit cube")
    j = atom.cube.level
    if tuple(locate_indices(x, j)) != atom.cube.index:
        return 0.0
    upper = locate_indices(x, j + 1) & 1
    sign = 1.0
    for e_i, b_i in zip(atom.vertex, upper):
        if e_i and b_i:
            sign = -sign
    return atom.scale * sign


@dataclass(frozen=True)
class CoeffBlock:
    """Coefficients ``c_I^e`` of one cube, keyed by vertex tuple."""

    cube: DyadicCube
    coefficients: dict

    @property
    def block_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.coefficients.values()))


def _level_shape(level: int, dim: int) -> tuple[int, ...]:
    return (1 << level,) * dim + (1 << dim,)


@dataclass
class CoeffTree:
    """Wavelet expansion of a function truncated to levels ``< max_level``."""

    dim: int
    levels: list[np.ndarray]
    _norms: list[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for j, arr in enumerate(self.levels):
            if arr.shape != _level_shape(j, self.dim):
                raise ValueError(f"level {j} has shape {arr.shape}, expected {_level_shape(j, self.dim)}")
            if j > 0 and np.any(arr[..., 0] != 0.0):
                raise ValueError("scaling coefficients are only allowed at level 0")

    @classmethod
    def zeros(cls, dim: int, max_level: int) -> "CoeffTree":
        if max_level > J_MAX:
            raise LevelError(f"max level {max_level} exceeds J_MAX={J_MAX}")
        return cls(dim, [np.zeros(_level_shape(j, dim)) for j in range(max_level)])

    @property
    def max_level(self) -> int:
        return len(self.levels)

    @property
    def scaling_coefficient(self) -> float:
        return float(self.levels[0][(0,) * self.dim + (0,)])

    def block_norms(self, level: int) -> np.ndarray:
        """Array of block norms at ``level``, shape ``(2**level,) * d``.

        At level 0 the norm includes the scaling coefficient.
        """
        if self._norms is None:
            self._norms = [np.sqrt(np.sum(a * a, axis=-1)) for a in self.levels]
        return self._norms[level]

    def wavelet_energy(self, level: int) -> np.ndarray:
        """Per-cube sum of squared non-scaling coefficients."""
        a = self.levels[level][..., 1:]
        return np.sum(a * a, axis=-1)

    def block(self, cube: DyadicCube) -> CoeffBlock:
        if cube.dim != self.dim or cube.level >= self.max_level:
            raise KeyError(cube)
        row = self.levels[cube.level][cube.index]
        first = 0 if cube.level == 0 else 1
        coeffs = {vertex_tuple(m, self.dim): float(row[m]) for m in range(first, 1 << self.dim)}
        return CoeffBlock(cube, coeffs)

    def __getitem__(self, cube: DyadicCube) -> CoeffBlock:
        return self.block(cube)

    def cubes(self, level: int) -> Iterator[DyadicCube]:
        for k in np.ndindex(*(1 << level,) * self.dim):
            yield DyadicCube(level, tuple(int(i) for i in k))

    def blocks(self) -> Iterator[CoeffBlock]:
        for j in range(self.max_level):
            for cube in self.cubes(j):
                yield self.block(cube)

    def atoms(self) -> Iterator[tuple[WaveletAtom, float]]:
        for blk in self.blocks():
            for e, c in blk.coefficients.items():
                yield WaveletAtom(blk.cube, e), c

    def n_atoms(self) -> int:
        """Number of non-scaling atoms in the expansion."""
        return ((1 << self.dim) - 1) * sum(1 << (j * self.dim) for j in range(self.max_level))

    def total_energy(self) -> float:
        """``||P_J f||**2`` by Parseval."""
        return float(sum(np.sum(a * a) for a in self.levels))

    def evaluate(self, x, upto: int | None = None, masks=None, levels=None) -> np.ndarray | float:
        """Sum of blocks at ``x``.

        ``upto`` restricts to levels below it, ``levels`` to an explicit list.
        ``masks[j]`` (boolean, shape ``(2**j,) * d``) keeps only selected cubes.
        """
        if levels is None:
            upto = self.max_level if upto is None else upto
            levels = range(upto)
        X = np.asarray(x, dtype=float)
        single = X.ndim <= 1
        X = X.reshape(-1, self.dim)
        if np.any((X < 0.0) | (X > 1.0)):
            raise DomainError("evaluation points must lie in the unit cube")
        signs = sign_table(self.dim)
        weights = 1 << np.arange(self.dim)
        out = np.zeros(len(X))
        for j in levels:
            K = tuple(locate_indices(X, j).T)
            c = (locate_indices(X, j + 1) & 1) @ weights
            rows = self.levels[j][K]
            vals = np.einsum("ne,ne->n", rows, signs[c]) * 2.0 ** (j * self.dim / 2.0)
            if masks is not None:
                vals = np.where(masks[j][K], vals, 0.0)
            out += vals
        return float(out[0]) if single else out

    def to_text(self) -> str:
        """One line per coefficient: ``j k_1 .. k_d e_1 .. e_d coeff``."""
        lines = []
        for blk in self.blocks():
            for e, c in blk.coefficients.items():
                fields = [str(blk.cube.level), *map(str, blk.cube.index), *map(str, e), format(c, ".17g")]
                lines.append(" ".join(fields))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CoeffTree":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise ValueError("empty coefficient file")
        width = len(rows[0])
        if (width - 2) % 2 or width < 4:
            raise ValueError(f"malformed line: {' '.join(rows[0])}")
        dim = (width - 2) // 2
        max_level = max(int(r[0]) for r in rows) + 1
        tree = cls.zeros(dim, max_level)
        for r in rows:
            if len(r) != width:
                raise ValueError(f"malformed line: {' '.join(r)}")
            j = int(r[0])
            k = tuple(int(v) for v in r[1 : 1 + dim])
            e = [int(v) for v in r[1 + dim : 1 + 2 * dim]]
            tree.levels[j][k + (vertex_mask(e),)] = float(r[-1])
        return tree


class DyadicStep:
    """Function that is constant on each cell of the level-``L`` dyadic grid."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        level = n.bit_length() - 1
        if n != 1 << level or any(s != n for s in values.shape):
            raise ValueError("values must have shape (2**L,) * d")
        self.values = values
        self.level = level
        self.dim = values.ndim

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return self.values[tuple(locate_indices(X, self.level).T)]

    def cell_averages(self, level: int) -> np.ndarray:
        v = self.values
        if level >= self.level:
            r = 1 << (level - self.level)
            for axis in range(self.dim):
                v = np.repeat(v, r, axis=axis)
            return v
        return _coarsen(v, self.level - level)


def _coarsen(a: np.ndarray, steps: int) -> np.ndarray:
    """Average ``a`` over blocks of ``2**steps`` cells along every axis."""
    d = a.ndim
    for _ in range(steps):
        n = a.shape[0] // 2
        a = a.reshape(sum(((n, 2) for _ in range(d)), ())).mean(axis=tuple(range(1, 2 * d, 2)))
    return a


def haar_analysis(averages: np.ndarray) -> list[np.ndarray]:
    """Exact Haar coefficients of the piecewise-constant function with the
    given level-``J`` cell averages.  Returns the level arrays ``0..J-1``.
    """
    a = np.asarray(averages, dtype=float)
    d = a.ndim
    J = a.shape[0].bit_length() - 1
    signs = sign_table(d)
    # child offset mask for each position of the flattened 2**d block
    offs = np.array([sum(((p >> (d - 1 - i)) & 1) << i for i in range(d)) for p in range(1 << d)])
    levels: list[np.ndarray] = [None] * J
    for j in range(J - 1, -1, -1):
        n = 1 << j
        blocks = a.reshape(sum(((n, 2) for _ in range(d)), ()))
        order = tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2))
        blocks = blocks.transpose(order).reshape((n,) * d + (1 << d,))
        # S[..., e] = sum over children c of a_c * (-1)**popcount(c & e)
        sums = blocks @ signs[offs]
        coef = sums * (2.0 ** (j * d / 2.0) * 2.0 ** (-(j + 1) * d))
        a = sums[..., 0] / (1 << d)
        coef[..., 0] = 0.0
        levels[j] = coef
    levels[0][(0,) * d + (0,)] = float(a.reshape(-1)[0])
    return levels


def _midpoint_averages(f: Callable, dim: int, level: int, extra: int) -> np.ndarray:
    """Level-``level`` cell averages of ``f`` by the composite midpoint rule
    on the level-``level + extra`` grid.  ``f`` maps an ``(n, d)`` array of
    points to ``n`` values."""
    n_fine = 1 << (level + extra)
    mids = (np.arange(n_fine) + 0.5) / n_fine
    sub = 1 << extra
    if dim == 1:
        vals = np.asarray(f(mids[:, None]), dtype=float).reshape(n_fine)
        return vals.reshape(-1, sub).mean(axis=1)
    n = 1 << level
    out = np.empty((n,) * dim)
    for i in range(n):
        rows = mids[i * sub : (i + 1) * sub]
        grids = np.meshgrid(rows, *([mids] * (dim - 1)), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=1)
        vals = np.asarray(f(pts), dtype=float).reshape((sub,) + (n_fine,) * (dim - 1))
        out[i] = _coarsen_rest(vals, extra)
    return out


def _coarsen_rest(vals: np.ndarray, extra: int) -> np.ndarray:
    # first axis collapses fully; the rest average over 2**extra blocks
    v = vals.mean(axis=0)
    if v.ndim == 0:
        return v
    return _coarsen(v, extra)


def decompose(f, J: int, Q: int = 4, dim: int | None = None) -> CoeffTree:
    """Blocks ``A_I(f)`` for all cubes of levels ``0..J-1``.

    If ``f`` provides ``cell_averages(level)`` (exact cell means, e.g. a
    :class:`DyadicStep`), the coefficients are exact.  Otherwise ``f`` is a
    vectorized callable on ``(n, d)`` point arrays and the cell means come
    from midpoint quadrature on the ``2**(J+Q)`` grid, which is exact for
    steps on any dyadic grid of level ``<= J+Q``.
    """
    if J > J_MAX:
        raise LevelError(f"J={J} exceeds J_MAX={J_MAX}")
    if J < 1:
        raise ValueError("J must be at least 1")
    if hasattr(f, "cell_averages"):
        averages = np.asarray(f.cell_averages(J), dtype=float)
        dim = averages.ndim
    else:
        if dim is None:
            dim = getattr(f, "dim", 1)
        averages = _midpoint_averages(f, dim, J, Q)
    return CoeffTree(dim, haar_analysis(averages))


def project_Pj(coeffs: CoeffTree, j: int, x):
    """``P_j f(x)``: scaling part plus all wavelet blocks of levels ``< j``."""
    if j > coeffs.max_level:
        raise LevelError(f"level {j} exceeds the expansion depth {coeffs.max_level}")
    if j == 0:
        X = np.asarray(x, dtype=float)
        if np.any((X < 0.0) | (X > 1.0)):
            raise DomainError("evaluation points must lie in the unit cube")
        n = 1 if X.ndim <= 1 else len(X)
        val = np.full(n, coeffs.scaling_coefficient)
        return float(val[0]) if X.ndim <= 1 else val
    return coeffs.evaluate(x, upto=j)


def detail_Qj(coeffs: CoeffTree, j: int, x):
    """``Q_j f(x) = P_{j+1} f(x) - P_j f(x)``: the level-``j`` wavelet blocks."""
    if j + 1 > coeffs.max_level:
        raise LevelError(f"level {j + 1} exceeds the expansion depth {coeffs.max_level}")
    val = coeffs.evaluate(x, levels=[j])
    if j == 0:
        return val - coeffs.scaling_coefficient
    return val
