"""Tree-structured thresholding of wavelet expansions.

Given a :class:`~gmsa.wavelets.CoeffTree`, :func:`threshold` collects the
cubes of level ``>= 1`` whose block norm reaches ``eta`` and closes them
under parents.  The resulting tree approximant keeps the full level-0 block,
so constants are always reproduced.  All errors are computed from the
coefficients (Parseval), relative to the level-``J`` truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube, ProperTree
from .wavelets import CoeffTree, WaveletAtom, vertex_tuple

__all__ = [
    "ThresholdResult",
    "besov_quasinorm",
    "best_m_term",
    "reconstruct_S",
    "term_count",
    "threshold",
    "tree_error",
    "tree_quasinorm_estimate",
]


@dataclass
class ThresholdResult:
    eta: float
    lambda_set: frozenset
    tree: ProperTree
    masks: list = field(repr=False, compare=False)

    @property
    def n_terms(self) -> int:
        """Number of cubes ``N = #T(f, eta)``."""
        return len(self.tree)

    def to_text(self, coeffs: CoeffTree) -> str:
        """Header ``eta=<v> N=<n>`` followed by the tree's coefficient lines."""
        lines = [f"eta={format(self.eta, '.17g')} N={self.n_terms}"]
        for cube in self.tree:
            blk = coeffs.block(cube)
            for e, c in blk.coefficients.items():
                lines.append(" ".join([str(cube.level), *map(str, cube.index), *map(str, e), format(c, ".17g")]))
        return "\n".join(lines) + "\n"


def _masks_to_cubes(masks) -> set[DyadicCube]:
    out = set()
    for j, m in enumerate(masks):
        for k in np.argwhere(m):
            out.add(DyadicCube(j, tuple(int(i) for i in k)))
    return out


def _close_upward(masks: list[np.ndarray], dim: int) -> None:
    for j in range(len(masks) - 1, 0, -1):
        m = masks[j]
        n = m.shape[0] // 2
        anyc = m.reshape(sum(((n, 2) for _ in range(dim)), ())).any(axis=tuple(range(1, 2 * dim, 2)))
        masks[j - 1] |= anyc


def threshold(coeffs: CoeffTree, eta: float, children_augmented: bool = False) -> ThresholdResult:
    """``Lambda(f, eta)`` and the smallest proper tree containing it.

    With ``children_augmented`` the children of every member of ``Lambda``
    are added as well (the recursive-subdivision reading), where the
    expansion depth allows.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    d = coeffs.dim
    lam = [np.zeros((1,) * d, dtype=bool)]
    lam += [coeffs.block_norms(j) >= eta for j in range(1, coeffs.max_level)]
    masks = [m.copy() for m in lam]
    masks[0][...] = True
    if children_augmented:
        for j in range(1, coeffs.max_level - 1):
            up = lam[j]
            for axis in range(d):
                up = np.repeat(up, 2, axis=axis)
            masks[j + 1] |= up
        # the root's children enter only through Lambda members at level 1
    _close_upward(masks, d)
    cubes = _masks_to_cubes(masks)
    return ThresholdResult(
        eta=float(eta),
        lambda_set=frozenset(_masks_to_cubes(lam)),
        tree=ProperTree(cubes, d),
        masks=masks,
    )


def reconstruct_S(coeffs: CoeffTree, result: ThresholdResult, x):
    """Evaluate ``S(f, eta) = sum of A_I(f) over I in T(f, eta)`` at ``x``."""
    return coeffs.evaluate(x, masks=result.masks)


def tree_error(coeffs: CoeffTree, result: ThresholdResult) -> float:
    """``||P_J f - S(f, eta)||`` from the energy of blocks outside the tree."""
    total = 0.0
    for j in range(1, coeffs.max_level):
        e = coeffs.block_norms(j) ** 2
        total += float(np.sum(e[~result.masks[j]]))
    return math.sqrt(total)


def term_count(result: ThresholdResult) -> int:
    """Non-scaling atoms used by the tree approximant: ``(2**d - 1) * N``."""
    return ((1 << result.tree.dim) - 1) * result.n_terms


def best_m_term(coeffs: CoeffTree, m: int) -> tuple[frozenset, float]:
    """Keep the scaling term plus the ``m`` largest non-scaling coefficients.

    Returns the selected atoms and the L2 error by Parseval.  Ties are broken
    by level, then index, then vertex.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    d = coeffs.dim
    vals, lev, idx, vtx = [], [], [], []
    for j, arr in enumerate(coeffs.levels):
        sub = arr[..., 1:]
        n_e = sub.shape[-1]
        flat = sub.reshape(-1, n_e)
        ks = np.array(list(np.ndindex(*(1 << j,) * d)), dtype=np.int64).reshape(-1, d)
        vals.append(flat.reshape(-1))
        lev.append(np.full(flat.size, j))
        idx.append(np.repeat(ks, n_e, axis=0))
        vtx.append(np.tile(np.arange(1, n_e + 1), len(ks)))
    vals = np.concatenate(vals)
    lev = np.concatenate(lev)
    idx = np.concatenate(idx)
    vtx = np.concatenate(vtx)
    keys = [vtx] + [idx[:, i] for i in range(d - 1, -1, -1)] + [lev, -np.abs(vals)]
    order = np.lexsort(keys)
    chosen = order[:m]
    rest = order[m:]
    err = math.sqrt(float(np.sum(vals[rest] ** 2)))
    atoms = frozenset(
        WaveletAtom(DyadicCube(int(lev[i]), tuple(int(k) for k in idx[i])), vertex_tuple(int(vtx[i]), d))
        for i in chosen
    )
    return atoms, err


def tree_quasinorm_estimate(coeffs: CoeffTree, lam: float, eta_grid) -> float:
    """``max over the grid of eta**lam * #T(f, eta)``, a lower bound on the
    tree quasi-norm raised to ``lam``."""
    grid = np.asarray(list(eta_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty eta grid")
    if np.any(grid <= 0):
        raise ValueError("eta values must be positive")
    if not 0 < lam < 2:
        raise ValueError("lambda must lie in (0, 2)")
    return max(eta ** lam * threshold(coeffs, eta).n_terms for eta in grid)


def besov_quasinorm(coeffs: CoeffTree, s: float, q: float) -> float:
    """Level-weighted l_q norm of per-level wavelet energies, truncated at J.

    The scaling coefficient is excluded.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    total = 0.0
    for j in range(coeffs.max_level):
        energy = float(np.sum(coeffs.wavelet_energy(j)))
        total += 2.0 ** (j * s * q) * energy ** (q / 2.0)
    return total ** (1.0 / q)
