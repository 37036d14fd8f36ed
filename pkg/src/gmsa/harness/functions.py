"""Synthetic test functions with closed-form cell averages.

Each function knows its exact mean over every dyadic cell, so its Haar
coefficients are exact at any depth.  ``slope_N`` is the expected log-log
slope of the tree-approximation error against the number of cubes, or
``None`` when the error is not a power of ``N``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..wavelets import CoeffTree

__all__ = ["SUITE", "SyntheticFunction", "get_function", "white_coefficients"]


@dataclass(frozen=True)
class SyntheticFunction:
    name: str
    dim: int
    pointwise: Callable
    primitive: Callable
    slope_N: float | None
    note: str = ""

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        out = np.ones(len(X))
        for i in range(self.dim):
            out *= self.pointwise(X[:, i])
        return out

    def cell_averages(self, level: int) -> np.ndarray:
        """Tensor product of exact one-dimensional cell means."""
        n = 1 << level
        edges = np.arange(n + 1) / n
        F = self.primitive(edges)
        avg = (F[1:] - F[:-1]) * n
        out = avg
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, avg)
        return out


def _const(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _const_F(t):
    return np.asarray(t, dtype=float)


def _step(t):
    return (np.asarray(t, dtype=float) < 1.0 / 3.0).astype(float)


def _step_F(t):
    return np.minimum(np.asarray(t, dtype=float), 1.0 / 3.0)


def _linear(t):
    return np.asarray(t, dtype=float)


def _linear_F(t):
    return 0.5 * np.asarray(t, dtype=float) ** 2


def _bump(t):
    u = np.asarray(t, dtype=float) - 0.5
    return np.maximum(0.0, 1.0 - 16.0 * u * u)


def _bump_F(t):
    u = np.clip(np.asarray(t, dtype=float) - 0.5, -0.25, 0.25)
    return u - 16.0 * u**3 / 3.0


SUITE: dict[str, SyntheticFunction] = {
    f.name: f
    for f in [
        SyntheticFunction("const", 1, _const, _const_F, None, "constant; zero error at every threshold"),
        SyntheticFunction("step1d", 1, _step, _step_F, None, "jump at 1/3; error decays exponentially in N"),
        SyntheticFunction("linear1d", 1, _linear, _linear_F, -1.0, "smooth; Haar saturates at s = 1"),
        SyntheticFunction("bump2d", 2, _bump, _bump_F, -0.5, "product of clipped quadratics; s = 1, d = 2"),
        SyntheticFunction("step2d", 2, _step, _step_F, -0.5, "tensor step; jump lines, s/d = 1/2"),
    ]
}


def get_function(name: str) -> SyntheticFunction:
    try:
        return SUITE[name]
    except KeyError:
        raise ValueError(f"unknown synthetic function {name!r}; choose from {', '.join(SUITE)}") from None


def white_coefficients(dim: int, J: int, norm: float = 1.0, seed: int = 0) -> CoeffTree:
    """Random coefficients with every block of levels ``1..J-1`` of norm ``norm``.

    The level-0 block holds a unit scaling coefficient only.
    """
    rng = np.random.default_rng(seed)
    levels = [np.zeros((1,) * dim + (1 << dim,))]
    levels[0][..., 0] = 1.0
    for j in range(1, J):
        arr = rng.standard_normal((1 << j,) * dim + (1 << dim,))
        arr[..., 0] = 0.0
        arr *= norm / np.sqrt(np.sum(arr**2, axis=-1, keepdims=True))
        levels.append(arr)
    return CoeffTree(dim, levels)
