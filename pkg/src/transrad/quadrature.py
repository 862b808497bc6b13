"""Gaussian-type quadrature primitives aligned to wave-packet envelopes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import roots_genlaguerre

# refinement levels used by the adaptive integrator
GAUSSIAN_ORDERS = (6, 10, 16, 24, 32, 48)
TWISTED_ORDERS = ((8, 8, 6), (12, 12, 10), (16, 16, 16), (24, 24, 24), (32, 32, 32), (40, 48, 40))


@dataclass(frozen=True)
class MomentumRule:
    """Nodes p_i and weights w_i with sum_i w_i F(p_i) ~ integral c(p) F(p) dp."""

    nodes: np.ndarray  # (M, 3)
    weights: np.ndarray  # (M,)

    @property
    def size(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=64)
def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[F(x)], x ~ N(0, 1)."""
    x, w = hermegauss(n)
    return x, w / math.sqrt(2 * math.pi)


@lru_cache(maxsize=64)
def gauss_laguerre(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[F(u)], u ~ Gamma(alpha + 1, 1)."""
    u, w = roots_genlaguerre(n, alpha)
    return u, w / math.gamma(alpha + 1)


def product_normal_rule(orders) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule for a standard normal vector, one order per axis."""
    xs, ws = zip(*(gauss_hermite(int(n)) for n in orders))
    grids = np.meshgrid(*xs, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for axis, w in enumerate(ws):
        shape = [1] * len(orders)
        shape[axis] = len(w)
        wgrid = wgrid * w.reshape(shape)
    return np.stack([g.ravel() for g in grids], axis=-1), wgrid.ravel()


def oscillation_frame(freqs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal frame whose axes follow the dominant oscillation directions,
    and the largest frequency component along each axis."""
    freqs = np.atleast_2d(freqs)
    if freqs.size == 0 or not np.any(freqs):
        return np.eye(3), np.zeros(3)
    _, _, vt = np.linalg.svd(freqs)
    comps = np.abs(freqs @ vt.T).max(axis=0)
    return vt.T, comps


MAX_AXIS_ORDER = 160


def extra_order(omega: float) -> int:
    """Additional Gauss-Hermite nodes needed to resolve exp(i omega x)."""
    return min(int(math.ceil(0.6 * omega * omega)), MAX_AXIS_ORDER)


def rule_ladder(packet):
    """Sequence of increasingly fine rules for an adaptive integration."""
    for level in range(packet.quadrature_levels()):
        yield packet.quadrature_rule(level)
