"""Samplers for the limit distributions of the normalized MLE residuals.

Closed-form regimes draw directly from Gaussian / Cauchy-type expressions;
functional regimes simulate standard Brownian motion on a fine grid over
[0, 1] and evaluate the required path functionals (dt-integrals by
trapezoid, stochastic integrals by left-point Ito sums).

Draws are returned jointly as (l1, l2): wherever the theory couples the two
coordinates (one limit a fixed negative multiple of the other, or both built
from one Brownian path), the stored pair satisfies the coupling exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .model import ModelParams, Regime, RegimeKind, RootPair

__all__ = [
    "BrownianFunctionals",
    "LimitSampleSet",
    "brownian_functionals",
    "sample_limit",
]

MIN_FUNCTIONAL_GRID = 1000
_CHUNK_ELEMENTS = 2**22

_FUNCTIONAL_REGIMES = frozenset({
    RegimeKind.LARGER_ROOT_ZERO,
    RegimeKind.SMALLER_ROOT_ZERO,
    RegimeKind.ZERO_DOUBLE,
    RegimeKind.HARMONIC,
})

_SIGMA_DEPENDENT = frozenset({
    RegimeKind.DISTINCT_POSITIVE,
    RegimeKind.POSITIVE_DOUBLE,
    RegimeKind.UNSTABLE_OSCILLATION,
})


@dataclass(frozen=True)
class BrownianFunctionals:
    """Functionals of BM on [0, 1]; arrays of shape (n_draws,).

    z1 = int w, z2 = int w^2, z3 = int (int_0^t w)^2 dt.  With a second
    independent BM: levy = int w1 dw2 - int w2 dw1, q11 = int w1 dw1 +
    int w2 dw2, s2 = int (w1^2 + w2^2) dt.
    """

    w1_end: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    w2_end: np.ndarray | None = None
    levy: np.ndarray | None = None
    q11: np.ndarray | None = None
    s2: np.ndarray | None = None


@dataclass(frozen=True)
class LimitSampleSet:
    """Joint draws (l1, l2) from the limit law of one regime.

    grid_n is 0 for closed-form regimes.
    """

    l1: np.ndarray
    l2: np.ndarray
    regime: RegimeKind
    grid_n: int
    seed: int


def _one_bm_chunk(gen: np.random.Generator, n_draws: int, grid_n: int):
    dt = 1.0 / grid_n
    dw = gen.standard_normal((n_draws, grid_n))
    dw *= math.sqrt(dt)
    w = np.empty((n_draws, grid_n + 1))
    w[:, 0] = 0.0
    np.cumsum(dw, axis=1, out=w[:, 1:])
    return w, dw, dt


def _trapezoid_dot(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return values @ weights


def brownian_functionals(grid_n: int, seed: int, two_bm: bool = False,
                         n_draws: int = 1) -> BrownianFunctionals:
    """Simulate the Brownian functionals on a grid of grid_n steps."""
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    dt = 1.0 / grid_n
    trapw = np.full(grid_n + 1, dt)
    trapw[0] = trapw[-1] = dt / 2.0
    chunk = max(1, _CHUNK_ELEMENTS // (grid_n + 1))
    parts = []
    for chunk_index, start in enumerate(range(0, n_draws, chunk)):
        m = min(chunk, n_draws - start)
        gen = rng.stream(seed, rng.DOMAIN_LIMIT, chunk_index)
        w, dw, _ = _one_bm_chunk(gen, m, grid_n)
        z1 = _trapezoid_dot(w, trapw)
        wsq = w * w
        z2 = _trapezoid_dot(wsq, trapw)
        # inner = cumulative trapezoid of w, then z3 = trapezoid of inner^2;
        # buffers reused to keep the traffic down at large grids
        inner = wsq  # reuse allocation
        np.add(w[:, :-1], w[:, 1:], out=inner[:, 1:])
        inner[:, 0] = 0.0
        np.cumsum(inner[:, 1:], axis=1, out=inner[:, 1:])
        inner *= dt / 2.0
        z3 = _trapezoid_dot(inner * inner, trapw)
        fields = dict(w1_end=w[:, -1].copy(), z1=z1, z2=z2, z3=z3)
        if two_bm:
            w2, dw2, _ = _one_bm_chunk(gen, m, grid_n)
            fields["w2_end"] = w2[:, -1].copy()
            fields["levy"] = (np.einsum("ij,ij->i", w[:, :-1], dw2)
                              - np.einsum("ij,ij->i", w2[:, :-1], dw))
            fields["q11"] = (np.einsum("ij,ij->i", w[:, :-1], dw)
                             + np.einsum("ij,ij->i", w2[:, :-1], dw2))
            fields["s2"] = z2 + _trapezoid_dot(w2 * w2, trapw)
        parts.append(fields)
    merged = {
        key: np.concatenate([p[key] for p in parts])
        for key in parts[0]
    }
    return BrownianFunctionals(**merged)


def _cauchy_offset(roots: RootPair, params: ModelParams, q: float) -> float:
    if params.sigma == 0.0:
        raise ValueError("sigma = 0: the Cauchy-type limit offset c is undefined")
    p = roots.p.real
    return math.sqrt(2.0 * q) * (params.dx0 - p * params.x0) / params.sigma


def _unstable_oscillation(roots: RootPair, params: ModelParams, n: int,
                          horizon: float, gen: np.random.Generator):
    """Limit of e^(lam T)(theta_hat - theta) at the phase set by the horizon.

    Draws the terminal-mode Gaussian pair (u_c, u_s) (means from the initial
    conditions) and the phase-locked pair (h_c, h_s), then applies
    sigma * Psi~^(-1) [[1,0],[lam,nu]] [[-u_s,u_c],[u_c,u_s]] (h_c,h_s)^T,
    where Psi~ is the asymptotic e^(-2 lam T) Psi_T template.  The o(1)
    terms of the (h_c, h_s) covariance are dropped.
    """
    lam, nu, sig = roots.lam, roots.nu, params.sigma
    if sig == 0.0:
        raise ValueError("sigma = 0: unstable-oscillation limit is degenerate")
    phi = math.atan2(nu, lam)
    psi_phase = 2.0 * nu * horizon - phi
    s2l = lam * lam + nu * nu
    kap = lam / math.sqrt(s2l)
    sc2 = (1.0 + kap * math.cos(psi_phase)) / (4.0 * lam)
    ss2 = (1.0 - kap * math.cos(psi_phase)) / (4.0 * lam)
    scs = math.sin(psi_phase) / (4.0 * math.sqrt(s2l))
    cov_h = np.array([[sc2, scs], [scs, ss2]])
    cov_u = (sig**2 / nu**2) * np.array([
        [1.0 / (4.0 * lam) + lam / (4.0 * s2l), nu / (4.0 * s2l)],
        [nu / (4.0 * s2l), 1.0 / (4.0 * lam) - lam / (4.0 * s2l)],
    ])
    mean_u = np.array([(params.dx0 - lam * params.x0) / nu, -params.x0])
    hc, hs = np.linalg.cholesky(cov_h) @ gen.standard_normal((2, n))
    uc, us = mean_u[:, None] + np.linalg.cholesky(cov_u) @ gen.standard_normal((2, n))

    a = uc**2 * ss2 - 2.0 * uc * us * scs + us**2 * sc2
    xy = uc * us * (ss2 - sc2) + (uc**2 - us**2) * scs
    yy = us**2 * ss2 + 2.0 * uc * us * scs + uc**2 * sc2
    p11 = a
    p12 = lam * a + nu * xy
    p22 = lam * lam * a + 2.0 * lam * nu * xy + nu * nu * yy
    det = p11 * p22 - p12 * p12
    r1 = -us * hc + uc * hs
    r2 = lam * r1 + nu * (uc * hc + us * hs)
    l2 = sig * (p22 * r1 - p12 * r2) / det
    l1 = sig * (-p12 * r1 + p11 * r2) / det
    return l1, l2


def sample_limit(regime: Regime, roots: RootPair, params: ModelParams, n: int,
                 grid_n: int = 10_000, seed: int = 0,
                 horizon: float | None = None) -> LimitSampleSet:
    """Draw n joint samples (l1, l2) from the regime's limit law.

    l1 is the limit of v1(T)(theta1_hat - theta1), l2 of
    v2(T)(theta2_hat - theta2).  horizon is required only for
    UnstableOscillation, whose limit depends on the phase 2*nu*T.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    kind = regime.tag
    if kind in _FUNCTIONAL_REGIMES and grid_n < MIN_FUNCTIONAL_GRID:
        raise ValueError(
            f"grid_n >= {MIN_FUNCTIONAL_GRID} required for functional regime {kind.value}"
        )
    if kind in _SIGMA_DEPENDENT and params.sigma == 0.0:
        raise ValueError(f"sigma = 0: limit law of {kind.value} undefined")
    gen = rng.stream(seed, rng.DOMAIN_LIMIT, 2**40)  # scalar draws; BM uses its own streams
    used_grid = grid_n if kind in _FUNCTIONAL_REGIMES else 0

    if kind is RegimeKind.ERGODIC:
        t1, t2 = roots.theta1, roots.theta2
        l1 = math.sqrt(2.0) * abs(t1) * gen.standard_normal(n)
        l2 = math.sqrt(2.0 * abs(t2)) * abs(t1) * gen.standard_normal(n)
    elif kind is RegimeKind.OPPOSITE_SIGN:
        p, q = roots.p.real, roots.q.real
        l1 = math.sqrt(2.0) * abs(q) * gen.standard_normal(n)
        l2 = -p * l1
    elif kind is RegimeKind.DISTINCT_POSITIVE:
        p, q = roots.p.real, roots.q.real
        c = _cauchy_offset(roots, params, q)
        eta, xi = gen.standard_normal((2, n))
        l1 = (2.0 * (p + q) * q / (p - q)) * eta / (xi + c)
        l2 = -p * l1
    elif kind is RegimeKind.POSITIVE_DOUBLE:
        q = (roots.p.real + roots.q.real) / 2.0
        c = _cauchy_offset(roots, params, q)
        eta, xi = gen.standard_normal((2, n))
        # Coefficient 4q: the e^{qT}/(qT) normalization picks up a same-order
        # correction to T*(eta_{q,1}-eta_{q,2}) that halves the variance.
        l1 = 4.0 * q * eta / (xi + c)
        l2 = -q * l1
    elif kind is RegimeKind.LARGER_ROOT_ZERO:
        t1 = roots.theta1
        fn = brownian_functionals(grid_n, seed, n_draws=n)
        l1 = math.sqrt(2.0) * abs(t1) * gen.standard_normal(n)
        l2 = abs(t1) * (fn.w1_end**2 - 1.0) / (2.0 * fn.z2)
    elif kind is RegimeKind.SMALLER_ROOT_ZERO:
        t1 = roots.theta1
        fn = brownian_functionals(grid_n, seed, n_draws=n)
        l1 = t1 * (fn.w1_end**2 - 1.0) / (2.0 * fn.z2)
        l2 = -l1
    elif kind is RegimeKind.ZERO_DOUBLE:
        fn = brownian_functionals(grid_n, seed, n_draws=n)
        w1 = fn.w1_end
        den = 4.0 * fn.z2 * fn.z3 - fn.z1**4
        l1 = (2.0 * fn.z3 * (w1**2 - 1.0) - 2.0 * fn.z1**2 * (w1 * fn.z1 - fn.z2)) / den
        l2 = (4.0 * fn.z2 * (w1 * fn.z1 - fn.z2) - fn.z1**2 * (w1**2 - 1.0)) / den
    elif kind is RegimeKind.HARMONIC:
        nu = roots.nu
        fn = brownian_functionals(grid_n, seed, two_bm=True, n_draws=n)
        # Numerator orientation (w1^2 + w2^2 - 2): follows from the proof-level
        # limits of int X'dW and int X'^2 dt; the theorem display has it flipped.
        l1 = (fn.w1_end**2 + fn.w2_end**2 - 2.0) / fn.s2
        l2 = 2.0 * nu * fn.levy / fn.s2
    elif kind is RegimeKind.UNSTABLE_OSCILLATION:
        if horizon is None:
            raise ValueError("horizon (phase) required for UnstableOscillation")
        l1, l2 = _unstable_oscillation(roots, params, n, horizon, gen)
    else:  # pragma: no cover
        raise ValueError(f"unknown regime {kind}")

    return LimitSampleSet(l1=np.asarray(l1, dtype=float), l2=np.asarray(l2, dtype=float),
                          regime=kind, grid_n=used_grid, seed=seed)
