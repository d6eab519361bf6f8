"""Equal-area sphere grids, the transfer-operator fixed point for stationary densities,
stationary sampling, and the weighted averaging operator norm."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .moebius import to_spinor, from_spinor, log_nrn
from .rng import make_rng, as_seed, chunks, pmap, CHUNK
from .words import FiniteGroupMeasure, MubarData

MATRIX_BUDGET = 20_000_000


class RegimeWarning(UserWarning):
    """alpha_rho is outside the range where the fixed point is certified."""


# -- grid --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Iso-latitude equal-area cells.  Ring k spans z in [z_edges[k+1], z_edges[k]]."""

    z_edges: np.ndarray
    ring_counts: np.ndarray
    centers: np.ndarray
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return len(self.centers)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Index of the cell containing each point."""
        pts = np.asarray(points, dtype=float)
        z = np.clip(pts[..., 2], -1.0, 1.0)
        k = np.searchsorted(-self.z_edges, -z, side="right") - 1
        k = np.clip(k, 0, len(self.ring_counts) - 1)
        nk = self.ring_counts[k]
        phi = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2 * np.pi)
        j = np.minimum((phi * nk / (2 * np.pi)).astype(np.int64), nk - 1)
        return self.offsets[k] + j

    def subnodes(self, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell tensor rule: ``order`` Gauss points in z times ``order`` midpoints in phi.

        Returns (points, weights) with weights summing to 1; cell c owns rows
        c*order^2 .. (c+1)*order^2 - 1.
        """
        g, gw = np.polynomial.legendre.leggauss(order)
        ring = np.repeat(np.arange(len(self.ring_counts)), self.ring_counts)
        zt, zb = self.z_edges[ring], self.z_edges[ring + 1]
        nk = self.ring_counts[ring]
        j = np.arange(self.n) - self.offsets[ring]
        zs = 0.5 * (zt + zb)[:, None] + 0.5 * (zt - zb)[:, None] * g[None, :]
        ph = 2 * np.pi * (j[:, None] + (np.arange(order)[None, :] + 0.5) / order) / nk[:, None]
        Z = np.repeat(zs, order, axis=1)
        P = np.tile(ph, (1, order))
        W = np.repeat(gw[None, :] / 2, order, axis=1) / order / self.n
        r = np.sqrt(np.clip(1 - Z ** 2, 0, None))
        pts = np.stack([r * np.cos(P), r * np.sin(P), Z], axis=-1).reshape(-1, 3)
        return pts, np.broadcast_to(W, Z.shape).reshape(-1)

    def max_area_ratio(self) -> float:
        areas = np.repeat(-np.diff(self.z_edges) / self.ring_counts, self.ring_counts)
        return float(areas.max() / areas.min())


def build_grid(R: int) -> SphereGrid:
    if R < 12:
        raise ValueError("grid needs at least 12 cells")
    N = int(R)
    nr = max(2, int(round(math.sqrt(math.pi * N / 4))))
    th = np.linspace(0, np.pi, nr + 1)
    frac = (np.cos(th[:-1]) - np.cos(th[1:])) / 2
    raw = frac * N
    counts = np.maximum(np.floor(raw).astype(np.int64), 1)
    diff = N - counts.sum()
    rem = raw - np.floor(raw)
    order = np.argsort(-rem, kind="stable")
    i = 0
    while diff != 0:
        k = order[i % nr]
        if diff > 0:
            counts[k] += 1
            diff -= 1
        elif counts[k] > 1:
            counts[k] -= 1
            diff += 1
        i += 1
    cum = np.concatenate([[0], np.cumsum(counts)])
    z_edges = 1 - 2 * cum / N
    z_edges[-1] = -1.0
    offsets = cum[:-1]
    ring = np.repeat(np.arange(nr), counts)
    j = np.arange(N) - offsets[ring]
    zc = 0.5 * (z_edges[ring] + z_edges[ring + 1])
    ph = 2 * np.pi * (j + 0.5) / counts[ring]
    rr = np.sqrt(np.clip(1 - zc ** 2, 0, None))
    centers = np.stack([rr * np.cos(ph), rr * np.sin(ph), zc], axis=1)
    for a in (z_edges, counts, centers, offsets):
        a.setflags(write=False)
    return SphereGrid(z_edges=z_edges, ring_counts=counts, centers=centers, offsets=offsets)


def product_centers(grid: SphereGrid, d: int) -> np.ndarray:
    """(N^d, d, 3) centers of the product grid in C-order."""
    idx = np.indices((grid.n,) * d).reshape(d, -1).T
    return grid.centers[idx]


# -- densities ---------------------------------------------------------------

@dataclass
class GridDensity:
    values: np.ndarray
    grid: SphereGrid
    d: int = 1

    @property
    def mass(self) -> float:
        return float(np.mean(self.values))

    def points(self) -> np.ndarray:
        return product_centers(self.grid, self.d) if self.d > 1 else self.grid.centers

    def cell_masses(self) -> np.ndarray:
        return self.values / len(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))

    def to_csv(self, path) -> None:
        if self.d != 1:
            raise ValueError("CSV export is for single-sphere densities")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "value"])
            for (x, y, z), v in zip(self.grid.centers, self.values):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(z)), repr(float(v))])


@dataclass
class FixedPointReport:
    density: GridDensity
    residual: float
    iterations: int
    contraction: float
    min_density: float
    converged: bool
    ratios: list[float] = field(default_factory=list)
    mass_defect: float = 0.0

    def to_dict(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations,
                "contraction": self.contraction, "min_density": self.min_density,
                "converged": self.converged, "mass_defect": self.mass_defect,
                "l2_norm": self.density.l2_norm(), "cells": len(self.density.values)}


# -- transfer operator -------------------------------------------------------

def _support_images(rho, mu: FiniteGroupMeasure):
    mats, w = rho.measure_images(mu)
    return mats, w


def _inv2(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def _push(m: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Image points m.x and the Jacobian d(m^-1_* m)/dm at x, for one 2x2 matrix."""
    w = to_spinor(pts)
    gw = w @ m.T
    ratio = np.sum(np.abs(gw) ** 2, -1) / np.sum(np.abs(w) ** 2, -1)
    return from_spinor(gw), ratio ** -2


def transfer_matrix(rho, mu: FiniteGroupMeasure, grid: SphereGrid, power: float = 1.0,
                    budget: int = MATRIX_BUDGET) -> sp.csr_matrix:
    """Sparse A with (A f)(x_c) = sum_g mu(g) J_{g^-1}(x_c)^power f(cell of g^-1 x_c).

    power = 1 gives the transfer operator T*; power = 1/2 gives P_mu.
    """
    mats, wts = _support_images(rho, mu)
    d = rho.d
    Nc = grid.n
    total = Nc ** d
    if total * len(wts) > budget:
        raise MemoryError(f"transfer matrix needs {total * len(wts)} entries, budget {budget}")
    rows, cols, vals = [], [], []
    base = np.arange(total)
    idx = np.indices((Nc,) * d).reshape(d, -1) if d > 1 else None
    for m, w in zip(mats, wts):
        tgt = np.zeros(total, dtype=np.int64)
        jac = np.ones(total)
        for j in range(d):
            pts = grid.centers if d == 1 else grid.centers[idx[j]]
            y, J = _push(_inv2(m[j]), pts)
            tgt = tgt * Nc + grid.lookup(y)
            jac *= J
        rows.append(base)
        cols.append(tgt)
        vals.append(w * jac ** power)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(total, total))
    A.sum_duplicates()
    return A


def _l2(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v ** 2)))


_GAP_CACHE: dict[bytes, float] = {}


def _rotation_gap(rho, lmax: int = 40) -> float:
    """kappa estimate of the generator images that are rotations (cached per set)."""
    from .harmonic import kappa_estimate
    from .quat import UnitQuaternion
    quats = []
    for maps in rho.images.values():
        m = maps[0].m
        if log_nrn(maps[0]) == 0.0:
            quats.append(UnitQuaternion(m[0, 0].real, m[1, 0].imag, m[1, 0].real, m[0, 0].imag))
    if not quats:
        return 0.0
    key = np.array([q.array() for q in quats]).tobytes() + bytes([lmax])
    if key not in _GAP_CACHE:
        _GAP_CACHE[key] = kappa_estimate(quats, lmax).kappa
    return _GAP_CACHE[key]


def regime_check(rho, mubar: MubarData) -> tuple[float, float]:
    """(alpha, C_sg * kappa); warns when alpha is not below the certified scale."""
    from .reps import alpha_of
    alpha = alpha_of(rho)
    limit = mubar.c_sg * _rotation_gap(rho) if rho.d == 1 else 0.0
    if alpha >= limit:
        warnings.warn(f"alpha = {alpha:.4g} >= C_sg kappa = {limit:.4g}; fixed point computed "
                      "outside the certified range", RegimeWarning, stacklevel=3)
    return alpha, limit


def transfer_fixed_point(rho, mubar: MubarData | FiniteGroupMeasure, grid: SphereGrid,
                         tol: float = 1e-10, max_iter: int = 5000, init: np.ndarray | None = None,
                         A: sp.csr_matrix | None = None) -> FixedPointReport:
    """Iterate phi <- T* phi / <T* phi, 1> from ``init`` (default: constant 1)."""
    measure = mubar.mubar if isinstance(mubar, MubarData) else mubar
    if isinstance(mubar, MubarData):
        regime_check(rho, mubar)
    if A is None:
        A = transfer_matrix(rho, measure, grid)
    n = A.shape[0]
    phi = np.ones(n) if init is None else np.asarray(init, dtype=float).copy()
    if np.any(phi < 0):
        raise ValueError("initial density must be nonnegative")
    phi /= phi.mean()
    ratios: list[float] = []
    prev_step = None
    residual = math.inf
    it = 0
    defect = 0.0
    for it in range(1, max_iter + 1):
        new = A @ phi
        defect = float(new.mean() - 1)
        new /= new.mean()
        step = new - phi
        residual = _l2(step)
        if prev_step is not None and prev_step > 1e-13:
            ratios.append(residual / prev_step)
        prev_step = residual
        phi = new
        if residual < tol:
            break
    tail = ratios[5:] if len(ratios) > 5 else ratios
    contraction = float(max(tail)) if tail else 0.0
    dens = GridDensity(phi, grid, rho.d)
    return FixedPointReport(density=dens, residual=residual, iterations=it,
                            contraction=contraction, min_density=float(phi.min()),
                            converged=residual < tol, ratios=ratios, mass_defect=defect)


def pushforward_mass(rho, mu: FiniteGroupMeasure, grid: SphereGrid) -> float:
    """Mean of T* 1 (one unrenormalized transfer step applied to the constant)."""
    return float((transfer_matrix(rho, mu, grid) @ np.ones(grid.n ** rho.d)).mean())


# -- sampling ----------------------------------------------------------------

def _chain_chunk(mats, cdf, d, burn_in, size, rng):
    w1, w2 = to_spinor(_uniform(rng, size * d)).reshape(size, d, 2).transpose(2, 0, 1)
    a, b = mats[:, :, 0, 0], mats[:, :, 0, 1]
    c, e = mats[:, :, 1, 0], mats[:, :, 1, 1]
    for _ in range(burn_in):
        k = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(cdf) - 1)
        n1 = a[k] * w1 + b[k] * w2
        n2 = c[k] * w1 + e[k] * w2
        s = 1.0 / np.sqrt(n1.real ** 2 + n1.imag ** 2 + n2.real ** 2 + n2.imag ** 2)
        w1, w2 = n1 * s, n2 * s
    return from_spinor(np.stack([w1, w2], -1))


def _uniform(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_stationary(rho, mu: FiniteGroupMeasure, burn_in: int, count: int, rng,
                      chunk: int = CHUNK) -> np.ndarray:
    """(count, d, 3) approximate draws from the mu-stationary measure.

    Each draw runs ``burn_in`` steps of xi <- rho(g) xi from a uniform start; this has
    the law of rho(g_1 ... g_B) xi_0.  Chunk i uses stream (seed, i).
    """
    if burn_in < 1:
        raise ValueError("burn_in must be >= 1")
    mats, wts = _support_images(rho, mu)
    cdf = np.cumsum(wts)
    cdf[-1] = 1.0
    seed = as_seed(rng)
    parts = pmap(lambda c: _chain_chunk(mats, cdf, rho.d, burn_in, c[1], make_rng(seed, (c[0],))),
                 chunks(count, chunk))
    return np.concatenate(parts, axis=0) if parts else np.empty((0, rho.d, 3))


def empirical_cell_masses(samples: np.ndarray, grid: SphereGrid) -> np.ndarray:
    d = samples.shape[1]
    idx = np.zeros(len(samples), dtype=np.int64)
    for j in range(d):
        idx = idx * grid.n + grid.lookup(samples[:, j])
    return np.bincount(idx, minlength=grid.n ** d) / len(samples)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def coarse_masses(masses: np.ndarray, grid: SphereGrid, coarse: SphereGrid) -> np.ndarray:
    """Aggregate fine-cell masses onto a coarser grid by cell center."""
    idx = coarse.lookup(grid.centers)
    return np.bincount(idx, weights=masses, minlength=coarse.n)


# -- weighted averaging operator ---------------------------------------------

def weighted_p_norm(rho, mubar: MubarData | FiniteGroupMeasure, grid: SphereGrid | None = None,
                    method: str = "galerkin", lmax: int = 8, tol: float = 1e-10,
                    max_iter: int = 20000) -> float:
    """||P_mu|| for (P f)(x) = sum_g mu(g) J_{g^-1}(x)^(1/2) f(g^-1 x) on L^2(m).

    ``galerkin``: largest singular value of the compression to real harmonics of degree
    <= lmax (accurate quadrature, converges from below).  ``grid``: power iteration on
    A^T A for the nearest-cell discretization on ``grid``.
    """
    measure = mubar.mubar if isinstance(mubar, MubarData) else mubar
    if method == "galerkin":
        return _galerkin_norm(rho, measure, lmax)
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    if grid is None:
        raise ValueError("grid method needs a grid")
    A = transfer_matrix(rho, measure, grid, power=0.5)
    v = np.ones(A.shape[0])
    lam = 0.0
    AT = A.T.tocsr()
    for _ in range(max_iter):
        u = AT @ (A @ v)
        new = float(np.linalg.norm(u))
        v = u / new
        if abs(new - lam) < tol * new:
            lam = new
            break
        lam = new
    else:
        raise RuntimeError("power iteration did not settle")
    return math.sqrt(lam)


def _galerkin_norm(rho, measure: FiniteGroupMeasure, lmax: int) -> float:
    from .harmonic import real_sph_harm, sphere_quadrature
    if rho.d != 1:
        raise ValueError("galerkin norm is implemented for one factor")
    pts, wq = sphere_quadrature(2 * lmax + 24)
    Y = real_sph_harm(lmax, pts)
    mats, wts = _support_images(rho, measure)
    M = np.zeros((Y.shape[1], Y.shape[1]))
    for m, w in zip(mats, wts):
        y, J = _push(_inv2(m[0]), pts)
        M += w * (Y * (wq * np.sqrt(J))[:, None]).T @ real_sph_harm(lmax, y)
    return float(np.linalg.norm(M, 2))
