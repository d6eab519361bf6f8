"""Furstenberg entropy of sphere boundaries: Monte Carlo and quadrature estimators, the
bound chain, product additivity, continuity sweeps and realization by bisection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .moebius import to_spinor
from .reps import alpha_of
from .rng import make_rng, as_seed, chunks, pmap, CHUNK
from .stationary import GridDensity, SphereGrid, _chain_chunk, weighted_p_norm
from .words import FiniteGroupMeasure, MubarData, moments, avez_sequence

BURN_IN = 200


@dataclass
class EntropyEstimate:
    value: float
    stderr: float
    samples: int
    seed: int | None
    method: str
    note: str = ""

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.value - k * self.stderr, self.value + k * self.stderr

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BoundsReport:
    alpha: float
    L: float
    upper: float
    spectral_lower: float
    p_norm: float
    f_prime_1: float
    avez_upper: float
    avez_n: int
    h: EntropyEstimate
    params: dict = field(default_factory=dict)

    def checks(self, k: float = 3.0) -> dict[str, bool]:
        h, s = self.h.value, self.h.stderr
        return {
            "nonnegative": h + k * s >= 0,
            "upper": h <= self.upper + k * s,
            "spectral_lower": self.spectral_lower - k * s <= h,
            "avez": h <= self.avez_upper + k * s,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checks"] = self.checks()
        return d


def _sigma_stack(mats: np.ndarray, w1: np.ndarray, w2: np.ndarray, k: np.ndarray,
                 mask: np.ndarray) -> np.ndarray:
    """sum over masked factors of sigma0(rho_j(g_k), xi_j) from unit spinors (size, d)."""
    a, b = mats[k, :, 0, 0], mats[k, :, 0, 1]
    c, e = mats[k, :, 1, 0], mats[k, :, 1, 1]
    n1 = a * w1 + b * w2
    n2 = c * w1 + e * w2
    ratio = (np.abs(n1) ** 2 + np.abs(n2) ** 2) / (np.abs(w1) ** 2 + np.abs(w2) ** 2)
    return (2.0 * np.log(ratio) * mask[None, :]).sum(axis=1)


def _mc_chunk(mats, cdf, d, burn_in, size, rng, mask):
    pts = _chain_chunk(mats, cdf, d, burn_in, size, rng)
    w = to_spinor(pts)
    k = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(cdf) - 1)
    s = _sigma_stack(mats, w[..., 0], w[..., 1], k, mask)
    return float(s.sum()), float((s ** 2).sum()), size


def _mc(rho, mu, samples, burn_in, rng, mask, chunk=CHUNK) -> EntropyEstimate:
    if samples < 2:
        raise ValueError("need at least 2 samples")
    mats, wts = rho.measure_images(mu)
    cdf = np.cumsum(wts)
    cdf[-1] = 1.0
    seed = as_seed(rng)
    parts = pmap(lambda c: _mc_chunk(mats, cdf, rho.d, burn_in, c[1], make_rng(seed, (c[0],)), mask),
                 chunks(samples, chunk))
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(0.0, (s2 - samples * mean ** 2) / (samples - 1))
    return EntropyEstimate(mean, math.sqrt(var / samples), samples, seed, "mc",
                           note=f"burn_in={burn_in}")


def entropy_mc(rho, mu: FiniteGroupMeasure, samples: int, burn_in: int = BURN_IN, rng=0,
               chunk: int = CHUNK) -> EntropyEstimate:
    """Mean of sigma0(rho(g), xi), g ~ mu and xi ~ nu independent; summed over factors."""
    mask = np.ones(rho.d)
    if alpha_of(rho) == 0.0:
        return EntropyEstimate(0.0, 0.0, samples, as_seed(rng), "mc", note="rotation image")
    return _mc(rho, mu, samples, burn_in, rng, mask, chunk)


def cube_entropy(rho, mu: FiniteGroupMeasure, mask, samples: int, rng=0,
                 burn_in: int = BURN_IN) -> EntropyEstimate:
    """Entropy of the coordinate-subset quotient selected by ``mask`` in {0,1}^d."""
    mask = np.asarray(mask, dtype=float)
    if mask.shape != (rho.d,) or np.any((mask != 0) & (mask != 1)):
        raise ValueError("mask must be a 0/1 vector of length d")
    if not mask.any():
        return EntropyEstimate(0.0, 0.0, samples, None, "mc", note="empty mask")
    return _mc(rho, mu, samples, burn_in, rng, mask)


def entropy_quadrature(rho, mu: FiniteGroupMeasure, density: GridDensity) -> EntropyEstimate:
    """sum_g mu(g) sum_c sigma0(rho(g), x_c) phi_c w_c against a solved grid density."""
    if density.d != rho.d:
        raise ValueError("density and representation have different factor counts")
    if alpha_of(rho) == 0.0:
        return EntropyEstimate(0.0, 0.0, len(density.values), None, "quadrature",
                               note="rotation image")
    mats, wts = rho.measure_images(mu)
    pts = density.points()
    if rho.d == 1:
        pts = pts[:, None, :]
    w = to_spinor(pts)
    w1, w2 = w[..., 0], w[..., 1]
    phi = density.values / len(density.values)
    mask = np.ones(rho.d)
    h = 0.0
    for k, p in enumerate(wts):
        sig = _sigma_stack(mats, w1, w2, np.full(len(pts), k), mask)
        h += p * float(np.dot(sig, phi))
    return EntropyEstimate(h, 0.0, len(phi), None, "quadrature",
                           note=f"nearest-cell density on {len(phi)} cells")


def spectral_lower_bound(rho, mubar: MubarData, grid: SphereGrid | None = None,
                         method: str = "galerkin", **kw) -> float:
    """2 (1 - ||P_mubar||) / F'(1), clamped at 0."""
    pn = weighted_p_norm(rho, mubar, grid, method=method, **kw)
    return max(0.0, 2.0 * (1.0 - pn) / mubar.f_prime_1)


def bounds_report(rho, mu: FiniteGroupMeasure, mubar: MubarData, samples: int, rng=0,
                  burn_in: int = BURN_IN, avez_n: int = 4, lmax: int = 8,
                  h: EntropyEstimate | None = None) -> BoundsReport:
    alpha = alpha_of(rho)
    L = moments(mu, 0.0)[0]
    pn = weighted_p_norm(rho, mubar, method="galerkin", lmax=lmax)
    lower = max(0.0, 2.0 * (1.0 - pn) / mubar.f_prime_1)
    av = min(avez_sequence(mu, avez_n))
    if h is None:
        h = entropy_mc(rho, mu, samples, burn_in, rng)
    return BoundsReport(alpha=alpha, L=L, upper=L * alpha, spectral_lower=lower, p_norm=pn,
                        f_prime_1=mubar.f_prime_1, avez_upper=av, avez_n=avez_n, h=h,
                        params={"samples": samples, "burn_in": burn_in, "lmax": lmax})


# -- sweeps and realization --------------------------------------------------

@dataclass
class SweepRow:
    r: float
    h: float
    stderr: float
    lower: float
    upper: float


def continuity_sweep(family, mu: FiniteGroupMeasure, mubar: MubarData, rs, samples: int,
                     rng=0, burn_in: int = BURN_IN, lmax: int = 8):
    """Entropy along r with bounds; returns rows and adjacent-step diagnostic flags."""
    seed = as_seed(rng)
    L = moments(mu, 0.0)[0]
    rows = []
    for i, r in enumerate(rs):
        rho = family(r)
        h = entropy_mc(rho, mu, samples, burn_in, make_rng(seed, (10_000 + i,)))
        lower = spectral_lower_bound(rho, mubar, lmax=lmax)
        rows.append(SweepRow(float(r), h.value, h.stderr, lower, L * alpha_of(rho)))
    flags = []
    for a, b in zip(rows, rows[1:]):
        allowed = 5 * L * abs(b.r - a.r) + 3 * (a.stderr + b.stderr)
        flags.append(abs(b.h - a.h) > allowed)
    return rows, flags


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "h", "stderr", "lower", "upper"])
        for row in rows:
            w.writerow([repr(row.r), repr(row.h), repr(row.stderr), repr(row.lower), repr(row.upper)])


class RangeError(ValueError):
    pass


@dataclass
class RealizeResult:
    r: float
    estimate: EntropyEstimate
    steps: int
    h_max: EntropyEstimate
    history: list = field(default_factory=list)


def realize_entropy(family, mu: FiniteGroupMeasure, target: float, tol: float, rng=0,
                    r_max: float = 1.0, samples: int = 1 << 16, max_samples: int = 1 << 21,
                    max_steps: int = 25, burn_in: int = BURN_IN,
                    h_max: EntropyEstimate | None = None) -> RealizeResult:
    """Bisection on r in (0, r_max] for h(r) = target.

    A bracket move is made only when the 3-sigma interval excludes the target; otherwise
    the sample size doubles.  Stops once |h - t| <= tol, or |h - t| <= tol + 3 sigma at
    the sample cap.
    """
    seed = as_seed(rng)
    if h_max is None:
        h_max = entropy_mc(family(r_max), mu, samples, burn_in, make_rng(seed, (0,)))
    if target <= 0:
        raise RangeError("target must be positive")
    if target >= h_max.value - 3 * h_max.stderr:
        raise RangeError(f"target {target} not below h(r_max) = {h_max.value:.6g} "
                         f"+- {h_max.stderr:.2g} at r_max = {r_max}")
    lo, hi = 0.0, r_max
    history = []
    n = samples
    est = None
    r = 0.5 * (lo + hi)
    for step in range(1, max_steps + 1):
        while True:
            est = entropy_mc(family(r), mu, n, burn_in, make_rng(seed, (step, n)))
            history.append((r, est.value, est.stderr, n))
            lo_ci, hi_ci = est.interval()
            if abs(est.value - target) <= tol:
                return RealizeResult(r, est, step, h_max, history)
            if target < lo_ci or target > hi_ci:
                break
            if 2 * n > max_samples:
                if abs(est.value - target) <= tol + 3 * est.stderr:
                    return RealizeResult(r, est, step, h_max, history)
                break
            n *= 2
        if est.value > target:
            hi = r
        else:
            lo = r
        r = 0.5 * (lo + hi)
    raise RuntimeError(f"no convergence in {max_steps} bisection steps; last r = {r}")
