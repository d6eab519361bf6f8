"""Unit quaternions (SU(2)), conjugacy angles and class measures.

A unit quaternion ``q = cos T + sin T u`` has conjugacy angle ``T = theta(q)`` in
[0, pi] and acts on the sphere as the rotation by ``2T`` about ``u``.  Class
measures mu_phi are uniform on the conjugacy class of angle phi.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moebius import MoebiusMap

NORM_TOL = 1e-12
N_BINS = 4096


@dataclass(frozen=True)
class UnitQuaternion:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        v = np.array([self.a, self.b, self.c, self.d], dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero quaternion")
        if abs(n - 1) > NORM_TOL:
            v = v / n
        for name, x in zip("abcd", v):
            object.__setattr__(self, name, float(x))

    @classmethod
    def from_array(cls, v) -> "UnitQuaternion":
        return cls(*np.asarray(v, dtype=float))

    @classmethod
    def one(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        """Quaternion with conjugacy angle ``angle`` about ``axis`` (rotation by 2*angle)."""
        u = np.asarray(axis, dtype=float)
        u = u / np.linalg.norm(u)
        return cls(np.cos(angle), *(np.sin(angle) * u))

    def array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion.from_array(qmul(self.array(), other.array()))

    def inverse(self) -> "UnitQuaternion":
        return UnitQuaternion(self.a, -self.b, -self.c, -self.d)

    def conj_by(self, x: "UnitQuaternion") -> "UnitQuaternion":
        """x q x^-1."""
        return x * self * x.inverse()

    def to_moebius(self) -> MoebiusMap:
        return MoebiusMap(su2_matrix(self.array()))

    def to_rotation(self) -> np.ndarray:
        return rotation_matrix(self.array())

    def distance(self, other: "UnitQuaternion") -> float:
        return float(np.linalg.norm(self.array() - other.array()))


def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of (..., 4) arrays."""
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ], axis=-1)


def qconj(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def su2_matrix(q: np.ndarray) -> np.ndarray:
    """SU(2) matrix whose Moebius action on the sphere is ``rotation_matrix(q)``.

    With the stereographic chart of :mod:`plab.moebius` the quaternion axis
    (b, c, d) is the sphere axis (x, y, z).
    """
    a, b, c, d = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([a + 1j * d, 1j * b - c], axis=-1),
        np.stack([1j * b + c, a - 1j * d], axis=-1),
    ], axis=-2)


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    a, b, c, d = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([1 - 2 * (c * c + d * d), 2 * (b * c - a * d), 2 * (b * d + a * c)], axis=-1),
        np.stack([2 * (b * c + a * d), 1 - 2 * (b * b + d * d), 2 * (c * d - a * b)], axis=-1),
        np.stack([2 * (b * d - a * c), 2 * (c * d + a * b), 1 - 2 * (b * b + c * c)], axis=-1),
    ], axis=-2)


def theta(q) -> float | np.ndarray:
    """Conjugacy angle arccos(scalar part) in [0, pi]."""
    if isinstance(q, UnitQuaternion):
        return float(np.arccos(np.clip(q.a, -1.0, 1.0)))
    q = np.asarray(q, dtype=float)
    return np.arccos(np.clip(q[..., 0], -1.0, 1.0))


def bi_invariant_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """theta(p^-1 q) = arccos <p, q>."""
    return np.arccos(np.clip(np.sum(p * q, axis=-1), -1.0, 1.0))


# -- class densities ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClassDensity:
    """Density on [0, pi] sampled on a uniform angle grid (``bins + 1`` nodes).

    ``point`` marks a degenerate class measure (an atom at that angle); ``interval``
    with ``scale`` records the closed form sin(phi) * scale on the interval.
    """

    grid: np.ndarray
    values: np.ndarray
    point: float | None = None
    interval: tuple[float, float] | None = None
    scale: float | None = None

    def mass(self) -> float:
        if self.point is not None:
            return 1.0
        if self.interval is not None:
            lo, hi = self.interval
            return float(self.scale * (np.cos(lo) - np.cos(hi)))
        return float(np.trapezoid(self.values, self.grid))

    def cdf(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.point is not None:
            return (phi >= self.point).astype(float)
        if self.interval is not None:
            lo, hi = self.interval
            x = np.clip(phi, lo, hi)
            return self.scale * (np.cos(lo) - np.cos(x))
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (self.values[1:] + self.values[:-1])
                                               * np.diff(self.grid))])
        return np.interp(phi, self.grid, cum)

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.interval is not None:
            lo, hi = self.interval
            return np.where((phi >= lo) & (phi <= hi), self.scale * np.sin(phi), 0.0)
        return np.interp(phi, self.grid, self.values, left=0.0, right=0.0)


def angle_grid(bins: int = N_BINS) -> np.ndarray:
    return np.linspace(0.0, np.pi, bins + 1)


def _reflect(x: float) -> float:
    return float(np.arccos(np.cos(x)))


def class_convolve(alpha: float, beta: float, bins: int = N_BINS) -> ClassDensity:
    """Angle law of p q for p uniform in class alpha and q uniform in class beta."""
    if not (0 <= alpha <= np.pi and 0 <= beta <= np.pi):
        raise ValueError("angles must lie in [0, pi]")
    grid = angle_grid(bins)
    sa, sb = np.sin(alpha), np.sin(beta)
    if sa * sb < 1e-15:
        # one factor is central (+1 or -1)
        if sa < 1e-15:
            pt = beta if np.cos(alpha) > 0 else np.pi - beta
        else:
            pt = alpha if np.cos(beta) > 0 else np.pi - alpha
        vals = np.zeros_like(grid)
        vals[int(round(pt / np.pi * bins))] = bins / np.pi
        return ClassDensity(grid, vals, point=pt)
    lo, hi = sorted((_reflect(alpha - beta), _reflect(alpha + beta)))
    scale = 1.0 / (2 * sa * sb)
    vals = np.where((grid >= lo) & (grid <= hi), scale * np.sin(grid), 0.0)
    return ClassDensity(grid, vals, interval=(lo, hi), scale=scale)


def haar_angle(alpha: float) -> tuple[float, float]:
    """(Haar angle density 2 sin^2(alpha)/pi, Haar mass of {theta < alpha})."""
    if not 0 <= alpha <= np.pi:
        raise ValueError("alpha must lie in [0, pi]")
    return 2 * np.sin(alpha) ** 2 / np.pi, (alpha - np.sin(alpha) * np.cos(alpha)) / np.pi


def haar_angle_cdf(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return (phi - np.sin(phi) * np.cos(phi)) / np.pi


# -- samplers ----------------------------------------------------------------

def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_haar(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_class(rng: np.random.Generator, phi: float, n: int) -> np.ndarray:
    u = _unit_vectors(rng, n)
    return np.concatenate([np.full((n, 1), np.cos(phi)), np.sin(phi) * u], axis=1)


def _invert_haar_angle(target: np.ndarray, alpha: float) -> np.ndarray:
    # Newton on F(phi) = phi - sin(phi)cos(phi) = target, monotone on [0, alpha]
    phi = np.cbrt(1.5 * target).clip(0, alpha)
    for _ in range(60):
        f = phi - np.sin(phi) * np.cos(phi) - target
        fp = 2 * np.sin(phi) ** 2
        step = np.where(fp > 1e-300, f / np.maximum(fp, 1e-300), 0.0)
        phi = np.clip(phi - step, 0, alpha)
        if np.max(np.abs(step)) < 1e-15:
            break
    return phi


def sample_ball(rng: np.random.Generator, alpha: float, n: int) -> np.ndarray:
    """Haar conditioned on theta < alpha, by inverting the angle CDF."""
    top = alpha - np.sin(alpha) * np.cos(alpha)
    phi = _invert_haar_angle(rng.random(n) * top, alpha)
    phi = np.minimum(phi, np.nextafter(alpha, 0))
    u = _unit_vectors(rng, n)
    return np.concatenate([np.cos(phi)[:, None], np.sin(phi)[:, None] * u], axis=1)


def sample(mode: str, rng: np.random.Generator, n: int | None = None, param: float = 0.0):
    """Dispatch: ``haar``, ``class`` (angle ``param``) or ``ball`` (radius ``param``).

    Returns a UnitQuaternion when ``n`` is None, else an (n, 4) array.
    """
    m = 1 if n is None else n
    if mode == "haar":
        out = sample_haar(rng, m)
    elif mode == "class":
        if not 0 <= param <= np.pi:
            raise ValueError("class angle out of range")
        out = sample_class(rng, param, m)
    elif mode == "ball":
        if not 0 < param <= np.pi:
            raise ValueError("ball radius out of range")
        out = sample_ball(rng, param, m)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return UnitQuaternion.from_array(out[0]) if n is None else out


def separated_net(n: int, rng: np.random.Generator, oversample: int = 64) -> list[UnitQuaternion]:
    """Greedy farthest-point selection from ``oversample * n`` Haar candidates, seeded at 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chosen = [np.array([1.0, 0.0, 0.0, 0.0])]
    if n > 1:
        cand = sample_haar(rng, oversample * n)
        dmin = bi_invariant_distance(cand, chosen[0])
        for _ in range(n - 1):
            k = int(np.argmax(dmin))
            chosen.append(cand[k])
            dmin = np.minimum(dmin, bi_invariant_distance(cand, cand[k]))
    return [UnitQuaternion.from_array(v) for v in chosen]


def min_separation(net) -> float:
    arr = np.array([q.array() for q in net])
    if len(arr) < 2:
        return float("inf")
    g = np.clip(arr @ arr.T, -1, 1)
    np.fill_diagonal(g, -1.0)
    return float(np.arccos(g.max()))


# -- commutators -------------------------------------------------------------

def _align(v: np.ndarray, u: np.ndarray) -> UnitQuaternion:
    """Unit quaternion x with x v x^-1 = u for unit 3-vectors v, u."""
    dot = float(np.dot(v, u))
    if dot < -1 + 1e-12:
        perp = np.cross(v, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(v, [0.0, 1.0, 0.0])
        return UnitQuaternion(0.0, *(perp / np.linalg.norm(perp)))
    return UnitQuaternion(1 + dot, *np.cross(v, u))


def commutator(t: UnitQuaternion, r: UnitQuaternion) -> UnitQuaternion:
    return t * r * t.inverse() * r.inverse()


def solve_commutator(W: UnitQuaternion) -> tuple[UnitQuaternion, UnitQuaternion]:
    """(T, R) with T R T^-1 R^-1 = W, built in closed form."""
    th = theta(W)
    if th < 1e-15:
        return UnitQuaternion.one(), UnitQuaternion.one()
    T0 = UnitQuaternion(0.0, 1.0, 0.0, 0.0)
    R0 = UnitQuaternion(np.cos(th / 2), 0.0, np.sin(th / 2), 0.0)
    # [T0, R0] = cos th - sin th j
    vec = W.array()[1:]
    nv = np.linalg.norm(vec)
    if nv < 1e-15:
        return T0, R0
    x = _align(np.array([0.0, -1.0, 0.0]), vec / nv)
    T, R = T0.conj_by(x), R0.conj_by(x)
    return T, R
