"""PSL2(C) acting on the unit sphere with its rotation-invariant probability measure m.

Points are unit 3-vectors.  Internally every point is lifted to a spinor
``w = (w1, w2)`` in C^2 with ``z = w1/w2`` its stereographic coordinate
(projection from the north pole, so the north pole is ``z = oo``).  The lift picks
the chart ``(x+iy, 1-Z)`` on the southern hemisphere and ``(1+Z, x-iy)`` on the
northern one, so nothing blows up near either pole.

In spinor form the Jacobian of ``g`` with respect to m is ``(|w|/|g w|)^4``,
which is what :func:`rn_derivative` evaluates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DET_TOL = 1e-12
ROTATION_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    """Unit-determinant 2x2 complex matrix, identified with its negative."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex).reshape(2, 2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) == 0:
            raise ValueError("singular matrix")
        if abs(det - 1) > DET_TOL:
            m = m / np.sqrt(det)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(np.eye(2, dtype=complex))

    @property
    def det(self) -> complex:
        m = self.m
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(self.m @ other.m)

    def inverse(self) -> "MoebiusMap":
        (a, b), (c, d) = self.m
        return MoebiusMap(np.array([[d, -b], [-c, a]]))

    def distance(self, other: "MoebiusMap") -> float:
        """Frobenius distance up to the sign ambiguity."""
        return float(min(np.linalg.norm(self.m - other.m), np.linalg.norm(self.m + other.m)))

    def to_reals(self) -> list[float]:
        flat = self.m.reshape(-1)
        return [float(v) for z in flat for v in (z.real, z.imag)]

    @classmethod
    def from_reals(cls, vals) -> "MoebiusMap":
        v = np.asarray(vals, dtype=float).reshape(4, 2)
        return cls((v[:, 0] + 1j * v[:, 1]).reshape(2, 2))

    def __repr__(self):
        return f"MoebiusMap({self.m.tolist()})"


def product(maps) -> MoebiusMap:
    """Ordered product of many maps.

    The running representative is rescaled to unit Frobenius norm after every factor
    and brought back to determinant 1 at the end.  Raises ValueError when the result
    is numerically rank one (norm beyond roughly exp(350)).
    """
    out = np.eye(2, dtype=complex)
    for g in maps:
        out = out @ g.m
        out /= np.sqrt((out.real ** 2 + out.imag ** 2).sum())
    det = out[0, 0] * out[1, 1] - out[0, 1] * out[1, 0]
    if not abs(det) > 1e-300:
        raise ValueError("product is numerically degenerate")
    return MoebiusMap(out / np.sqrt(det))


def scale_map(t: float, s: float = 0.0) -> MoebiusMap:
    """z -> exp(t/2 + i s) z, normalized so that log_nrn equals t."""
    h = 0.5 * (0.5 * t + 1j * s)
    return MoebiusMap(np.diag([np.exp(h), np.exp(-h)]))


@dataclass(frozen=True)
class SpherePoint:
    xyz: tuple[float, float, float]

    def __post_init__(self):
        v = np.asarray(self.xyz, dtype=float)
        n = np.linalg.norm(v)
        if abs(n - 1) > 1e-12:
            v = v / n
        object.__setattr__(self, "xyz", tuple(float(c) for c in v))

    @classmethod
    def from_complex(cls, z: complex) -> "SpherePoint":
        if np.isinf(z):
            return cls((0.0, 0.0, 1.0))
        return cls(tuple(from_spinor(np.array([[z, 1.0]]))[0]))

    def to_complex(self) -> complex:
        x, y, Z = self.xyz
        if Z == 1.0:
            return complex("inf")
        return complex(x, y) / (1 - Z)

    def array(self) -> np.ndarray:
        return np.array(self.xyz)


def _as_points(p) -> tuple[np.ndarray, bool]:
    if isinstance(p, SpherePoint):
        return p.array()[None, :], True
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def to_spinor(points: np.ndarray) -> np.ndarray:
    """Lift (..., 3) unit vectors to (..., 2) spinors, chart switched at the equator."""
    x, y, Z = points[..., 0], points[..., 1], points[..., 2]
    south = Z <= 0
    w = np.empty(points.shape[:-1] + (2,), dtype=complex)
    w[..., 0] = np.where(south, x + 1j * y, 1 + Z)
    w[..., 1] = np.where(south, 1 - Z, x - 1j * y)
    return w


def from_spinor(w: np.ndarray) -> np.ndarray:
    w1, w2 = w[..., 0], w[..., 1]
    n1, n2 = np.abs(w1) ** 2, np.abs(w2) ** 2
    s = n1 + n2
    c = w1 * np.conj(w2)
    out = np.stack([2 * c.real / s, 2 * c.imag / s, (n1 - n2) / s], axis=-1)
    return out


def act_spinor(m: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix (or a stack of them, one per spinor) to spinors."""
    if m.ndim == 2:
        return w @ m.T
    return np.einsum("...ij,...j->...i", m, w)


def apply(g: MoebiusMap, p):
    pts, single = _as_points(p)
    out = from_spinor(act_spinor(g.m, to_spinor(pts)))
    if isinstance(p, SpherePoint):
        return SpherePoint(tuple(out[0]))
    return out[0] if single else out


def _norm_ratio_sq(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    w = to_spinor(pts)
    gw = act_spinor(m, w)
    return np.sum(np.abs(gw) ** 2, axis=-1) / np.sum(np.abs(w) ** 2, axis=-1)


def rn_derivative(g: MoebiusMap, p):
    """d(g^-1_* m)/dm at p, i.e. |g'(z)|^2 (1+|z|^2)^2 / (1+|gz|^2)^2."""
    pts, single = _as_points(p)
    out = _norm_ratio_sq(g.m, pts) ** -2
    return float(out[0]) if single else out


def sigma0(g: MoebiusMap, p):
    """-log d(g^-1_* m)/dm at p; additive cocycle on G x S."""
    pts, single = _as_points(p)
    out = 2.0 * np.log(_norm_ratio_sq(g.m, pts))
    return float(out[0]) if single else out


def log_nrn(g: MoebiusMap) -> float:
    """log of sup |d g_* m/dm| = 4 log(top singular value)."""
    s = np.linalg.svd(g.m, compute_uv=False)
    t = 4.0 * float(np.log(s[0]))
    # rounding noise on a rotation
    return t if t > ROTATION_TOL else 0.0


def matrix_coefficient(g: MoebiusMap, grid, order: int = 2) -> float:
    """<pi(g) 1, 1> by quadrature of sqrt(d g^-1_* m/dm) over the cells of ``grid``.

    Each cell uses an ``order`` x ``order`` Gauss/midpoint rule; order 1 is the plain
    center rule.
    """
    if order == 1:
        return pairwise_mean(np.sqrt(rn_derivative(g, grid.centers)))
    pts, w = grid.subnodes(order)
    return float(np.sum(w * np.sqrt(rn_derivative(g, pts))))


def matrix_coefficient_exact(t: float) -> float:
    """Closed form (t/2)/sinh(t/2) for log_nrn = t."""
    if t == 0:
        return 1.0
    return float((t / 2) / np.sinh(t / 2))


def pairwise_mean(vals: np.ndarray) -> float:
    # numpy's sum is pairwise for contiguous float arrays
    return float(np.sum(np.ascontiguousarray(vals, dtype=float)) / vals.size)


def uniform_points(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_rotation_matrix2(rng: np.random.Generator) -> np.ndarray:
    """Haar-random SU(2) matrix."""
    q = rng.standard_normal(4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def random_moebius(rng: np.random.Generator, max_log_nrn: float = 2.0) -> MoebiusMap:
    """k1 . scale_map(t) . k2 with Haar k1, k2 and t uniform in [0, max_log_nrn]."""
    t = rng.uniform(0, max_log_nrn)
    k1, k2 = random_rotation_matrix2(rng), random_rotation_matrix2(rng)
    return MoebiusMap(k1 @ scale_map(t).m @ k2)


def is_rotation(g: MoebiusMap, tol: float = 1e-10) -> bool:
    return log_nrn(g) <= tol
