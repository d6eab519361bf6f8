"""Rotation blocks on spherical harmonics, spectral gaps of rotation sets, and
class-operator norms on SU(2) and its small powers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y, comb

from .quat import UnitQuaternion, qmul, qconj, rotation_matrix, su2_matrix, theta, sample_haar

L_CAP = 60


# -- real spherical harmonics ------------------------------------------------

def real_sph_harm(lmax: int, points: np.ndarray) -> np.ndarray:
    """Orthonormal (w.r.t. the probability measure m) real harmonics, shape (n, (lmax+1)^2).

    Column ``l*l + l + m`` holds Y_lm; Y_{l,1} is proportional to +x and Y_{l,-1} to +y.
    """
    pts = np.asarray(points, dtype=float)
    polar = np.arccos(np.clip(pts[:, 2], -1, 1))
    azim = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.empty((len(pts), (lmax + 1) ** 2))
    norm = np.sqrt(4 * np.pi)
    for l in range(lmax + 1):
        for m in range(0, l + 1):
            y = sph_harm_y(l, m, polar, azim) * norm
            if m == 0:
                out[:, l * l + l] = y.real
            else:
                s = math.sqrt(2) * (-1) ** m
                out[:, l * l + l + m] = s * y.real
                out[:, l * l + l - m] = s * y.imag
    return out


# -- Wigner blocks in the real basis -----------------------------------------

def _block1(R: np.ndarray) -> np.ndarray:
    perm = [1, 2, 0]  # m = -1, 0, 1  <->  y, z, x
    return R[np.ix_(perm, perm)]


def _next_block(R1: np.ndarray, prev: np.ndarray, l: int) -> np.ndarray:
    # Ivanic-Ruedenberg recursion (with the published corrections)
    lp = l - 1
    ms = np.arange(-l, l + 1)
    m, mp = np.meshgrid(ms, ms, indexing="ij")
    am = np.abs(m)
    d0 = (m == 0).astype(float)
    denom = np.where(np.abs(mp) < l, (l + mp) * (l - mp), (2 * l) * (2 * l - 1)).astype(float)
    u = np.sqrt((l + m) * (l - m) / denom)
    v = 0.5 * np.sqrt((1 + d0) * (l + am - 1) * (l + am) / denom) * (1 - 2 * d0)
    w = -0.5 * np.sqrt(np.clip((l - am - 1) * (l - am), 0, None) / denom) * (1 - d0)

    def R1e(i, j):
        return R1[i + 1, j + 1]

    def Rp(a, b):
        ok = (np.abs(a) <= lp) & (np.abs(b) <= lp)
        return np.where(ok, prev[np.clip(a, -lp, lp) + lp, np.clip(b, -lp, lp) + lp], 0.0)

    def P(i, a, b):
        top = R1e(i, 1) * Rp(a, lp) - R1e(i, -1) * Rp(a, -lp)
        bot = R1e(i, 1) * Rp(a, -lp) + R1e(i, -1) * Rp(a, lp)
        mid = R1e(i, 0) * Rp(a, b)
        return np.where(b == l, top, np.where(b == -l, bot, mid))

    U = P(0, m, mp)
    d1, dm1 = (m == 1).astype(float), (m == -1).astype(float)
    V = np.where(
        m == 0, P(1, 1 + 0 * m, mp) + P(-1, -1 + 0 * m, mp),
        np.where(
            m > 0,
            P(1, m - 1, mp) * np.sqrt(1 + d1) - P(-1, -m + 1, mp) * (1 - d1),
            P(1, m + 1, mp) * (1 - dm1) + P(-1, -m - 1, mp) * np.sqrt(1 + dm1),
        ),
    )
    W = np.where(
        m == 0, 0.0,
        np.where(m > 0, P(1, m + 1, mp) + P(-1, -m - 1, mp),
                 P(1, m - 1, mp) - P(-1, -m + 1, mp)),
    )
    return u * U + v * V + w * W


def wigner_blocks(q: UnitQuaternion | np.ndarray, lmax: int) -> list[np.ndarray]:
    """Real orthogonal blocks D^0..D^lmax of the rotation of ``q``.

    Convention: Y(R x) = D Y(x) for the column vector Y of degree-l real harmonics.
    """
    if lmax > L_CAP:
        raise ValueError(f"degree {lmax} above cap {L_CAP}")
    if lmax < 0:
        raise ValueError("degree must be >= 0")
    qa = q.array() if isinstance(q, UnitQuaternion) else np.asarray(q, dtype=float)
    R = rotation_matrix(qa)
    blocks = [np.ones((1, 1))]
    if lmax >= 1:
        R1 = _block1(R)
        blocks.append(R1)
        for l in range(2, lmax + 1):
            blocks.append(_next_block(R1, blocks[-1], l))
    return blocks


def wigner_block(l: int, q) -> np.ndarray:
    return wigner_blocks(q, l)[l]


def real_to_complex(l: int) -> np.ndarray:
    """Unitary C with Y^complex = C Y^real (Condon-Shortley phases)."""
    n = 2 * l + 1
    C = np.zeros((n, n), dtype=complex)
    s2 = 1 / math.sqrt(2)
    C[l, l] = 1.0
    for m in range(1, l + 1):
        # Y_l^m = (-1)^m (Y_{l,m} + i Y_{l,-m}) / sqrt 2 ; Y_l^-m = (Y_{l,m} - i Y_{l,-m}) / sqrt 2
        C[l + m, l + m] = (-1) ** m * s2
        C[l + m, l - m] = 1j * (-1) ** m * s2
        C[l - m, l + m] = s2
        C[l - m, l - m] = -1j * s2
    return C


def wigner_block_complex(l: int, q) -> np.ndarray:
    C = real_to_complex(l)
    return C @ wigner_block(l, q) @ C.conj().T


# -- spectral gaps of rotation sets ------------------------------------------

@dataclass
class GapEstimate:
    kappa: float
    per_degree_norms: list[float]
    lmax: int
    description: str = ""
    label: str = "upper estimate of gap at lmax"

    @property
    def max_norm(self) -> float:
        return max(self.per_degree_norms)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "per_degree_norms": self.per_degree_norms,
                "lmax": self.lmax, "description": self.description, "label": self.label}


def averaging_blocks(C, lmax: int) -> list[np.ndarray]:
    """P_l = (1/2k) sum_i (D^l(c_i) + D^l(c_i)^T) for l = 1..lmax."""
    k = len(C)
    sums = [np.zeros((2 * l + 1, 2 * l + 1)) for l in range(lmax + 1)]
    for c in C:
        for l, D in enumerate(wigner_blocks(c, lmax)):
            sums[l] += D + D.T
    return [S / (2 * k) for S in sums[1:]]


def kappa_estimate(C, lmax: int, description: str = "") -> GapEstimate:
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    if len(C) == 0:
        raise ValueError("empty rotation set")
    norms = [float(np.max(np.abs(np.linalg.eigvalsh(P)))) for P in averaging_blocks(C, lmax)]
    kappa = min(1.0, max(0.0, 1.0 - max(norms)))
    return GapEstimate(kappa=kappa, per_degree_norms=norms, lmax=lmax, description=description)


def lps_quaternions(p: int = 5) -> list[UnitQuaternion]:
    """LPS generators for p = 5: (1 + 2i)/sqrt5, (1 + 2j)/sqrt5, (1 + 2k)/sqrt5.

    Their inverses (1 - 2i) etc. complete the p + 1 = 6 Hecke neighbours.
    """
    if p != 5:
        raise ValueError("only the p = 5 set is tabulated")
    s = math.sqrt(5)
    return [UnitQuaternion(1 / s, 2 / s, 0, 0), UnitQuaternion(1 / s, 0, 2 / s, 0),
            UnitQuaternion(1 / s, 0, 0, 2 / s)]


def ramanujan_norm(k: int) -> float:
    return math.sqrt(2 * k - 1) / k


# -- SU(2) irreps and class operators ----------------------------------------

def su2_irrep(dim: int, q: np.ndarray) -> np.ndarray:
    """The ``dim``-dimensional irrep of SU(2) on (..., 4) quaternions, shape (..., dim, dim).

    Realized on degree dim-1 binary forms, p(v) -> p(v U), in the basis
    sqrt(C(n,k)) x^(n-k) y^k, which is orthonormal for the invariant inner product.
    """
    n = dim - 1
    U = su2_matrix(q)
    al, be = U[..., 0, 0], U[..., 1, 0]  # x -> al x + be y
    ga, de = U[..., 0, 1], U[..., 1, 1]  # y -> ga x + de y
    out = np.zeros(U.shape[:-2] + (dim, dim), dtype=complex)
    s = np.sqrt([comb(n, k) for k in range(dim)])
    for k in range(dim):
        # (al x + be y)^(n-k) (ga x + de y)^k
        for i in range(n - k + 1):
            c1 = comb(n - k, i) * al ** (n - k - i) * be ** i
            for jj in range(k + 1):
                j = i + jj
                out[..., j, k] += c1 * comb(k, jj) * ga ** (k - jj) * de ** jj
    return out * (s[None, :] / s[:, None])


def class_character_norm(phi: float, dim: int) -> float:
    """|chi_dim(phi)| / dim = |sin(dim phi)| / (dim sin phi)."""
    return abs(math.sin(dim * phi)) / (dim * math.sin(phi))


def q_class_norm(phi: float, jmax: float) -> float:
    """Norm on L^2_0(SU(2)) of convolution by the class measure of angle phi.

    Supremum over the irreps of dimension 2..2*jmax+1 of |sin(d phi)|/(d sin phi).
    """
    if not 0 < phi < math.pi:
        raise ValueError("phi must lie in (0, pi)")
    dmax = int(round(2 * jmax)) + 1
    return max(class_character_norm(phi, d) for d in range(2, dmax + 1))


def sphere_quadrature(n_polar: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre x trapezoid product rule on S^2 (probability weights).

    Exact for polynomials of degree <= 2*n_polar - 1 in the coordinates.
    """
    z, wz = np.polynomial.legendre.leggauss(n_polar)
    n_az = 2 * n_polar
    az = 2 * np.pi * np.arange(n_az) / n_az
    Z, A = np.meshgrid(z, az, indexing="ij")
    r = np.sqrt(1 - Z ** 2)
    pts = np.stack([r * np.cos(A), r * np.sin(A), Z], axis=-1).reshape(-1, 3)
    w = (wz[:, None] / 2 / n_az * np.ones((1, n_az))).reshape(-1)
    return pts, w


def class_block_quadrature(phi: float, dim: int) -> np.ndarray:
    """int_{S^2} rho_dim(cos phi + sin phi u) du by exact axis quadrature."""
    pts, w = sphere_quadrature(dim + 1)
    q = np.concatenate([np.full((len(pts), 1), math.cos(phi)), math.sin(phi) * pts], axis=1)
    return np.einsum("n,nij->ij", w, su2_irrep(dim, q))


def q_class_norm_quadrature(phi: float, jmax: float) -> float:
    dmax = int(round(2 * jmax)) + 1
    return max(float(np.linalg.norm(class_block_quadrature(phi, d), 2)) for d in range(2, dmax + 1))


# -- subspace geometry -------------------------------------------------------

def angular_separation(basis1: np.ndarray, basis2: np.ndarray, tol: float = 1e-10) -> float:
    """1 - largest principal cosine between the column spans of two orthonormal bases."""
    for B in (basis1, basis2):
        if B.ndim != 2 or np.abs(B.conj().T @ B - np.eye(B.shape[1])).max() > tol:
            raise ValueError("basis is not orthonormal")
    s = np.linalg.svd(basis1.conj().T @ basis2, compute_uv=False)
    return float(min(1.0, max(0.0, 1.0 - s.max())))


def _random_subspace(rng, dim, k):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return Q


def _markov_like(rng, basis, kappa):
    dim = basis.shape[0]
    Pi = basis @ basis.T
    comp = np.eye(dim) - Pi
    C = rng.standard_normal((dim, dim))
    C = comp @ (C + C.T) @ comp
    nrm = np.linalg.norm(C, 2)
    if nrm > 0:
        C = C / nrm * rng.uniform(0, 1)
    return Pi + (1 - kappa) * C


@dataclass
class ContractionReport:
    trials: int
    violations: int
    worst_slack: float
    max_dim: int

    def to_dict(self):
        return dict(self.__dict__)


def avg_contraction_check(dim: int, kappa: float, trials: int, rng: np.random.Generator,
                          random_dim: bool = False) -> ContractionReport:
    """Check ||(P1 + P2)/2|| <= 1 - kappa delta^2 / 36 on random subspace pairs."""
    if dim > 200:
        raise ValueError("dim must be <= 200")
    violations, worst = 0, math.inf
    for _ in range(trials):
        n = int(rng.integers(2, dim + 1)) if random_dim else dim
        k1 = int(rng.integers(1, max(1, n // 2) + 1))
        k2 = int(rng.integers(1, max(1, n - k1) + 1))
        H1, H2 = _random_subspace(rng, n, k1), _random_subspace(rng, n, k2)
        delta = angular_separation(H1, H2)
        kap = kappa if kappa is not None else rng.uniform(0, 1)
        P1, P2 = _markov_like(rng, H1, kap), _markov_like(rng, H2, kap)
        norm = np.linalg.norm(0.5 * (P1 + P2), 2)
        slack = 1 - kap * delta ** 2 / 36 - norm
        worst = min(worst, slack)
        if slack < -1e-12:
            violations += 1
    return ContractionReport(trials=trials, violations=violations, worst_slack=float(worst),
                             max_dim=dim)


# -- products ----------------------------------------------------------------

@dataclass
class ProductGapReport:
    n: int
    kappa_B: float
    q_norm: float
    q_norm_stderr: float
    separation: float
    gap_lower: float
    jmax: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def _q_norm_pair(c2: np.ndarray, c3: np.ndarray, jmax: float, samples: int,
                 rng: np.random.Generator, batches: int = 10) -> tuple[float, float]:
    dmax = int(round(2 * jmax)) + 1
    x = sample_haar(rng, samples)
    xi = qconj(x)
    c2x = qmul(qmul(x, c2[None, :]), xi)
    c3x = qmul(qmul(x, c3[None, :]), xi)
    reps2 = {d: su2_irrep(d, c2x) for d in range(1, dmax + 1)}
    reps3 = {d: su2_irrep(d, c3x) for d in range(1, dmax + 1)}
    best, best_err = 0.0, 0.0
    for d1 in range(1, dmax + 1):
        for d2 in range(1, dmax + 1):
            if d1 == d2 == 1:
                continue
            A, B = reps2[d1], reps3[d2]
            batch_norms = []
            total = np.zeros((d1 * d2, d1 * d2), dtype=complex)
            for chunk in np.array_split(np.arange(samples), batches):
                Mb = np.einsum("nij,nkl->ikjl", A[chunk], B[chunk]).reshape(d1 * d2, d1 * d2)
                total += Mb
                batch_norms.append(np.linalg.norm(Mb / len(chunk), 2))
            val = float(np.linalg.norm(total / samples, 2))
            if val > best:
                best = val
                best_err = float(np.std(batch_norms, ddof=1) / math.sqrt(batches))
    return best, best_err


def product_gap_experiment(B, abar, jmax: float = 2, lmax: int = 20,
                           rng: np.random.Generator | None = None,
                           samples: int = 100_000) -> ProductGapReport:
    """Doubled set C = B x {1,2} in K^n with tau_i(b,2) = b^(a_i); assembled gap bound.

    The separation of the two invariant subspaces is bounded below by 1 - ||Q_mu||,
    and the gap of the average by kappa_B * delta^2 / 36.
    """
    n = len(abar)
    if n not in (2, 3):
        raise ValueError("n must be 2 or 3")
    kB = kappa_estimate(B, lmax).kappa
    a = [q.array() for q in abar]
    a1_inv = qconj(a[0])
    c = [qmul(a1_inv, ai) for ai in a[1:]]
    err = 0.0
    if n == 2:
        phi = float(theta(c[0]))
        if phi < 1e-12 or phi > math.pi - 1e-12:
            qn = 1.0
        else:
            qn = q_class_norm(phi, jmax)
    else:
        if rng is None:
            raise ValueError("n = 3 needs an rng for the conjugator quadrature")
        qn, err = _q_norm_pair(c[0], c[1], jmax, samples, rng)
        qn = min(qn, 1.0)
    sep = max(0.0, 1.0 - qn)
    return ProductGapReport(n=n, kappa_B=kB, q_norm=qn, q_norm_stderr=err, separation=sep,
                            gap_lower=kB * sep ** 2 / 36, jmax=jmax)
