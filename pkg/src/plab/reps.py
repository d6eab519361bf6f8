"""Representations of free and surface groups into PSL2(C)^d, and the parameter families."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .moebius import MoebiusMap, scale_map, log_nrn, product
from .quat import UnitQuaternion, solve_commutator, commutator, _align
from .words import GroupDescriptor, GroupWord, FiniteGroupMeasure, reduce_word

RELATOR_TOL = 1e-10


@dataclass(frozen=True)
class FamilyParams:
    s: float
    r: tuple[float, ...]
    base: str = "lps"

    def __post_init__(self):
        r = tuple(float(v) for v in np.atleast_1d(self.r))
        object.__setattr__(self, "r", r)
        if not 0 <= self.s <= 1:
            raise ValueError(f"s = {self.s} outside [0, 1]")
        if any(v <= 0 for v in r):
            raise ValueError("every rate r_j must be > 0")

    @property
    def d(self) -> int:
        return len(self.r)


@dataclass
class Representation:
    group: GroupDescriptor
    d: int
    images: dict[int, tuple[MoebiusMap, ...]]
    params: FamilyParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        gens = self.group.generators()
        if sorted(self.images) != gens:
            raise ValueError("images must cover every generator exactly once")
        for k, v in self.images.items():
            if len(v) != self.d:
                raise ValueError(f"generator {k}: expected {self.d} factors")
        self._letters = self._letter_table()

    def _letter_table(self) -> np.ndarray:
        n = self.group.n_generators
        tab = np.empty((2 * n + 1, self.d, 2, 2), dtype=complex)
        tab[0] = np.eye(2)
        for k, maps in self.images.items():
            for j, g in enumerate(maps):
                tab[k, j] = g.m
                tab[-k, j] = g.inverse().m  # negative index wraps
        return tab

    def letter(self, l: int) -> np.ndarray:
        """(d, 2, 2) image of a signed letter."""
        return self._letters[l]

    def evaluate(self, word: GroupWord | tuple) -> tuple[MoebiusMap, ...]:
        letters = word.letters if isinstance(word, GroupWord) else tuple(word)
        return tuple(product(MoebiusMap(self._letters[l, j]) for l in letters) if letters
                     else MoebiusMap.identity() for j in range(self.d))

    def evaluate_stack(self, words) -> np.ndarray:
        """(K, d, 2, 2) images of a list of words."""
        return np.stack([np.stack([g.m for g in self.evaluate(w)]) for w in words])

    def measure_images(self, mu: FiniteGroupMeasure) -> tuple[np.ndarray, np.ndarray]:
        """Support images and weights of a measure."""
        return self.evaluate_stack(mu.words()), mu.weights()

    def factor(self, j: int) -> "Representation":
        return self.restrict([j])

    def restrict(self, idx) -> "Representation":
        idx = list(idx)
        return Representation(self.group, len(idx),
                              {k: tuple(v[j] for j in idx) for k, v in self.images.items()},
                              meta={"factors": idx})

    def relator_residual(self) -> float:
        rel = self.group.relator()
        if not rel:
            return 0.0
        return max(_sign_residual(g.m) for g in self.evaluate(rel))

    def conjugate(self, k: MoebiusMap) -> "Representation":
        ki = k.inverse()
        return Representation(self.group, self.d,
                              {g: tuple(k @ m @ ki for m in v) for g, v in self.images.items()},
                              params=self.params)

    def to_json(self) -> str:
        return json.dumps({
            "group": {"kind": self.group.kind, "rank": self.group.rank},
            "d": self.d,
            "images": {self.group.letter_name(k): [g.to_reals() for g in v]
                       for k, v in sorted(self.images.items())},
        })

    @classmethod
    def from_json(cls, text: str) -> "Representation":
        obj = json.loads(text)
        grp = GroupDescriptor(obj["group"]["kind"], obj["group"]["rank"])
        images = {grp.parse_letter(name): tuple(MoebiusMap.from_reals(v) for v in vals)
                  for name, vals in obj["images"].items()}
        return cls(grp, int(obj["d"]), images)


def _sign_residual(m: np.ndarray) -> float:
    I = np.eye(2)
    return float(min(np.linalg.norm(m - I), np.linalg.norm(m + I)))


def alpha_of(rho: Representation) -> float:
    """max over a in A u A^-1 of sum_j log N_RN(rho_j(a)); inverses have the same norm."""
    return max(sum(log_nrn(g) for g in maps) for maps in rho.images.values())


def _as_maps(W) -> list[MoebiusMap]:
    return [w.to_moebius() if isinstance(w, UnitQuaternion) else w for w in W]


def build_free_family(params: FamilyParams, W) -> Representation:
    """free(n): a1 -> scale_map(r, 2 pi s); a_i -> W_{i-1} for i >= 2."""
    if params.d != 1:
        raise ValueError("free family is single-factor; use build_product_family")
    W = _as_maps(W)
    n = len(W) + 1
    if n < 2:
        raise ValueError("need at least one rotation image")
    for w in W:
        if log_nrn(w) > 1e-9:
            raise ValueError("B-images must be rotations")
    grp = GroupDescriptor.free(n)
    images = {1: (scale_map(params.r[0], 2 * math.pi * params.s),)}
    for i, w in enumerate(W, start=2):
        images[i] = (w,)
    return Representation(grp, 1, images, params=params)


def build_surface_family(params: FamilyParams, rho0, g: int | None = None) -> Representation:
    """surface(g): b1 -> R0, a1 -> T0 V_{s,r}, with [T0, R0] W0 = 1 and V in the centralizer of R0.

    ``rho0`` lists rotation images (as unit quaternions) in the order a2, b2, ..., ag, bg.
    """
    rho0 = list(rho0)
    if g is None:
        g = len(rho0) // 2 + 1
    if len(rho0) != 2 * g - 2 or g < 2:
        raise ValueError(f"surface({g}) needs {2 * g - 2} rotation images, got {len(rho0)}")
    if params.d != 1:
        raise ValueError("surface family is single-factor")
    W0 = UnitQuaternion.one()
    for i in range(g - 1):
        W0 = W0 * commutator(rho0[2 * i], rho0[2 * i + 1])
    T0, R0 = solve_commutator(W0.inverse())
    axis = R0.array()[1:]
    na = np.linalg.norm(axis)
    X = _align(np.array([0.0, 0.0, 1.0]), axis / na) if na > 1e-12 else UnitQuaternion.one()
    Xm = X.to_moebius()
    V = Xm @ scale_map(params.r[0], 2 * math.pi * params.s) @ Xm.inverse()
    grp = GroupDescriptor.surface(g)
    images = {1: (T0.to_moebius() @ V,), g + 1: (R0.to_moebius(),)}
    for i in range(g - 1):
        images[i + 2] = (rho0[2 * i].to_moebius(),)
        images[g + i + 2] = (rho0[2 * i + 1].to_moebius(),)
    rho = Representation(grp, 1, images, params=params,
                         meta={"V": V, "R0": R0, "T0": T0})
    res = rho.relator_residual()
    if res > RELATOR_TOL:
        raise RuntimeError(f"surface relator residual {res:.3e} above {RELATOR_TOL}")
    return rho


def build_product_family(params: FamilyParams, W) -> Representation:
    """free(n) into PSL2(C)^d: a1 -> (scale_map(r_j, 2 pi (s + j - 1)/d))_j.

    ``W`` is a list over B-generators of d-tuples of rotations (one per factor).
    """
    d = params.d
    if not 2 <= d <= 3:
        raise ValueError(f"d = {d} outside desk range 2..3")
    W = [tuple(_as_maps(w)) for w in W]
    n = len(W) + 1
    if any(len(w) != d for w in W):
        raise ValueError("each B-image needs d factors")
    images = {1: tuple(scale_map(params.r[j], 2 * math.pi * (params.s + j) / d) for j in range(d))}
    for i, w in enumerate(W, start=2):
        images[i] = w
    return Representation(GroupDescriptor.free(n), d, images, params=params)


def lps_product_images(d: int, n_b: int = 3, rng: np.random.Generator | None = None):
    """B-images for a product: the LPS triple in the first factor, conjugated copies elsewhere.

    Factor j uses the LPS triple conjugated by a fixed Haar rotation, so factors differ.
    """
    from .quat import sample_haar
    base = padded_rotation_set(n_b, rng)
    rng = rng or np.random.default_rng(12345)
    conj = [UnitQuaternion.one()] + [UnitQuaternion.from_array(v) for v in sample_haar(rng, d - 1)]
    return [tuple(b.conj_by(c) for c in conj) for b in base]


def padded_rotation_set(k: int, rng: np.random.Generator | None = None) -> list[UnitQuaternion]:
    """LPS p=5 triple, padded with Haar rotations when k > 3."""
    from .harmonic import lps_quaternions
    from .quat import sample_haar
    base = lps_quaternions()
    if k <= 3:
        return base[:k]
    rng = rng or np.random.default_rng(2024)
    return base + [UnitQuaternion.from_array(v) for v in sample_haar(rng, k - 3)]


def random_word(group: GroupDescriptor, length: int, rng: np.random.Generator) -> GroupWord:
    n = group.n_generators
    letters = rng.integers(1, n + 1, size=length) * rng.choice([-1, 1], size=length)
    return reduce_word(letters.tolist(), group)
