"""Reduced words in free and surface groups, and finitely supported measures on them.

Letters are nonzero signed integers.  For ``free(n)`` the generator ``a_i`` is the
letter ``i`` (``1 <= i <= n``).  For ``surface(g)`` the generators ``a_i`` are
``1..g`` and ``b_i`` are ``g+1..2g``.  A negative letter is the formal inverse.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_SUPPORT_BUDGET = 10**6
WEIGHT_TOL = 1e-12


class BudgetExceeded(RuntimeError):
    """A convolution would exceed the configured support budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(f"convolution needs up to {required} words, budget is {budget}")
        self.required = required
        self.budget = budget


class GenerationError(ValueError):
    """Semi-group generation could not be witnessed within the enumeration budget."""


@dataclass(frozen=True)
class GroupDescriptor:
    kind: str  # "free" | "surface"
    rank: int  # n for free(n), g for surface(g)

    def __post_init__(self):
        if self.kind not in ("free", "surface"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.rank < 2:
            raise ValueError(f"{self.kind} group needs rank >= 2, got {self.rank}")

    @classmethod
    def free(cls, n: int) -> "GroupDescriptor":
        return cls("free", n)

    @classmethod
    def surface(cls, g: int) -> "GroupDescriptor":
        return cls("surface", g)

    @property
    def n_generators(self) -> int:
        return self.rank if self.kind == "free" else 2 * self.rank

    def generators(self) -> list[int]:
        return list(range(1, self.n_generators + 1))

    def letter_name(self, letter: int) -> str:
        i = abs(letter)
        if self.kind == "free" or i <= self.rank:
            base = f"a{i}"
        else:
            base = f"b{i - self.rank}"
        return base if letter > 0 else base + "^-1"

    def parse_letter(self, token: str) -> int:
        m = re.fullmatch(r"([ab])(\d+)(\^-1)?", token)
        if m is None:
            raise ValueError(f"bad letter token {token!r}")
        sym, idx, inv = m.group(1), int(m.group(2)), m.group(3)
        if sym == "b":
            if self.kind != "surface":
                raise ValueError(f"letter {token!r} only exists in surface groups")
            if not 1 <= idx <= self.rank:
                raise ValueError(f"letter {token!r} out of range for {self}")
            idx += self.rank
        elif not 1 <= idx <= (self.rank if self.kind == "free" else self.rank):
            raise ValueError(f"letter {token!r} out of range for {self}")
        return -idx if inv else idx

    def relator(self) -> tuple[int, ...]:
        """The surface relator [a1,b1]...[ag,bg]; empty for free groups."""
        if self.kind == "free":
            return ()
        g = self.rank
        rel: list[int] = []
        for i in range(1, g + 1):
            rel += [i, g + i, -i, -(g + i)]
        return tuple(rel)

    def __str__(self):
        return f"{self.kind}({self.rank})"


def _free_reduce(letters: Iterable[int]) -> list[int]:
    out: list[int] = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return out


def _inverse(letters: Sequence[int]) -> tuple[int, ...]:
    return tuple(-x for x in reversed(letters))


_RELATOR_CACHE: dict[GroupDescriptor, list[tuple[int, ...]]] = {}


def _relator_conjugates(group: GroupDescriptor) -> list[tuple[int, ...]]:
    cyc = _RELATOR_CACHE.get(group)
    if cyc is None:
        cyc = []
        for r in (group.relator(), _inverse(group.relator())):
            for k in range(len(r)):
                cyc.append(r[k:] + r[:k])
        _RELATOR_CACHE[group] = cyc
    return cyc


def _dehn_step(w: list[int], group: GroupDescriptor) -> list[int] | None:
    """Replace the leftmost-longest relator piece of length > half; None if none exists."""
    conj = _relator_conjugates(group)
    L = len(conj[0])
    half = L // 2
    for i in range(len(w)):
        best_k, best_c = 0, None
        for c in conj:
            k = 0
            while k < L and i + k < len(w) and w[i + k] == c[k]:
                k += 1
            if k > best_k:
                best_k, best_c = k, c
        if best_k > half:
            # c = u v with u = w[i:i+k] and u v = 1, so u = v^-1
            repl = _inverse(best_c[best_k:])
            return w[:i] + list(repl) + w[i + best_k:]
    return None


def _normal_form(letters: Iterable[int], group: GroupDescriptor) -> tuple[int, ...]:
    w = _free_reduce(letters)
    if group.kind == "surface":
        while True:
            nxt = _dehn_step(w, group)
            if nxt is None:
                break
            w = _free_reduce(nxt)
    return tuple(w)


@dataclass(frozen=True)
class GroupWord:
    letters: tuple[int, ...]
    group: GroupDescriptor

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        if other.group != self.group:
            raise ValueError("words from different groups")
        return GroupWord(_normal_form(self.letters + other.letters, self.group), self.group)

    def inverse(self) -> "GroupWord":
        return GroupWord(_normal_form(_inverse(self.letters), self.group), self.group)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def __str__(self):
        if not self.letters:
            return "e"
        return " ".join(self.group.letter_name(x) for x in self.letters)


def reduce_word(letters: Iterable[int], group: GroupDescriptor) -> GroupWord:
    """Normal form of a raw letter sequence.

    Free groups: the unique freely reduced word.  Surface groups: free reduction
    interleaved with Dehn reduction against every cyclic conjugate of the relator
    and its inverse, until neither applies.
    """
    letters = tuple(int(x) for x in letters)
    ng = group.n_generators
    for x in letters:
        if x == 0 or abs(x) > ng:
            raise ValueError(f"letter {x} outside alphabet of {group}")
    return GroupWord(_normal_form(letters, group), group)


def identity(group: GroupDescriptor) -> GroupWord:
    return GroupWord((), group)


def parse_word(text: str, group: GroupDescriptor) -> GroupWord:
    tokens = text.split()
    if tokens == ["e"]:
        return identity(group)
    return reduce_word([group.parse_letter(t) for t in tokens], group)


@dataclass(frozen=True)
class FiniteGroupMeasure:
    support: Mapping[tuple[int, ...], float]
    group: GroupDescriptor
    _items: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = tuple(sorted((w, float(p)) for w, p in self.support.items()))
        if not items:
            raise ValueError("empty measure")
        if any(p <= 0 for _, p in items):
            raise ValueError("measure has non-positive weights")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "_items", items)

    @classmethod
    def from_words(cls, weights: Mapping[GroupWord, float], group: GroupDescriptor,
                   normalize: bool = False) -> "FiniteGroupMeasure":
        acc: dict[tuple[int, ...], float] = {}
        for w, p in weights.items():
            if w.group != group:
                raise ValueError("word from a different group")
            acc[w.letters] = acc.get(w.letters, 0.0) + float(p)
        acc = {w: p for w, p in acc.items() if p > 0}
        if normalize:
            s = math.fsum(acc.values())
            acc = {w: p / s for w, p in acc.items()}
        return cls(acc, group)

    @classmethod
    def uniform(cls, words: Iterable[GroupWord], group: GroupDescriptor) -> "FiniteGroupMeasure":
        ws = list(words)
        return cls.from_words({w: 1.0 / len(ws) for w in ws}, group, normalize=True)

    @classmethod
    def dirac(cls, group: GroupDescriptor) -> "FiniteGroupMeasure":
        return cls({(): 1.0}, group)

    def items(self) -> tuple:
        return self._items

    def words(self) -> list[GroupWord]:
        return [GroupWord(w, self.group) for w, _ in self._items]

    def weights(self) -> np.ndarray:
        return np.array([p for _, p in self._items])

    def __len__(self):
        return len(self._items)

    def __getitem__(self, word: GroupWord | tuple) -> float:
        key = word.letters if isinstance(word, GroupWord) else tuple(word)
        return self.support.get(key, 0.0)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return all(abs(p - self[_normal_form(_inverse(w), self.group)]) <= tol
                   for w, p in self._items)

    def tv_distance(self, other: "FiniteGroupMeasure") -> float:
        keys = set(self.support) | set(other.support)
        return 0.5 * math.fsum(abs(self.support.get(k, 0.0) - other.support.get(k, 0.0))
                               for k in keys)


def symmetric_generating_measure(group: GroupDescriptor, include_identity: bool = False):
    """Uniform measure on A u A^-1 (optionally with the identity)."""
    words = [identity(group)] if include_identity else []
    for a in group.generators():
        words += [GroupWord((a,), group), GroupWord((-a,), group)]
    return FiniteGroupMeasure.uniform(words, group)


def convolve(m1: FiniteGroupMeasure, m2: FiniteGroupMeasure,
             budget: int = DEFAULT_SUPPORT_BUDGET) -> FiniteGroupMeasure:
    if m1.group != m2.group:
        raise ValueError("measures on different groups")
    required = len(m1) * len(m2)
    if required > budget:
        raise BudgetExceeded(required, budget)
    group = m1.group
    acc: dict[tuple[int, ...], float] = {}
    free = group.kind == "free"
    for x, px in m1.items():
        for y, py in m2.items():
            if free:
                # both factors are reduced: cancel only at the junction
                k = 0
                while k < len(x) and k < len(y) and x[-1 - k] == -y[k]:
                    k += 1
                w = x[:len(x) - k] + y[k:]
            else:
                w = _normal_form(x + y, group)
            acc[w] = acc.get(w, 0.0) + px * py
    total = math.fsum(acc.values())
    return FiniteGroupMeasure({w: p / total for w, p in acc.items() if p > 0}, group)


def convolution_power(mu: FiniteGroupMeasure, n: int,
                      budget: int = DEFAULT_SUPPORT_BUDGET) -> FiniteGroupMeasure:
    out = FiniteGroupMeasure.dirac(mu.group)
    for _ in range(n):
        out = convolve(out, mu, budget)
    return out


def entropy_H(m: FiniteGroupMeasure) -> float:
    return max(0.0, -math.fsum(p * math.log(p) for _, p in m.items()))


def moments(m: FiniteGroupMeasure, eps: float) -> tuple[float, float]:
    """First moment and exponential moment at exponent ``eps`` of the word length."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    L = math.fsum(p * len(w) for w, p in m.items())
    M = math.fsum(p * math.exp(eps * len(w)) for w, p in m.items())
    return L, M


def sample_word(m: FiniteGroupMeasure, rng: np.random.Generator, size: int | None = None):
    """Draw words from ``m``; with ``size`` returns a list of that length."""
    idx = sample_indices(m, rng, 1 if size is None else size)
    words = [GroupWord(m.items()[i][0], m.group) for i in idx]
    return words[0] if size is None else words


def sample_indices(m: FiniteGroupMeasure, rng: np.random.Generator, size: int) -> np.ndarray:
    """Indices into ``m.items()`` drawn iid from ``m`` (inverse-CDF on uniforms)."""
    cdf = np.cumsum(m.weights())
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").clip(0, len(m) - 1)


@dataclass(frozen=True)
class MubarData:
    mubar: FiniteGroupMeasure
    powers: tuple[tuple[int, float], ...]
    p: float
    q: float
    eps: float
    M: float
    c_sg: float
    f_prime_1: float


EPS_GRID = tuple(2.0 ** -k for k in range(1, 11))


def build_mubar(mu: FiniteGroupMeasure, A: Sequence[GroupWord], B: Sequence[GroupWord],
                n_max: int = 12, budget: int = DEFAULT_SUPPORT_BUDGET) -> MubarData:
    """Average of the first N convolution powers of ``mu``, N least with all needed atoms.

    Needed atoms are A u A^-1 u B u B^-1.  Returns the constants p, q, eps, M and
    C_sg = eps p / (2M) attached to the average.
    """
    group = mu.group
    needed: list[GroupWord] = []
    for w in list(A) + list(B):
        for v in (w, w.inverse()):
            if v not in needed:
                needed.append(v)
    seen: set[tuple[int, ...]] = set()
    powers_list: list[FiniteGroupMeasure] = []
    cur = FiniteGroupMeasure.dirac(group)
    N = None
    for n in range(1, n_max + 1):
        cur = convolve(cur, mu, budget)
        powers_list.append(cur)
        seen.update(cur.support)
        if all(v.letters in seen for v in needed):
            N = n
            break
    if N is None:
        missing = next(v for v in needed if v.letters not in seen)
        raise GenerationError(f"atom {missing} not reached by any mu^*n, n <= {n_max}")
    acc: dict[tuple[int, ...], float] = {}
    for m in powers_list:
        for w, p in m.items():
            acc[w] = acc.get(w, 0.0) + p / N
    mubar = FiniteGroupMeasure(acc, group)
    Bsym = []
    for b in B:
        for v in (b, b.inverse()):
            if v not in Bsym:
                Bsym.append(v)
    p = min(0.5, len(Bsym) * min(mubar[b] for b in Bsym)) if Bsym else 0.5
    q = min(mubar[a] for a in A)
    best = None
    for eps in EPS_GRID:
        M = moments(mubar, eps)[1]
        c = eps * p / (2 * M)
        if best is None or c > best[3]:
            best = (eps, M, p, c)
    eps, M, _, c_sg = best
    return MubarData(mubar=mubar, powers=tuple((i, 1.0 / N) for i in range(1, N + 1)),
                     p=p, q=q, eps=eps, M=M, c_sg=c_sg, f_prime_1=(N + 1) / 2)


def avez_sequence(mu: FiniteGroupMeasure, n_max: int,
                  budget: int = DEFAULT_SUPPORT_BUDGET) -> list[float]:
    """H(mu^*n)/n for n = 1..n_max."""
    out = []
    cur = FiniteGroupMeasure.dirac(mu.group)
    for n in range(1, n_max + 1):
        cur = convolve(cur, mu, budget)
        out.append(entropy_H(cur) / n)
    return out


def avez_powers(mu: FiniteGroupMeasure, n_max: int,
                budget: int = DEFAULT_SUPPORT_BUDGET) -> list[float]:
    """Unnormalized H(mu^*n) for n = 1..n_max (subadditivity checks)."""
    return [h * n for n, h in enumerate(avez_sequence(mu, n_max, budget), start=1)]


# -- measure files -----------------------------------------------------------

def read_measure(path) -> FiniteGroupMeasure:
    group = None
    weights: dict[GroupWord, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if group is None:
                parts = line.split()
                if len(parts) != 3 or parts[0] != "group":
                    raise ValueError(f"{path}:{lineno}: expected 'group free N' or 'group surface G'")
                group = GroupDescriptor(parts[1], int(parts[2]))
                continue
            *toks, wt = line.split()
            if not toks:
                raise ValueError(f"{path}:{lineno}: missing word")
            try:
                word = parse_word(" ".join(toks), group)
                weight = float(wt)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            weights[word] = weights.get(word, 0.0) + weight
    if group is None:
        raise ValueError(f"{path}: no group header")
    return FiniteGroupMeasure.from_words(weights, group)


def write_measure(m: FiniteGroupMeasure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"group {m.group.kind} {m.group.rank}\n")
        for w, p in m.items():
            fh.write(f"{GroupWord(w, m.group)} {p!r}\n")
