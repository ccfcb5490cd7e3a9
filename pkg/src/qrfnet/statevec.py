"""Sparse multi-particle states over integer angular-momentum labels.

A state is a finite map from label tuples (one integer per particle in the
register) to complex amplitudes. There is no momentum cutoff: any integer
label may appear. Amplitudes whose modulus falls below the state's prune
threshold are dropped after every operation, so that exact destructive
interference leaves a genuinely absent key.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-14
NORM_TOL = 1e-12

ParticleId = Hashable
Labels = tuple[int, ...]


class StateError(ValueError):
    pass


class RegisterConflictError(StateError):
    pass


class UnknownParticleError(StateError):
    pass


class NormalizationError(StateError):
    pass


def _prune(amps: Mapping[Labels, complex], threshold: float) -> dict[Labels, complex]:
    return {k: complex(v) for k, v in amps.items() if abs(v) >= threshold}


class SparseState:
    """Immutable normalized pure state on a register of circle particles."""

    __slots__ = ("_register", "_amps", "_index", "prune")

    def __init__(
        self,
        register: Sequence[ParticleId],
        amplitudes: Mapping[Sequence[int], complex],
        *,
        normalize: bool = False,
        prune: float = PRUNE_THRESHOLD,
    ):
        register = tuple(register)
        if len(set(register)) != len(register):
            raise RegisterConflictError(f"duplicate particle in register {register}")
        n = len(register)
        amps: dict[Labels, complex] = {}
        for key, value in amplitudes.items():
            key = tuple(int(x) for x in key)
            if len(key) != n:
                raise StateError(f"label tuple {key} does not match register of size {n}")
            amps[key] = amps.get(key, 0j) + complex(value)
        amps = _prune(amps, prune)
        norm2 = math.fsum(abs(a) ** 2 for a in amps.values())
        if normalize:
            if norm2 == 0.0:
                raise NormalizationError("cannot normalize the zero vector")
            scale = 1.0 / math.sqrt(norm2)
            amps = _prune({k: a * scale for k, a in amps.items()}, prune)
        elif abs(norm2 - 1.0) > NORM_TOL:
            raise NormalizationError(f"state has squared norm {norm2!r}, expected 1")
        self._register = register
        self._amps = dict(sorted(amps.items()))
        self._index = {p: i for i, p in enumerate(register)}
        self.prune = prune

    @classmethod
    def _trusted(cls, register: tuple, amps: dict[Labels, complex], prune: float) -> SparseState:
        # Internal constructor for results of norm-preserving operations.
        obj = object.__new__(cls)
        obj._register = register
        obj._amps = dict(sorted(_prune(amps, prune).items()))
        obj._index = {p: i for i, p in enumerate(register)}
        obj.prune = prune
        return obj

    @classmethod
    def basis(cls, register: Sequence[ParticleId], labels: Sequence[int]) -> SparseState:
        return cls(register, {tuple(labels): 1.0})

    @classmethod
    def single(cls, particle: ParticleId, coeffs: Mapping[int, complex], **kw) -> SparseState:
        return cls((particle,), {(int(l),): c for l, c in coeffs.items()}, **kw)

    @property
    def register(self) -> tuple:
        return self._register

    @property
    def amplitudes(self) -> Mapping[Labels, complex]:
        return dict(self._amps)

    def index(self, particle: ParticleId) -> int:
        try:
            return self._index[particle]
        except KeyError:
            raise UnknownParticleError(f"particle {particle!r} not in register {self._register}") from None

    def amplitude(self, labels: Sequence[int]) -> complex:
        return self._amps.get(tuple(labels), 0j)

    def items(self) -> Iterator[tuple[Labels, complex]]:
        return iter(self._amps.items())

    def __len__(self) -> int:
        return len(self._amps)

    def __contains__(self, labels) -> bool:
        return tuple(labels) in self._amps

    @property
    def norm(self) -> float:
        return math.sqrt(math.fsum(abs(a) ** 2 for a in self._amps.values()))

    def labels_of(self, particle: ParticleId) -> set[int]:
        i = self.index(particle)
        return {k[i] for k in self._amps}

    def isclose(self, other: SparseState, atol: float = 1e-12) -> bool:
        """Amplitude-wise comparison, same register order required."""
        if self._register != other._register:
            return False
        keys = self._amps.keys() | other._amps.keys()
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= atol for k in keys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseState):
            return NotImplemented
        return self._register == other._register and self._amps == other._amps

    __hash__ = None

    def __repr__(self) -> str:
        terms = ", ".join(f"{k}: {_fmt_complex(a)}" for k, a in self._amps.items())
        return f"SparseState({list(self._register)}, {{{terms}}})"

    def to_json(self) -> dict:
        return {
            "register": [str(p) for p in self._register],
            "terms": [
                {"labels": list(k), "amplitude": [a.real, a.imag]} for k, a in self._amps.items()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> SparseState:
        return cls(
            data["register"],
            {tuple(t["labels"]): complex(*t["amplitude"]) for t in data["terms"]},
        )


def _fmt_complex(z: complex) -> str:
    if z.imag == 0:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


@dataclass(frozen=True)
class Distribution:
    """Probability distribution over integer momentum totals."""

    weights: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(sorted((int(k), float(v)) for k, v in self.weights.items())))

    def __getitem__(self, value: int) -> float:
        return self.weights.get(value, 0.0)

    def __iter__(self):
        return iter(self.weights)

    def items(self):
        return self.weights.items()

    @property
    def total(self) -> float:
        return math.fsum(self.weights.values())

    def shift(self, delta: int) -> Distribution:
        return Distribution({k + delta: p for k, p in self.weights.items()})

    def deviations(self, other: Distribution) -> dict[int, float]:
        keys = sorted(self.weights.keys() | other.weights.keys())
        return {k: abs(self[k] - other[k]) for k in keys}

    def max_deviation(self, other: Distribution) -> float:
        return max(self.deviations(other).values(), default=0.0)

    def isclose(self, other: Distribution | Mapping[int, float], atol: float = 1e-12) -> bool:
        if not isinstance(other, Distribution):
            other = Distribution(other)
        return self.max_deviation(other) <= atol

    def support(self, threshold: float = 0.0) -> list[int]:
        return [k for k, p in self.weights.items() if p > threshold]

    @classmethod
    def mixture(cls, parts: Iterable[tuple[float, Distribution]]) -> Distribution:
        acc: dict[int, float] = defaultdict(float)
        for w, d in parts:
            for k, p in d.items():
                acc[k] += w * p
        return cls(acc)


class Outcome(NamedTuple):
    outcome: int
    probability: float
    collapsed: SparseState


def tensor(a: SparseState, b: SparseState) -> SparseState:
    clash = set(a.register) & set(b.register)
    if clash:
        raise RegisterConflictError(f"registers overlap on {sorted(map(str, clash))}")
    amps = {ka + kb: va * vb for ka, va in a.items() for kb, vb in b.items()}
    return SparseState._trusted(a.register + b.register, amps, min(a.prune, b.prune))


def observable_distribution(s: SparseState, weights: Mapping[ParticleId, int]) -> Distribution:
    """Distribution of the integer observable sum_p weights[p] * L_p."""
    idx = [(s.index(p), int(w)) for p, w in weights.items()]
    acc: dict[int, list[float]] = defaultdict(list)
    for key, a in s.items():
        acc[sum(w * key[i] for i, w in idx)].append(abs(a) ** 2)
    return Distribution({k: math.fsum(v) for k, v in acc.items()})


def total_momentum_distribution(s: SparseState, subset: Iterable[ParticleId]) -> Distribution:
    return observable_distribution(s, {p: 1 for p in subset})


def measure_observable(s: SparseState, weights: Mapping[ParticleId, int]) -> list[Outcome]:
    """Projective measurement of an integer combination of momenta.

    Returns one entry per outcome, sorted ascending, each with its
    renormalized post-measurement state.
    """
    idx = [(s.index(p), int(w)) for p, w in weights.items()]
    groups: dict[int, dict[Labels, complex]] = defaultdict(dict)
    for key, a in s.items():
        groups[sum(w * key[i] for i, w in idx)][key] = a
    out = []
    for value in sorted(groups):
        part = groups[value]
        prob = math.fsum(abs(a) ** 2 for a in part.values())
        scale = 1.0 / math.sqrt(prob)
        collapsed = SparseState._trusted(s.register, {k: a * scale for k, a in part.items()}, s.prune)
        out.append(Outcome(value, prob, collapsed))
    return out


def measure_momentum(s: SparseState, p: ParticleId) -> list[Outcome]:
    return measure_observable(s, {p: 1})


def shift_particle(s: SparseState, p: ParticleId, delta: int) -> SparseState:
    """Apply exp(i*theta_p*delta): every label of ``p`` moves up by ``delta``."""
    i = s.index(p)
    delta = int(delta)
    amps = {k[:i] + (k[i] + delta,) + k[i + 1:]: a for k, a in s.items()}
    return SparseState._trusted(s.register, amps, s.prune)


def permute(s: SparseState, order: Sequence[ParticleId]) -> SparseState:
    """Same state with the register reordered to ``order``."""
    order = tuple(order)
    if sorted(map(repr, order)) != sorted(map(repr, s.register)):
        raise UnknownParticleError(f"{order} is not a permutation of {s.register}")
    perm = [s.index(p) for p in order]
    amps = {tuple(k[i] for i in perm): a for k, a in s.items()}
    return SparseState._trusted(order, amps, s.prune)


def reduced_density_matrix(s: SparseState, subset: Sequence[ParticleId]) -> dict[tuple[Labels, Labels], complex]:
    """Sparse reduced density matrix rho[(a, b)] on ``subset``, in the given order."""
    keep = [s.index(p) for p in subset]
    rest = [i for i in range(len(s.register)) if i not in keep]
    by_rest: dict[Labels, list[tuple[Labels, complex]]] = defaultdict(list)
    for key, a in s.items():
        by_rest[tuple(key[i] for i in rest)].append((tuple(key[i] for i in keep), a))
    rho: dict[tuple[Labels, Labels], complex] = defaultdict(complex)
    for terms in by_rest.values():
        for ka, a in terms:
            for kb, b in terms:
                rho[ka, kb] += a * b.conjugate()
    return dict(rho)


def density_matrices_close(r1: Mapping, r2: Mapping, atol: float = 1e-12) -> bool:
    keys = r1.keys() | r2.keys()
    return all(abs(r1.get(k, 0j) - r2.get(k, 0j)) <= atol for k in keys)


def schmidt_rank(s: SparseState, subset: Sequence[ParticleId], tol: float = 1e-10) -> int:
    """Schmidt rank of the state across the cut ``subset | rest``."""
    keep = [s.index(p) for p in subset]
    rest = [i for i in range(len(s.register)) if i not in keep]
    rows: dict[Labels, int] = {}
    cols: dict[Labels, int] = {}
    entries = []
    for key, a in s.items():
        r = rows.setdefault(tuple(key[i] for i in keep), len(rows))
        c = cols.setdefault(tuple(key[i] for i in rest), len(cols))
        entries.append((r, c, a))
    m = np.zeros((len(rows), len(cols)), dtype=complex)
    for r, c, a in entries:
        m[r, c] = a
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > tol))

