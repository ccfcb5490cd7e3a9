"""Frame-of-reference coordinates as integer relabelings of momentum tuples.

A coordinate change on n circle particles acts on momentum label vectors
by an integer matrix T. It is a valid change of Hilbert-space
factorization exactly when T has an integer inverse (det T = +-1). The
angle coordinates transform contragrediently and are not materialized.

Catalog orderings (columns of each matrix):

    pair     (F, S)              -> (L1, L2)
    chain    (G, F, S)           -> (L0, L1, L2)
    network  (G, F, F', S, S')   -> (LA, LB, LR, LC, LC')
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .statevec import ParticleId, SparseState, StateError


class TransformError(ValueError):
    condition = "invalid transform"


class NotSquareError(TransformError):
    condition = "not square"


class NonIntegerEntriesError(TransformError):
    condition = "non-integer entries"


class SingularError(TransformError):
    condition = "singular"


class NonIntegerInverseError(TransformError):
    condition = "non-integer inverse"


class DimensionMismatchError(TransformError, StateError):
    condition = "dimension mismatch"


IntMatrix = tuple[tuple[int, ...], ...]


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def _exact_inverse(m: list[list[Fraction]]) -> list[list[Fraction]] | None:
    """Gauss-Jordan over the rationals; None if singular."""
    n = len(m)
    a = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv_p = 1 / a[col][col]
        a[col] = [v * inv_p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


@dataclass(frozen=True)
class LabelTransform:
    """Unimodular integer relabeling; construct through :func:`validate`."""

    matrix: IntMatrix
    inverse: IntMatrix
    names: tuple[str, ...]
    source: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.matrix)

    def apply(self, labels: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(t * v for t, v in zip(row, labels)) for row in self.matrix)

    def inverted(self, names: Sequence[str] | None = None) -> LabelTransform:
        names = tuple(names) if names is not None else (self.source or tuple(f"x{i}" for i in range(self.dim)))
        return LabelTransform(self.inverse, self.matrix, names, self.names)

    def pullback(self, weights: Sequence[int]) -> tuple[int, ...]:
        """Coefficients c' with c' . (T v) == c . v for every label vector v."""
        n = self.dim
        return tuple(sum(weights[i] * self.inverse[i][j] for i in range(n)) for j in range(n))

    def to_json(self) -> dict:
        return {
            "matrix": [list(r) for r in self.matrix],
            "inverse": [list(r) for r in self.inverse],
            "names": list(self.names),
            "source": list(self.source),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> LabelTransform:
        return validate(data["matrix"], data.get("names"), data.get("source", ()))


def validate(matrix, names: Sequence[str] | None = None, source: Sequence[str] = ()) -> LabelTransform:
    """Accept a candidate matrix iff it is integral with an integral inverse.

    Raises a :class:`TransformError` subclass whose ``condition`` names the
    failed check.
    """
    rows = [list(r) for r in matrix]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise NotSquareError(f"matrix must be square, got row lengths {[len(r) for r in rows]}")
    m = [[_as_fraction(x) for x in r] for r in rows]
    bad = [(i, j, str(v)) for i, r in enumerate(m) for j, v in enumerate(r) if v.denominator != 1]
    if bad:
        i, j, v = bad[0]
        raise NonIntegerEntriesError(f"entry [{i}][{j}] = {v} is not an integer; labels would leave the integers")
    inv = _exact_inverse(m)
    if inv is None:
        raise SingularError("matrix is singular; the relabeling is not one-to-one")
    bad = [(i, j, str(v)) for i, r in enumerate(inv) for j, v in enumerate(r) if v.denominator != 1]
    if bad:
        i, j, v = bad[0]
        raise NonIntegerInverseError(
            f"inverse entry [{i}][{j}] = {v} is not an integer; some new label choices have no integer preimage"
        )
    names = tuple(names) if names is not None else tuple(f"y{i}" for i in range(n))
    if len(names) != n:
        raise DimensionMismatchError(f"{len(names)} names for a {n}x{n} matrix")
    to_int = lambda a: tuple(tuple(int(v) for v in r) for r in a)
    return LabelTransform(to_int(m), to_int(inv), names, tuple(source))


def transform_state(
    s: SparseState, t: LabelTransform, ordering: Sequence[ParticleId] | None = None
) -> SparseState:
    """Move the amplitude on label vector v to T v.

    ``ordering`` says which particle feeds each matrix column (default: the
    register order). The result's register is ``t.names``.
    """
    ordering = tuple(ordering) if ordering is not None else s.register
    if len(ordering) != t.dim or len(s.register) != t.dim:
        raise DimensionMismatchError(
            f"transform of dimension {t.dim} applied to register of size {len(s.register)} with ordering {ordering}"
        )
    cols = [s.index(p) for p in ordering]
    if len(set(cols)) != len(cols):
        raise DimensionMismatchError(f"ordering {ordering} repeats a particle")
    amps = {t.apply([key[c] for c in cols]): a for key, a in s.items()}
    return SparseState._trusted(tuple(t.names), amps, s.prune)


def builtin_transforms() -> dict[str, LabelTransform]:
    return {
        "pair": validate([[1, 1], [0, 1]], ("L1", "L2"), ("F", "S")),
        "chain": validate([[1, 1, 1], [0, 1, 1], [0, 0, 1]], ("L0", "L1", "L2"), ("G", "F", "S")),
        "network": validate(
            [
                [1, 1, 1, 1, 1],
                [0, 1, 1, 1, 1],
                [0, 0, 1, 0, 1],
                [0, 0, 0, 1, 0],
                [0, 0, 0, 0, 1],
            ],
            ("LA", "LB", "LR", "LC", "LC'"),
            ("G", "F", "F'", "S", "S'"),
        ),
    }
