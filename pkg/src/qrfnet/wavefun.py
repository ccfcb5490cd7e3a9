"""Band-limited single-particle wavefunctions on the circle.

Wavefunctions live natively in the momentum representation: a finite map
from integer angular momentum to Fourier coefficient. The angle-space
wavefunction is only a derived view,

    psi(theta) = sum_l c(l) exp(i l theta) / sqrt(2 pi).
"""
from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .statevec import NORM_TOL, PRUNE_THRESHOLD, NormalizationError, ParticleId, SparseState

TWO_PI = 2.0 * math.pi


class Wavefunction:
    """Immutable, normalized, finitely supported set of Fourier coefficients."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, complex], *, normalize: bool = False):
        c = {int(l): complex(v) for l, v in coeffs.items() if abs(v) >= PRUNE_THRESHOLD}
        norm2 = math.fsum(abs(v) ** 2 for v in c.values())
        if normalize:
            if norm2 == 0:
                raise NormalizationError("cannot normalize an all-zero wavefunction")
            s = 1.0 / math.sqrt(norm2)
            c = {l: v * s for l, v in c.items()}
        elif abs(norm2 - 1.0) > NORM_TOL:
            raise NormalizationError(f"wavefunction has squared norm {norm2!r}, expected 1")
        self._coeffs = dict(sorted(c.items()))

    @classmethod
    def eigenstate(cls, l: int = 0) -> Wavefunction:
        return cls({l: 1.0})

    @classmethod
    def random(cls, rng: np.random.Generator, labels) -> Wavefunction:
        labels = list(labels)
        z = rng.normal(size=len(labels)) + 1j * rng.normal(size=len(labels))
        return cls(dict(zip(labels, z)), normalize=True)

    @property
    def coeffs(self) -> dict[int, complex]:
        return dict(self._coeffs)

    def coeff(self, l: int) -> complex:
        return self._coeffs.get(l, 0j)

    __getitem__ = coeff

    @property
    def support(self) -> list[int]:
        return list(self._coeffs)

    def probabilities(self) -> dict[int, float]:
        return {l: abs(c) ** 2 for l, c in self._coeffs.items()}

    def as_state(self, particle: ParticleId) -> SparseState:
        return SparseState.single(particle, self._coeffs)

    def isclose(self, other: Wavefunction, atol: float = 1e-12) -> bool:
        keys = self._coeffs.keys() | other._coeffs.keys()
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    def __eq__(self, other):
        if not isinstance(other, Wavefunction):
            return NotImplemented
        return self._coeffs == other._coeffs

    __hash__ = None

    def __repr__(self):
        return f"Wavefunction({self._coeffs})"

    def to_json(self) -> dict[str, list[float]]:
        return {str(l): [c.real, c.imag] for l, c in self._coeffs.items()}

    @classmethod
    def from_json(cls, data: Mapping[str, list[float]], **kw) -> Wavefunction:
        return cls({int(l): complex(re, im) for l, (re, im) in data.items()}, **kw)


def evaluate_angle(w: Wavefunction, theta):
    """Angle-space value psi(theta); ``theta`` may be a scalar or an array in [0, 2pi)."""
    th = np.asarray(theta, dtype=float)
    if np.any((th < 0) | (th >= TWO_PI)):
        raise ValueError("theta must lie in [0, 2*pi)")
    out = np.zeros(th.shape, dtype=complex)
    for l, c in w.coeffs.items():
        out += c * np.exp(1j * l * th)
    out /= math.sqrt(TWO_PI)
    return complex(out) if out.ndim == 0 else out


def prepared_pair_amplitudes(
    psi: Wavefunction, chi: Wavefunction, frame: ParticleId = "F", system: ParticleId = "S"
) -> SparseState:
    """Momentum-space form of psi(theta_f) chi(theta_s - theta_f).

    The amplitude on (l_f, l_s) is psi(l_f + l_s) * chi(l_s).
    """
    amps = {}
    for ls, cs in chi.coeffs.items():
        for lp, cp in psi.coeffs.items():
            amps[(lp - ls, ls)] = cp * cs
    return SparseState((frame, system), amps, normalize=True)


def shift(w: Wavefunction, l: int) -> Wavefunction:
    """|psi - l>: the support moves down by ``l``."""
    return Wavefunction({k - l: c for k, c in w.coeffs.items()})
