import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrfnet.frc import (
    DimensionMismatchError,
    LabelTransform,
    NonIntegerEntriesError,
    NonIntegerInverseError,
    NotSquareError,
    SingularError,
    builtin_transforms,
    transform_state,
    validate,
)
from qrfnet.network import FrameNetwork, prepare
from qrfnet.statevec import SparseState, schmidt_rank
from qrfnet.wavefun import Wavefunction, prepared_pair_amplitudes

R = 1 / math.sqrt(2)


# -- validate ------------------------------------------------------------

def test_pair_matrix_accepted():
    t = validate([[1, 1], [0, 1]])
    assert t.inverse == ((1, -1), (0, 1))


def test_center_of_mass_rejected():
    with pytest.raises(NonIntegerEntriesError) as exc:
        validate([[1, 1], [Fraction(-1, 2), Fraction(1, 2)]])
    assert exc.value.condition == "non-integer entries"


def test_determinant_two_rejected():
    with pytest.raises(NonIntegerInverseError) as exc:
        validate([[1, 1], [-1, 1]])
    assert exc.value.condition == "non-integer inverse"


def test_other_rejections():
    with pytest.raises(NotSquareError):
        validate([[1, 0, 0], [0, 1, 0]])
    with pytest.raises(SingularError):
        validate([[1, 2], [2, 4]])
    with pytest.raises(DimensionMismatchError):
        validate([[1]], names=("a", "b"))


def test_string_rationals_parsed():
    with pytest.raises(NonIntegerEntriesError):
        validate([["1", "1"], ["-1/2", "1/2"]])
    assert validate([["1", "0"], ["0", "1"]]).matrix == ((1, 0), (0, 1))


def test_builtin_catalog():
    cat = builtin_transforms()
    assert set(cat) == {"pair", "chain", "network"}
    assert cat["pair"].matrix == ((1, 1), (0, 1))
    assert cat["chain"].apply((2, 1, 1)) == (4, 2, 1)
    assert cat["network"].apply((0,) * 5) == (0,) * 5
    assert cat["network"].names == ("LA", "LB", "LR", "LC", "LC'")
    for t in cat.values():
        prod = np.array(t.matrix) @ np.array(t.inverse)
        assert (prod == np.eye(t.dim, dtype=int)).all()


def test_json_round_trip():
    t = builtin_transforms()["network"]
    assert LabelTransform.from_json(t.to_json()) == t


def test_pullback_preserves_observable():
    t = builtin_transforms()["chain"]
    c = (2, -1, 3)
    cp = t.pullback(c)
    for v in [(1, 2, 3), (-4, 0, 7), (0, 0, 1)]:
        assert np.dot(cp, t.apply(v)) == np.dot(c, v)


# -- transform_state -----------------------------------------------------

def test_pair_transform_factorizes_prepared_state(rng):
    psi = Wavefunction.random(rng, [-1, 0, 2])
    chi = Wavefunction.random(rng, [0, 1])
    s = prepared_pair_amplitudes(psi, chi)
    t = transform_state(s, builtin_transforms()["pair"])
    assert t.register == ("L1", "L2")
    for (l1, l2), a in t.items():
        assert a == pytest.approx(psi.coeff(l1) * chi.coeff(l2), abs=1e-14)
    assert len(t) == len(psi.support) * len(chi.support)


def test_identity_transform():
    s = SparseState(("A", "B"), {(0, 1): R, (2, -1): R})
    t = transform_state(s, validate([[1, 0], [0, 1]], ("A", "B")))
    assert t.isclose(s, 0.0)


def test_dimension_mismatch():
    s = SparseState(("A", "B"), {(0, 1): 1})
    with pytest.raises(DimensionMismatchError):
        transform_state(s, builtin_transforms()["chain"])
    with pytest.raises(DimensionMismatchError):
        transform_state(s, builtin_transforms()["pair"], ordering=("A", "A"))


def network_state(rng=None):
    if rng is None:
        phi = Wavefunction({0: 1})
        psi = psi2 = chi = chi2 = Wavefunction({-1: R, 1: R})
    else:
        phi = Wavefunction.random(rng, [-1, 0, 1])
        psi, psi2, chi, chi2 = (Wavefunction.random(rng, [-1, 0, 1]) for _ in range(4))
    reg = ("G", "F", "F2", "S", "S2")
    s = SparseState(reg, {(l, 0, 0, 0, 0): c for l, c in phi.coeffs.items()})
    net = FrameNetwork.of(reg)
    for frame, system, w in [("G", "F", psi), ("G", "F2", psi2), ("F", "S", chi), ("F2", "S2", chi2)]:
        s, net = prepare(s, frame, system, w, net)
    return s, (phi, psi, psi2, chi, chi2)


def test_network_transform_factorizes(rng):
    for r in (None, rng, rng):
        s, (phi, _, _, chi, chi2) = network_state(r)
        t = transform_state(s, builtin_transforms()["network"])
        assert schmidt_rank(t, ["LA"]) == 1
        assert schmidt_rank(t, ["LC"]) == 1
        assert schmidt_rank(t, ["LC'"]) == 1
        # the A coordinate carries the grand-frame's own momentum distribution
        dA = {}
        for key, a in t.items():
            dA[key[0]] = dA.get(key[0], 0) + abs(a) ** 2
        for l, p in phi.probabilities().items():
            assert dA[l] == pytest.approx(p, abs=1e-12)


# -- properties ----------------------------------------------------------

unimodular_2x2 = st.sampled_from([((1, 1), (0, 1)), ((2, 1), (1, 1)), ((0, 1), (1, 0)), ((1, 0), (-3, 1)), ((3, 2), (4, 3))])


@st.composite
def pair_states(draw):
    d = draw(
        st.dictionaries(
            st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
            st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-2),
            min_size=1,
            max_size=6,
        )
    )
    return SparseState(("A", "B"), d, normalize=True)


@settings(max_examples=80, deadline=None)
@given(pair_states(), unimodular_2x2)
def test_round_trip_exact(s, m):
    t = validate(m, ("x", "y"), ("A", "B"))
    back = transform_state(transform_state(s, t), t.inverted())
    assert back.register == ("A", "B")
    assert back.amplitudes == s.amplitudes


@settings(max_examples=80, deadline=None)
@given(pair_states(), unimodular_2x2)
def test_transform_is_bijective_on_keys(s, m):
    t = transform_state(s, validate(m))
    assert len(t) == len(s)
    assert t.norm == pytest.approx(1, abs=1e-12)
