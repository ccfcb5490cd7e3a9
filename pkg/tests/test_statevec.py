import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrfnet.statevec import (
    Distribution,
    NormalizationError,
    RegisterConflictError,
    SparseState,
    StateError,
    UnknownParticleError,
    measure_momentum,
    measure_observable,
    permute,
    reduced_density_matrix,
    schmidt_rank,
    shift_particle,
    tensor,
    total_momentum_distribution,
)

R = 1 / math.sqrt(2)


def random_state(rng, register, labels=range(-2, 3), terms=None):
    n = len(register)
    keys = {tuple(int(x) for x in rng.choice(list(labels), size=n)) for _ in range(terms or 4)}
    return SparseState(register, {k: complex(*rng.normal(size=2)) for k in keys}, normalize=True)


# -- strategies ----------------------------------------------------------

labels = st.integers(-4, 4)
amps = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-3)


@st.composite
def states(draw, register=("A", "B", "C")):
    n = len(register)
    d = draw(st.dictionaries(st.tuples(*[labels] * n), amps, min_size=1, max_size=8))
    return SparseState(register, d, normalize=True)


# -- construction --------------------------------------------------------

def test_rejects_unnormalized_and_wrong_length():
    with pytest.raises(NormalizationError):
        SparseState(("A",), {(0,): 2.0})
    with pytest.raises(StateError):
        SparseState(("A", "B"), {(0,): 1.0})
    with pytest.raises(RegisterConflictError):
        SparseState(("A", "A"), {(0, 0): 1.0})


def test_prune_drops_tiny_amplitudes():
    s = SparseState(("A",), {(0,): 1.0, (1,): 1e-15})
    assert (1,) not in s.amplitudes
    assert len(s) == 1


def test_json_round_trip(rng):
    s = random_state(rng, ("F", "S"))
    assert SparseState.from_json(s.to_json()).isclose(s, 0.0)


# -- tensor --------------------------------------------------------------

def test_tensor_of_eigenstates():
    s = tensor(SparseState.basis(("F",), (0,)), SparseState.basis(("S",), (0,)))
    assert s.register == ("F", "S")
    assert s.amplitudes == {(0, 0): 1}


def test_tensor_superposition_with_zero():
    s = tensor(SparseState.single("F", {0: R, 1: R}), SparseState.basis(("S",), (0,)))
    assert s.amplitude((0, 0)) == pytest.approx(R)
    assert s.amplitude((1, 0)) == pytest.approx(R)
    assert len(s) == 2


def test_tensor_matches_kronecker(rng):
    a = SparseState.single("A", dict(zip([-1, 0, 2], rng.normal(size=3) + 1j * rng.normal(size=3))), normalize=True)
    b = SparseState.single("B", dict(zip([0, 1], rng.normal(size=2) + 1j * rng.normal(size=2))), normalize=True)
    s = tensor(a, b)
    assert len(s) == 6
    assert s.norm == pytest.approx(1, abs=1e-12)
    window = range(-1, 3)
    va = np.array([a.amplitude((l,)) for l in window])
    vb = np.array([b.amplitude((l,)) for l in window])
    dense = np.kron(va, vb)
    got = np.array([s.amplitude((x, y)) for x in window for y in window])
    assert np.allclose(got, dense, atol=1e-14)


def test_tensor_overlap_rejected():
    a = SparseState.basis(("A",), (0,))
    with pytest.raises(RegisterConflictError):
        tensor(a, a)


# -- distributions -------------------------------------------------------

def two_frame_state():
    psi = SparseState.single("F", {0: R, 1: R})
    psi2 = SparseState.single("F2", {0: R, 1: R})
    return tensor(psi, psi2)


def test_total_momentum_two_frames():
    d = total_momentum_distribution(two_frame_state(), ["F", "F2"])
    assert d.isclose({0: 0.25, 1: 0.5, 2: 0.25})


def test_total_momentum_single_eigenstate():
    d = total_momentum_distribution(SparseState.basis(("X",), (3,)), ["X"])
    assert d.weights == {3: 1.0}


def test_total_momentum_unknown_particle():
    with pytest.raises(UnknownParticleError):
        total_momentum_distribution(two_frame_state(), ["Q"])


def test_distribution_helpers():
    d = Distribution({0: 0.25, 1: 0.75})
    assert d.shift(-2).weights == {-2: 0.25, -1: 0.75}
    assert d.max_deviation(Distribution({1: 1.0})) == pytest.approx(0.25)
    assert d.total == pytest.approx(1)
    mix = Distribution.mixture([(0.5, Distribution({0: 1.0})), (0.5, Distribution({1: 1.0}))])
    assert mix.weights == {0: 0.5, 1: 0.5}


# -- measurement ---------------------------------------------------------

def prepared_pair():
    # (|psi>|0> + |psi-1>|1>)/sqrt2 with psi = (|0>+|1>)/sqrt2
    return SparseState(("F", "S"), {(0, 0): 0.5, (1, 0): 0.5, (-1, 1): 0.5, (0, 1): 0.5})


def test_measure_prepared_pair():
    outs = measure_momentum(prepared_pair(), "S")
    assert [o.outcome for o in outs] == [0, 1]
    assert [o.probability for o in outs] == pytest.approx([0.5, 0.5])
    assert outs[0].collapsed.isclose(SparseState(("F", "S"), {(0, 0): R, (1, 0): R}))
    assert outs[1].collapsed.isclose(SparseState(("F", "S"), {(-1, 1): R, (0, 1): R}))


def test_measure_eigenstate():
    outs = measure_momentum(SparseState.basis(("X",), (2,)), "X")
    assert len(outs) == 1 and outs[0].outcome == 2 and outs[0].probability == pytest.approx(1)


def paradox_after_interaction():
    """Four-particle paradox state after the beamsplitter, expanded by hand."""
    half = 0.5
    pair = {(0, 0): half, (1, 0): half, (-1, 1): half, (0, 1): half}  # (F, S)
    before = {}
    for (f, s), a in pair.items():
        for (f2, s2), b in pair.items():
            before[(f, f2, s, s2)] = a * b
    after: dict = {}
    for (f, f2, s, s2), a in before.items():
        if (s, s2) == (0, 1):
            outs = [((0, 1), R), ((1, 0), R)]
        elif (s, s2) == (1, 0):
            outs = [((0, 1), -R), ((1, 0), R)]
        else:
            outs = [((s, s2), 1.0)]
        for (x, y), m in outs:
            after[(f, f2, x, y)] = after.get((f, f2, x, y), 0) + m * a
    return SparseState(("F", "F2", "S", "S2"), after)


def test_joint_outcome_probability_three_sixteenths():
    s = paradox_after_interaction()
    (o0,) = [o for o in measure_momentum(s, "S") if o.outcome == 0]
    (o1,) = [o for o in measure_momentum(o0.collapsed, "S2") if o.outcome == 1]
    assert o0.probability * o1.probability == pytest.approx(3 / 16, abs=1e-12)
    d = total_momentum_distribution(o1.collapsed, ["F", "F2"])
    assert d.isclose({-1: 1 / 3, 0: 1 / 3, 1: 1 / 3})
    # destructive interference removes the (F, F2) = (0, 0) key outright
    assert (0, 0, 0, 1) not in o1.collapsed.amplitudes


def test_measure_observable_weights():
    s = two_frame_state()
    outs = measure_observable(s, {"F": 1, "F2": -1})
    assert [o.outcome for o in outs] == [-1, 0, 1]
    assert [o.probability for o in outs] == pytest.approx([0.25, 0.5, 0.25])


# -- shift ---------------------------------------------------------------

def test_shift_down_by_one():
    s = shift_particle(SparseState.single("F", {0: R, 1: R}), "F", -1)
    assert s.isclose(SparseState.single("F", {-1: R, 0: R}))


def test_shift_zero_and_inverse(rng):
    s = random_state(rng, ("A", "B"))
    assert shift_particle(s, "A", 0).isclose(s, 0.0)
    assert shift_particle(shift_particle(s, "B", 3), "B", -3).amplitudes == s.amplitudes


# -- helpers -------------------------------------------------------------

def test_permute_and_reduced_state():
    s = prepared_pair()
    p = permute(s, ("S", "F"))
    assert p.amplitude((1, -1)) == pytest.approx(0.5)
    rho = reduced_density_matrix(s, ["S"])
    assert rho[(0,), (0,)] == pytest.approx(0.5)
    assert rho[(0,), (1,)] == pytest.approx(0.25)


def test_schmidt_rank():
    assert schmidt_rank(two_frame_state(), ["F"]) == 1
    assert schmidt_rank(prepared_pair(), ["F"]) == 2


# -- properties ----------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(states(), st.sampled_from("ABC"), st.integers(-5, 5))
def test_shift_preserves_norm(s, p, d):
    assert shift_particle(s, p, d).norm == pytest.approx(1, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(states(), st.sampled_from("ABC"), st.integers(-5, 5), st.integers(-5, 5))
def test_shift_composes(s, p, a, b):
    lhs = shift_particle(shift_particle(s, p, a), p, b)
    assert lhs.amplitudes == shift_particle(s, p, a + b).amplitudes


@settings(max_examples=60, deadline=None)
@given(states(), st.sampled_from("ABC"))
def test_measurement_completeness(s, p):
    outs = measure_momentum(s, p)
    assert math.fsum(o.probability for o in outs) == pytest.approx(1, abs=1e-12)
    assert [o.outcome for o in outs] == sorted(o.outcome for o in outs)
    for o in outs:
        assert o.collapsed.norm == pytest.approx(1, abs=1e-12)
        assert o.collapsed.labels_of(p) == {o.outcome}


@settings(max_examples=60, deadline=None)
@given(states(("A",)), states(("B", "C")))
def test_tensor_preserves_norm(a, b):
    assert tensor(a, b).norm == pytest.approx(1, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(states())
def test_distribution_sums_to_one(s):
    assert total_momentum_distribution(s, ["A", "C"]).total == pytest.approx(1, abs=1e-12)
