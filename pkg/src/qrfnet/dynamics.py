"""Momentum-conserving interactions, pipelines, and the conservation checker.

An interaction between two particles is given extensionally as blocks keyed
by total angular momentum. Each block is a unitary on an ordered list of
label pairs (l, L - l). Pairs whose total has no block are left alone; a
pair whose total has a block but which is missing from that block's basis
is an error, never a silent identity.

Tolerances: 1e-12 for algebraic identities (unitarity, norms), 1e-10 for
the default conservation comparison.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import statevec as sv
from .network import FrameNetwork, InteractionEvent, prepare
from .statevec import Distribution, ParticleId, SparseState, StateError
from .wavefun import Wavefunction

UNITARY_TOL = 1e-12
CHECK_TOL = 1e-10
MIN_OUTCOME_PROB = 1e-14

Pair = tuple[int, int]


class InteractionError(StateError):
    pass


class SupportError(InteractionError):
    pass


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    basis: tuple[Pair, ...]
    matrix: np.ndarray

    def __post_init__(self):
        basis = tuple((int(a), int(b)) for a, b in self.basis)
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (len(basis), len(basis)):
            raise InteractionError(f"block matrix shape {m.shape} does not match basis of size {len(basis)}")
        if len(set(basis)) != len(basis):
            raise InteractionError(f"repeated pair in block basis {basis}")
        m.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Leak:
    """A nonzero matrix element between pairs of different totals."""

    source: Pair
    target: Pair
    value: complex


@dataclass(frozen=True)
class InteractionSpec:
    """Two-particle interaction, block-diagonal in total momentum.

    ``blocks[L]`` acts on pairs summing to ``L``. Matrix columns are input
    pairs and rows output pairs, both in ``basis`` order.
    """

    blocks: Mapping[int, Block] = field(default_factory=dict)
    leaks: tuple[Leak, ...] = ()
    name: str = ""

    def __post_init__(self):
        blocks = {}
        for total, blk in self.blocks.items():
            if not isinstance(blk, Block):
                basis, matrix = blk
                blk = Block(basis, matrix)
            blocks[int(total)] = blk
        object.__setattr__(self, "blocks", dict(sorted(blocks.items())))
        object.__setattr__(self, "leaks", tuple(self.leaks))

    @property
    def support(self) -> frozenset[Pair]:
        return frozenset(p for blk in self.blocks.values() for p in blk.basis)

    @classmethod
    def from_matrix(cls, basis: Sequence[Pair], matrix, name: str = "", tol: float = UNITARY_TOL) -> InteractionSpec:
        """Split a dense matrix on a pair basis into total-momentum blocks.

        Entries linking pairs of different totals are kept as leaks so that
        validation can report them.
        """
        basis = [(int(a), int(b)) for a, b in basis]
        m = np.asarray(matrix, dtype=complex)
        by_total: dict[int, list[int]] = defaultdict(list)
        for i, (a, b) in enumerate(basis):
            by_total[a + b].append(i)
        blocks = {L: Block([basis[i] for i in idx], m[np.ix_(idx, idx)]) for L, idx in by_total.items()}
        leaks = [
            Leak(basis[j], basis[i], complex(m[i, j]))
            for j in range(len(basis))
            for i in range(len(basis))
            if sum(basis[i]) != sum(basis[j]) and abs(m[i, j]) > tol
        ]
        return cls(blocks, tuple(leaks), name)

    def dense(self, basis: Sequence[Pair]) -> np.ndarray:
        """Matrix on an explicit pair basis, identity off the support."""
        basis = [tuple(p) for p in basis]
        pos = {p: i for i, p in enumerate(basis)}
        m = np.eye(len(basis), dtype=complex)
        for blk in self.blocks.values():
            idx = [pos[p] for p in blk.basis]
            m[np.ix_(idx, idx)] = blk.matrix
        for lk in self.leaks:
            m[pos[lk.target], pos[lk.source]] = lk.value
        return m

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "blocks": [
                {
                    "total": L,
                    "basis": [list(p) for p in blk.basis],
                    "matrix": [[[z.real, z.imag] for z in row] for row in blk.matrix.tolist()],
                }
                for L, blk in self.blocks.items()
            ],
        }


@dataclass(frozen=True)
class Validation:
    ok: bool
    diagnostics: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok


def validate_momentum_conserving(u: InteractionSpec, tol: float = UNITARY_TOL) -> Validation:
    diags = []
    for lk in u.leaks:
        diags.append(
            f"entry <{lk.target[0]},{lk.target[1]}|U|{lk.source[0]},{lk.source[1]}> = {lk.value:.6g} "
            f"couples total {sum(lk.source)} -> {sum(lk.target)}"
        )
    seen: dict[Pair, int] = {}
    for L, blk in u.blocks.items():
        for p in blk.basis:
            if sum(p) != L:
                diags.append(f"block {L} lists pair {p} whose total is {sum(p)}")
            if p in seen:
                diags.append(f"pair {p} appears in blocks {seen[p]} and {L}")
            seen[p] = L
        m = blk.matrix
        err = np.abs(m.conj().T @ m - np.eye(len(blk.basis)))
        if err.size and err.max() > tol:
            i, j = np.unravel_index(np.argmax(err), err.shape)
            diags.append(f"block {L} is not unitary: |(U^dag U - 1)[{i},{j}]| = {err[i, j]:.3g}")
    return Validation(not diags, tuple(diags))


def apply_interaction(s: SparseState, p: ParticleId, q: ParticleId, u: InteractionSpec) -> SparseState:
    check = validate_momentum_conserving(u)
    if not check:
        raise InteractionError("interaction is not momentum conserving: " + "; ".join(check.diagnostics))
    pi, qi = s.index(p), s.index(q)
    if pi == qi:
        raise InteractionError("an interaction needs two distinct particles")
    where = {pair: (L, k) for L, blk in u.blocks.items() for k, pair in enumerate(blk.basis)}
    amps: dict[tuple, complex] = defaultdict(complex)
    for key, a in s.items():
        pair = (key[pi], key[qi])
        total = pair[0] + pair[1]
        if total not in u.blocks:
            amps[key] += a
            continue
        if pair not in where:
            raise SupportError(f"pair {pair} has total {total} but is outside the declared support of block {total}")
        blk = u.blocks[total]
        col = blk.matrix[:, where[pair][1]]
        out = list(key)
        for (x, y), m in zip(blk.basis, col):
            if m != 0:
                out[pi], out[qi] = x, y
                amps[tuple(out)] += m * a
    return SparseState._trusted(s.register, amps, s.prune)


# -- catalog -------------------------------------------------------------

def identity_interaction() -> InteractionSpec:
    return InteractionSpec({}, name="identity")


def beamsplitter() -> InteractionSpec:
    """|01> -> (|01> + |10>)/sqrt2, |10> -> (-|01> + |10>)/sqrt2, fixing |00> and |11>."""
    r = 1 / math.sqrt(2)
    return InteractionSpec(
        {
            0: Block([(0, 0)], [[1]]),
            1: Block([(0, 1), (1, 0)], [[r, -r], [r, r]]),
            2: Block([(1, 1)], [[1]]),
        },
        name="beamsplitter",
    )


def swap_interaction(max_label: int) -> InteractionSpec:
    """Swap of two particles on the window [-max_label, max_label]^2."""
    labels = range(-max_label, max_label + 1)
    by_total: dict[int, list[Pair]] = defaultdict(list)
    for a in labels:
        for b in labels:
            by_total[a + b].append((a, b))
    blocks = {}
    for L, basis in by_total.items():
        pos = {pr: i for i, pr in enumerate(basis)}
        m = np.zeros((len(basis), len(basis)))
        for (a, b), j in pos.items():
            m[pos[(b, a)], j] = 1
        blocks[L] = Block(basis, m)
    return InteractionSpec(blocks, name="swap")


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_block_unitary(pairs: Iterable[Pair], rng: np.random.Generator) -> InteractionSpec:
    """Haar-random unitary on each total-momentum block spanned by ``pairs``."""
    by_total: dict[int, set[Pair]] = defaultdict(set)
    for a, b in pairs:
        by_total[a + b].add((int(a), int(b)))
    blocks = {L: Block(sorted(ps), random_unitary(len(ps), rng)) for L, ps in sorted(by_total.items())}
    return InteractionSpec(blocks, name="random")


# -- pipelines -----------------------------------------------------------

@dataclass(frozen=True)
class Prepare:
    frame: ParticleId
    system: ParticleId
    chi: Wavefunction


@dataclass(frozen=True)
class Interact:
    p: ParticleId
    q: ParticleId
    spec: InteractionSpec


@dataclass(frozen=True)
class Measure:
    particle: ParticleId


Event = Union[Prepare, Interact, Measure]


@dataclass(frozen=True)
class Pipeline:
    initial: SparseState
    events: tuple[Event, ...]
    network: FrameNetwork | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.network is None:
            object.__setattr__(self, "network", FrameNetwork.of(self.initial.register))

    @property
    def prepared_point(self) -> int:
        """Event count right after the last preparation."""
        last = 0
        for i, ev in enumerate(self.events, 1):
            if isinstance(ev, Prepare):
                last = i
        return last

    @property
    def measured(self) -> list[ParticleId]:
        return [ev.particle for ev in self.events if isinstance(ev, Measure)]

    def interaction_events(self) -> list[InteractionEvent]:
        return [InteractionEvent(i, (ev.p, ev.q)) for i, ev in enumerate(self.events) if isinstance(ev, Interact)]


@dataclass(frozen=True)
class Branch:
    outcomes: tuple[tuple[ParticleId, int], ...]
    probability: float
    state: SparseState
    shots: int | None = None

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(v for _, v in self.outcomes)


@dataclass(frozen=True)
class Trajectory:
    """Branch lists after each event; ``snapshots[k]`` is after ``k`` events."""

    snapshots: tuple[tuple[Branch, ...], ...]
    network: FrameNetwork

    def at(self, point: int) -> tuple[Branch, ...]:
        if not 0 <= point < len(self.snapshots):
            raise PipelineError(f"point {point} outside 0..{len(self.snapshots) - 1}")
        return self.snapshots[point]

    @property
    def final(self) -> tuple[Branch, ...]:
        return self.snapshots[-1]


def _apply_unitary_event(state: SparseState, ev: Event, net: FrameNetwork) -> tuple[SparseState, FrameNetwork]:
    if isinstance(ev, Prepare):
        return prepare(state, ev.frame, ev.system, ev.chi, net)
    if isinstance(ev, Interact):
        return apply_interaction(state, ev.p, ev.q, ev.spec), net
    raise TypeError(f"not a unitary event: {ev!r}")


def simulate(pipeline: Pipeline, *, shots: int | None = None, rng: np.random.Generator | None = None) -> Trajectory:
    """Run every event, enumerating all measurement branches.

    With ``shots`` set, measurement outcomes are sampled instead: at each
    measurement the shots sitting on a branch are split multinomially and
    only outcomes that received shots are followed. Branch probabilities
    are then empirical frequencies.
    """
    if shots is not None:
        if shots <= 0:
            raise PipelineError("shots must be positive")
        rng = rng or np.random.default_rng()
    net = pipeline.network
    branches = (Branch((), 1.0, pipeline.initial, shots),)
    snapshots = [branches]
    for n, ev in enumerate(pipeline.events):
        try:
            if isinstance(ev, Measure):
                nxt = []
                for br in branches:
                    outs = sv.measure_momentum(br.state, ev.particle)
                    if shots is None:
                        for o in outs:
                            if o.probability >= MIN_OUTCOME_PROB:
                                nxt.append(Branch(br.outcomes + ((ev.particle, o.outcome),), br.probability * o.probability, o.collapsed))
                        continue
                    probs = np.array([o.probability for o in outs])
                    counts = rng.multinomial(br.shots, probs / probs.sum())
                    for o, c in zip(outs, counts):
                        if c:
                            nxt.append(Branch(br.outcomes + ((ev.particle, o.outcome),), c / shots, o.collapsed, int(c)))
                branches = tuple(nxt)
            else:
                new_net = net
                nxt = []
                for br in branches:
                    st, new_net = _apply_unitary_event(br.state, ev, net)
                    nxt.append(Branch(br.outcomes, br.probability, st, br.shots))
                net = new_net
                branches = tuple(nxt)
        except (StateError, ValueError) as exc:
            raise PipelineError(f"event {n + 1} ({type(ev).__name__}): {exc}") from exc
        snapshots.append(branches)
    return Trajectory(tuple(snapshots), net)


def mixture_distribution(branches: Iterable[Branch], subset: Iterable[ParticleId]) -> Distribution:
    subset = list(subset)
    return Distribution.mixture((b.probability, sv.total_momentum_distribution(b.state, subset)) for b in branches)


# -- individual-case conservation ----------------------------------------

@dataclass(frozen=True)
class OutcomeRecord:
    outcome: tuple[tuple[ParticleId, int], ...]
    probability: float
    conditional: Distribution        # compensating particles, given the outcome
    expected: Distribution           # reference shifted by minus the outcome sum
    conditional_total: Distribution  # whole conserving set, given the outcome
    passed: bool
    max_deviation: float

    def to_json(self) -> dict:
        return {
            "outcome": {str(p): v for p, v in self.outcome},
            "probability": self.probability,
            "conditional": {str(k): v for k, v in self.conditional.items()},
            "expected": {str(k): v for k, v in self.expected.items()},
            "conditional_total": {str(k): v for k, v in self.conditional_total.items()},
            "pass": self.passed,
            "max_deviation": self.max_deviation,
        }


@dataclass(frozen=True)
class ConservationReport:
    conserving: tuple[ParticleId, ...]
    measured: tuple[ParticleId, ...]
    reference_point: int
    reference: Distribution
    records: tuple[OutcomeRecord, ...]
    tolerance: float
    # particles outside the conserving set -> reduced state untouched in every branch
    spectators: Mapping[ParticleId, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def max_deviation(self) -> float:
        return max((r.max_deviation for r in self.records), default=0.0)

    def to_json(self) -> dict:
        return {
            "conserving": [str(p) for p in self.conserving],
            "measured": [str(p) for p in self.measured],
            "reference_point": self.reference_point,
            "reference": {str(k): v for k, v in self.reference.items()},
            "tolerance": self.tolerance,
            "pass": self.passed,
            "max_deviation": self.max_deviation,
            "spectators_unchanged": {str(p): ok for p, ok in self.spectators.items()},
            "records": [r.to_json() for r in self.records],
        }

    def table(self) -> str:
        """Aligned-column text rendering."""
        head = ["outcome", "prob", "L", "actual", "expected", "pass"]
        rows = []
        for r in self.records:
            label = " ".join(f"{p}={v}" for p, v in r.outcome) or "-"
            keys = sorted(set(r.conditional) | set(r.expected))
            for j, L in enumerate(keys):
                rows.append([
                    label if j == 0 else "",
                    f"{r.probability:.6g}" if j == 0 else "",
                    str(L),
                    f"{r.conditional[L]:.6g}",
                    f"{r.expected[L]:.6g}",
                    ("PASS" if r.passed else "FAIL") if j == 0 else "",
                ])
        widths = [max(len(x) for x in col) for col in zip(head, *rows)]
        fmt = lambda row: "  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip()
        lines = [f"conserving set: {', '.join(map(str, self.conserving))}  (reference point {self.reference_point})"]
        lines.append(fmt(head))
        lines.append(fmt(["-" * w for w in widths]))
        lines.extend(fmt(r) for r in rows)
        for p, ok in self.spectators.items():
            lines.append(f"spectator {p}: reduced state {'unchanged' if ok else 'CHANGED'}")
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'} (max deviation {self.max_deviation:.3g})")
        return "\n".join(lines)


def check_individual_conservation(
    pipeline: Pipeline,
    conserving: Iterable[ParticleId],
    reference_point: int | None = None,
    *,
    tol: float = CHECK_TOL,
    trajectory: Trajectory | None = None,
) -> ConservationReport:
    """Compare, per joint measurement outcome, the compensating distribution
    with the reference distribution shifted down by the outcome sum.

    The reference is the total-momentum distribution of ``conserving`` at
    ``reference_point`` (default: right after the last preparation). The
    compensating particles are the conserving ones that were not measured.
    """
    conserving = tuple(dict.fromkeys(conserving))
    if not conserving:
        raise PipelineError("conserving set is empty")
    for p in conserving:
        pipeline.initial.index(p)
    traj = trajectory or simulate(pipeline)
    ref_point = pipeline.prepared_point if reference_point is None else reference_point
    first_measure = next((i for i, ev in enumerate(pipeline.events) if isinstance(ev, Measure)), len(pipeline.events))
    if ref_point > first_measure:
        raise PipelineError(f"reference point {ref_point} lies after the first measurement (event {first_measure + 1})")
    (ref_branch,) = traj.at(ref_point)
    reference = sv.total_momentum_distribution(ref_branch.state, conserving)

    measured = tuple(dict.fromkeys(pipeline.measured))
    compensating = [p for p in conserving if p not in measured]
    counted = set(conserving) & set(measured)
    records = []
    for br in sorted(traj.final, key=lambda b: b.values):
        if br.probability < MIN_OUTCOME_PROB:
            continue
        shift = sum(v for p, v in br.outcomes if p in counted)
        cond = sv.total_momentum_distribution(br.state, compensating)
        expected = reference.shift(-shift)
        dev = cond.max_deviation(expected)
        records.append(
            OutcomeRecord(
                br.outcomes,
                br.probability,
                cond,
                expected,
                sv.total_momentum_distribution(br.state, conserving),
                dev < tol,
                dev,
            )
        )

    spectators = {}
    for p in pipeline.initial.register:
        if p in conserving or p in measured:
            continue
        before = sv.reduced_density_matrix(ref_branch.state, [p])
        spectators[p] = all(
            sv.density_matrices_close(before, sv.reduced_density_matrix(b.state, [p]), 1e-12) for b in traj.final
        )
    return ConservationReport(conserving, measured, ref_point, reference, tuple(records), tol, spectators)
