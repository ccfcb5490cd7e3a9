"""Execute parsed scenarios and render their results."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .. import statevec as sv
from ..dynamics import (
    CHECK_TOL, Block, ConservationReport, Interact, InteractionSpec, Measure, Pipeline, PipelineError,
    Prepare, Trajectory, beamsplitter, check_individual_conservation, identity_interaction,
    mixture_distribution, simulate, swap_interaction,
)
from ..frc import LabelTransform, builtin_transforms, transform_state
from ..network import FrameNetwork
from ..statevec import Distribution, SparseState
from ..wavefun import Wavefunction
from .ast import (
    CheckQuery, DistributionQuery, InteractStmt, MeasureStmt, PrepareStmt, Scenario, TransformQuery,
    UnitaryDecl, WfRef,
)
from .parser import format_scenario

SCHEMA_VERSION = 1


class ScenarioRuntimeError(RuntimeError):
    pass


def _wavefunction(sc: Scenario, ref: WfRef) -> Wavefunction:
    lit = sc.wavefunctions[ref].literal if isinstance(ref, str) else ref
    return Wavefunction(lit.as_dict())


def label_bound(sc: Scenario) -> int:
    """A bound on |label| for every particle at every step."""
    wf_max = lambda ref: max((abs(l) for l in _wavefunction(sc, ref).support), default=0)
    bound = sum(wf_max(p.init) for p in sc.particles if p.init is not None)
    bound += sum(wf_max(e.chi) for e in sc.events if isinstance(e, PrepareStmt))
    for u in sc.unitaries.values():
        for b in u.blocks:
            bound = max([bound] + [abs(x) for pr in b.basis for x in pr])
    return bound


def resolve_unitary(sc: Scenario, name: str, bound: int) -> InteractionSpec:
    if name == "beamsplitter":
        return beamsplitter()
    if name == "identity":
        return identity_interaction()
    if name == "swap":
        return swap_interaction(bound)
    decl: UnitaryDecl = sc.unitaries[name]
    blocks = {
        b.total: Block(b.basis, [[a.value for a in row] for row in b.rows]) for b in decl.blocks
    }
    return InteractionSpec(blocks, name=name)


def build_pipeline(sc: Scenario) -> Pipeline:
    initial = None
    for p in sc.particles:
        wf = _wavefunction(sc, p.init) if p.init is not None else Wavefunction.eigenstate(0)
        single = wf.as_state(p.name)
        initial = single if initial is None else sv.tensor(initial, single)
    if initial is None:
        raise ScenarioRuntimeError("scenario declares no particles")
    bound = label_bound(sc)
    events = []
    for ev in sc.events:
        if isinstance(ev, PrepareStmt):
            events.append(Prepare(ev.frame, ev.system, _wavefunction(sc, ev.chi)))
        elif isinstance(ev, InteractStmt):
            events.append(Interact(ev.p, ev.q, resolve_unitary(sc, ev.unitary, bound)))
        elif isinstance(ev, MeasureStmt):
            events.append(Measure(ev.particle))
    return Pipeline(initial, tuple(events), FrameNetwork.of(initial.register))


def resolve_point(sc: Scenario, pipeline: Pipeline, point, default: str) -> int:
    point = default if point is None else point
    n = len(pipeline.events)
    if isinstance(point, int):
        if not 0 <= point <= n:
            raise ScenarioRuntimeError(f"point {point} outside 0..{n}")
        return point
    if point == "start":
        return 0
    if point == "end":
        return n
    if point == "prepared":
        return pipeline.prepared_point
    cps = sc.checkpoints()
    if point not in cps:
        raise ScenarioRuntimeError(f"unknown point {point!r}")
    return cps[point]


def _outcome_json(outcomes) -> dict:
    return {str(p): v for p, v in outcomes}


def _dist_json(d: Distribution) -> dict:
    return {str(k): v for k, v in d.items()}


@dataclass
class DistributionResult:
    query: DistributionQuery
    point: int
    distribution: Distribution
    kind: str = "distribution"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "subset": list(self.query.subset),
            "point": self.point,
            "given": {p: v for p, v in self.query.given},
            "distribution": _dist_json(self.distribution),
        }

    def csv_rows(self) -> tuple[list[str], list[list[Any]]]:
        return ["L", "probability"], [[L, p] for L, p in self.distribution.items()]

    def text(self) -> str:
        head = f"P(L_{{{','.join(self.query.subset)}}}) at point {self.point}"
        if self.query.given:
            head += " given " + ", ".join(f"{p}={v}" for p, v in self.query.given)
        body = "\n".join(f"  L={L:>3}: {p:.12g}" for L, p in self.distribution.items())
        return f"{head}\n{body}"


@dataclass
class CheckResult:
    query: CheckQuery
    report: ConservationReport
    kind: str = "check"

    @property
    def as_expected(self) -> bool:
        want = self.query.expect or "pass"
        return self.report.passed == (want == "pass")

    def to_json(self) -> dict:
        return {"kind": self.kind, "expect": self.query.expect, "as_expected": self.as_expected, **self.report.to_json()}

    def csv_rows(self):
        rows = []
        for r in self.report.records:
            label = ";".join(f"{p}={v}" for p, v in r.outcome)
            for L in sorted(set(r.conditional) | set(r.expected)):
                rows.append([label, L, r.conditional[L], r.expected[L], "PASS" if r.passed else "FAIL"])
        return ["outcome", "L", "probability", "expected", "pass"], rows

    def text(self) -> str:
        return self.report.table()


@dataclass
class TransformResult:
    query: TransformQuery
    point: int
    transform: LabelTransform
    order: tuple
    before: list[SparseState]
    after: list[SparseState]
    schmidt_ranks: list[dict[str, int]]
    kind: str = "transform"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.query.name,
            "point": self.point,
            "order": [str(p) for p in self.order],
            "transform": self.transform.to_json(),
            "branches": [
                {"before": b.to_json(), "after": a.to_json(), "schmidt_ranks": r}
                for b, a, r in zip(self.before, self.after, self.schmidt_ranks)
            ],
        }

    def text(self) -> str:
        lines = [f"transform {self.query.name}: ({', '.join(map(str, self.order))}) -> ({', '.join(self.transform.names)})"]
        for b, a, r in zip(self.before, self.after, self.schmidt_ranks):
            lines.append("  before:")
            lines.extend(f"    {k}: {_c(v)}" for k, v in b.items())
            lines.append("  after:")
            lines.extend(f"    {k}: {_c(v)}" for k, v in a.items())
            lines.append("  schmidt rank of each coordinate vs the rest: " + ", ".join(f"{n}={k}" for n, k in r.items()))
        return "\n".join(lines)


def _c(z: complex) -> str:
    if abs(z.imag) < 1e-15:
        return f"{z.real:+.12g}"
    return f"{z.real:+.12g}{z.imag:+.12g}i"


@dataclass
class RunResult:
    scenario: Scenario
    pipeline: Pipeline
    trajectory: Trajectory
    results: list = field(default_factory=list)
    tolerance: float = CHECK_TOL
    shots: int | None = None
    seed: int | None = None

    @property
    def branches(self):
        return self.trajectory.final

    @property
    def branch_probability_total(self) -> float:
        return math.fsum(b.probability for b in self.branches)

    def to_json(self) -> dict:
        out = {
            "schema": SCHEMA_VERSION,
            "scenario": {
                "name": self.scenario.name,
                "particles": [p.name for p in self.scenario.particles],
                "source": format_scenario(self.scenario),
            },
            "tolerance": self.tolerance,
            "network": self.trajectory.network.to_json(),
            "branches": [],
            "queries": [r.to_json() for r in self.results],
        }
        if self.shots is not None:
            out["sampling"] = {"shots": self.shots, "seed": self.seed}
        for b in sorted(self.branches, key=lambda b: b.values):
            entry = {"outcome": _outcome_json(b.outcomes), "probability": b.probability}
            if b.shots is not None:
                entry["shots"] = b.shots
            out["branches"].append(entry)
        return out

    def json(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def csv(self, only: int | None = None) -> str:
        """One CSV table per tabular query, separated by blank lines."""
        buf = io.StringIO()
        tables = [r for r in self.results if hasattr(r, "csv_rows")]
        if only is not None:
            tables = [self.results[only]] if hasattr(self.results[only], "csv_rows") else []
        for i, r in enumerate(tables):
            if i:
                buf.write("\n")
            head, rows = r.csv_rows()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(head)
            w.writerows([[repr(x) if isinstance(x, float) else x for x in row] for row in rows])
        return buf.getvalue()

    def text(self) -> str:
        lines = [f"scenario {self.scenario.name or '(unnamed)'}"]
        lines.append("branches:")
        for b in sorted(self.branches, key=lambda b: b.values):
            label = " ".join(f"{p}={v}" for p, v in b.outcomes) or "(no measurement)"
            extra = f"  [{b.shots} shots]" if b.shots is not None else ""
            lines.append(f"  {label}: p={b.probability:.12g}{extra}")
        for i, r in enumerate(self.results):
            lines.append(f"[query {i}] " + r.text())
        return "\n".join(lines) + "\n"


def distribution_query(sc, pipeline, traj, q: DistributionQuery) -> DistributionResult:
    point = resolve_point(sc, pipeline, q.at, "end")
    branches = traj.at(point)
    if q.given:
        measured = {p for p, _ in branches[0].outcomes}
        missing = [p for p, _ in q.given if p not in measured]
        if missing:
            raise ScenarioRuntimeError(f"conditioning on {missing} which are not measured by point {point}")
        want = dict(q.given)
        branches = [b for b in branches if all(dict(b.outcomes)[p] == v for p, v in want.items())]
        if not branches:
            raise ScenarioRuntimeError(f"conditioning outcome {want} has zero probability")
    weight = math.fsum(b.probability for b in branches)
    d = mixture_distribution(branches, q.subset)
    return DistributionResult(q, point, Distribution({k: p / weight for k, p in d.items()}))


def transform_query(sc, pipeline, traj, q: TransformQuery) -> TransformResult:
    point = resolve_point(sc, pipeline, q.at, "prepared")
    t = builtin_transforms()[q.name]
    order = tuple(q.order) if q.order is not None else pipeline.initial.register
    if len(order) != t.dim:
        raise ScenarioRuntimeError(
            f"transform {q.name!r} needs {t.dim} particles in the order ({', '.join(t.source)}); got {len(order)}"
        )
    before, after, ranks = [], [], []
    for b in traj.at(point):
        st = b.state
        try:
            tr = transform_state(st, t, order)
            before.append(sv.permute(st, order))
        except ValueError as exc:
            raise ScenarioRuntimeError(str(exc)) from exc
        after.append(tr)
        ranks.append({n: sv.schmidt_rank(tr, [n]) for n in t.names})
    return TransformResult(q, point, t, order, before, after, ranks)


def run(
    sc: Scenario,
    *,
    tolerance: float = CHECK_TOL,
    shots: int | None = None,
    seed: int | None = None,
) -> RunResult:
    """Run a scenario; measurements enumerate every branch unless ``shots`` is given."""
    pipeline = build_pipeline(sc)
    rng = np.random.default_rng(seed) if shots is not None else None
    try:
        traj = simulate(pipeline, shots=shots, rng=rng)
    except PipelineError as exc:
        raise ScenarioRuntimeError(str(exc)) from exc
    result = RunResult(sc, pipeline, traj, tolerance=tolerance, shots=shots, seed=seed)
    for i, q in enumerate(sc.queries):
        try:
            if isinstance(q, DistributionQuery):
                result.results.append(distribution_query(sc, pipeline, traj, q))
            elif isinstance(q, CheckQuery):
                ref = resolve_point(sc, pipeline, q.reference, "prepared")
                report = check_individual_conservation(pipeline, q.subset, ref, tol=tolerance, trajectory=traj)
                result.results.append(CheckResult(q, report))
            elif isinstance(q, TransformQuery):
                result.results.append(transform_query(sc, pipeline, traj, q))
        except (PipelineError, ValueError, ScenarioRuntimeError) as exc:
            raise ScenarioRuntimeError(f"query {i} (line {q.pos.line if q.pos else '?'}): {exc}") from exc
    return result


def check(
    sc: Scenario, subset: Sequence[str], reference=None, *, tolerance: float = CHECK_TOL
) -> ConservationReport:
    pipeline = build_pipeline(sc)
    ref = resolve_point(sc, pipeline, reference, "prepared")
    try:
        return check_individual_conservation(pipeline, subset, ref, tol=tolerance)
    except (PipelineError, ValueError) as exc:
        raise ScenarioRuntimeError(str(exc)) from exc
