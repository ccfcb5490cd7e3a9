"""Syntax tree for ``.qrf`` scenario files."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Point = Union[int, str]

RESERVED_POINTS = ("start", "prepared", "end")
BUILTIN_UNITARIES = ("beamsplitter", "swap", "identity")


@dataclass(frozen=True)
class Pos:
    line: int
    column: int


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Amp:
    """A complex literal, kept with its (whitespace-free) source text."""

    text: str
    value: complex = field(compare=False)


@dataclass(frozen=True)
class WfLiteral:
    entries: tuple[tuple[int, Amp], ...]

    def as_dict(self) -> dict[int, complex]:
        return {l: a.value for l, a in self.entries}


WfRef = Union[str, WfLiteral]


@dataclass(frozen=True)
class ScenarioName:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class ParticleDecl:
    name: str
    init: WfRef | None = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class WavefunctionDecl:
    name: str
    literal: WfLiteral
    pos: Pos = _pos()


@dataclass(frozen=True)
class BlockDecl:
    total: int
    basis: tuple[tuple[int, int], ...]
    rows: tuple[tuple[Amp, ...], ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class UnitaryDecl:
    name: str
    blocks: tuple[BlockDecl, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class PrepareStmt:
    frame: str
    system: str
    chi: WfRef
    pos: Pos = _pos()


@dataclass(frozen=True)
class InteractStmt:
    p: str
    q: str
    unitary: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class MeasureStmt:
    particle: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class CheckpointStmt:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class DistributionQuery:
    subset: tuple[str, ...]
    at: Point | None = None
    given: tuple[tuple[str, int], ...] = ()
    pos: Pos = _pos()


@dataclass(frozen=True)
class CheckQuery:
    subset: tuple[str, ...]
    reference: Point | None = None
    expect: str | None = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class TransformQuery:
    name: str
    order: tuple[str, ...] | None = None
    at: Point | None = None
    pos: Pos = _pos()


Event = Union[PrepareStmt, InteractStmt, MeasureStmt]
Query = Union[DistributionQuery, CheckQuery, TransformQuery]
Statement = Union[
    ScenarioName, ParticleDecl, WavefunctionDecl, UnitaryDecl, PrepareStmt, InteractStmt,
    MeasureStmt, CheckpointStmt, DistributionQuery, CheckQuery, TransformQuery,
]


@dataclass(frozen=True)
class Scenario:
    statements: tuple[Statement, ...]

    def _of(self, *types):
        return [s for s in self.statements if isinstance(s, types)]

    @property
    def name(self) -> str | None:
        names = self._of(ScenarioName)
        return names[0].name if names else None

    @property
    def particles(self) -> list[ParticleDecl]:
        return self._of(ParticleDecl)

    @property
    def wavefunctions(self) -> dict[str, WavefunctionDecl]:
        return {w.name: w for w in self._of(WavefunctionDecl)}

    @property
    def unitaries(self) -> dict[str, UnitaryDecl]:
        return {u.name: u for u in self._of(UnitaryDecl)}

    @property
    def events(self) -> list[Event]:
        return self._of(PrepareStmt, InteractStmt, MeasureStmt)

    @property
    def queries(self) -> list[Query]:
        return self._of(DistributionQuery, CheckQuery, TransformQuery)

    def checkpoints(self) -> dict[str, int]:
        """Checkpoint name -> number of events executed before it."""
        out, n = {}, 0
        for s in self.statements:
            if isinstance(s, (PrepareStmt, InteractStmt, MeasureStmt)):
                n += 1
            elif isinstance(s, CheckpointStmt):
                out[s.name] = n
        return out
