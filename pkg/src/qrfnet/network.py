"""Preparation networks: who prepared whom, and the preparation itself."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .statevec import ParticleId, SparseState, StateError
from .wavefun import Wavefunction


class NetworkError(ValueError):
    pass


class UnknownNodeError(NetworkError):
    pass


class AlreadyPreparedError(NetworkError):
    pass


class CycleError(NetworkError):
    pass


class SystemNotVirginError(StateError):
    """The system is not exactly in the zero-momentum sector."""


@dataclass(frozen=True)
class FrameNetwork:
    """Forest of preparation edges, child -> parent."""

    nodes: frozenset = frozenset()
    parents: Mapping[ParticleId, ParticleId] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "parents", MappingProxyType(dict(self.parents)))
        for child, parent in self.parents.items():
            if child not in self.nodes or parent not in self.nodes:
                raise UnknownNodeError(f"edge {child!r} -> {parent!r} mentions an unknown node")
        for node in self.nodes:
            self.ancestors(node)

    @classmethod
    def of(cls, nodes: Iterable[ParticleId], edges: Mapping[ParticleId, ParticleId] | None = None) -> FrameNetwork:
        return cls(frozenset(nodes), dict(edges or {}))

    @property
    def roots(self) -> frozenset:
        return frozenset(n for n in self.nodes if n not in self.parents)

    def parent(self, node: ParticleId) -> ParticleId | None:
        self._require(node)
        return self.parents.get(node)

    def children(self, node: ParticleId) -> list[ParticleId]:
        self._require(node)
        return sorted((c for c, p in self.parents.items() if p == node), key=str)

    def ancestors(self, node: ParticleId) -> list[ParticleId]:
        """Path from ``node`` up to its root, ``node`` first."""
        self._require(node)
        path = [node]
        seen = {node}
        while path[-1] in self.parents:
            nxt = self.parents[path[-1]]
            if nxt in seen:
                raise CycleError(f"preparation cycle through {nxt!r}")
            seen.add(nxt)
            path.append(nxt)
        return path

    def with_node(self, node: ParticleId) -> FrameNetwork:
        return FrameNetwork(self.nodes | {node}, self.parents)

    def with_edge(self, child: ParticleId, parent: ParticleId) -> FrameNetwork:
        self._require(child)
        self._require(parent)
        if child == parent:
            raise CycleError(f"{child!r} cannot prepare itself")
        if child in self.parents:
            raise AlreadyPreparedError(f"{child!r} was already prepared by {self.parents[child]!r}")
        if child in self.ancestors(parent):
            raise CycleError(f"{child!r} is an ancestor of {parent!r}")
        return FrameNetwork(self.nodes, {**self.parents, child: parent})

    def _require(self, node):
        if node not in self.nodes:
            raise UnknownNodeError(f"unknown node {node!r}")

    def to_json(self) -> dict:
        return {
            "nodes": sorted(map(str, self.nodes)),
            "edges": [{"child": str(c), "parent": str(p)} for c, p in sorted(self.parents.items(), key=lambda e: str(e[0]))],
            "roots": sorted(map(str, self.roots)),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> FrameNetwork:
        return cls.of(data["nodes"], {e["child"]: e["parent"] for e in data["edges"]})


@dataclass(frozen=True, order=True)
class InteractionEvent:
    order: int
    participants: tuple

    def __post_init__(self):
        a, b = self.participants
        if a == b:
            raise NetworkError("an interaction needs two distinct particles")
        object.__setattr__(self, "participants", (a, b))


def prepare(
    s: SparseState, frame: ParticleId, system: ParticleId, chi: Wavefunction, net: FrameNetwork
) -> tuple[SparseState, FrameNetwork]:
    """Prepare ``system`` in ``chi`` relative to ``frame``.

    Each term |.., l_f, .., 0, ..> becomes sum_l chi(l) |.., l_f - l, .., l, ..>.
    Defined only when the system sits in the zero-momentum sector.
    """
    fi, si = s.index(frame), s.index(system)
    if fi == si:
        raise NetworkError("frame and system must differ")
    net = net.with_edge(system, frame)
    amps: dict[tuple, complex] = defaultdict(complex)
    chi_items = list(chi.coeffs.items())
    for key, a in s.items():
        if key[si] != 0:
            raise SystemNotVirginError(
                f"{system!r} has momentum {key[si]} in term {key}; preparation needs it at 0"
            )
        base = list(key)
        for l, c in chi_items:
            base[fi] = key[fi] - l
            base[si] = l
            amps[tuple(base)] += a * c
    return SparseState._trusted(s.register, amps, s.prune), net


def first_common_frame(net: FrameNetwork, a: ParticleId, b: ParticleId) -> ParticleId | None:
    """Lowest common ancestor, where a node counts as its own ancestor."""
    up_b = set(net.ancestors(b))
    for node in net.ancestors(a):
        if node in up_b:
            return node
    return None


def _common_frame_of(net: FrameNetwork, group: Sequence[ParticleId]) -> ParticleId | None:
    common = group[0]
    for other in group[1:]:
        if common is None:
            return None
        common = first_common_frame(net, common, other)
    return common


def conserving_set(
    net: FrameNetwork, measured: Iterable[ParticleId], interactions: Iterable[InteractionEvent] = ()
) -> frozenset:
    """Particles over which individual-case conservation is expected to hold.

    Measured particles are grouped by the interactions linking them. A group
    of one contributes itself and its direct preparer. A larger group
    contributes every node on the paths from its members up to and including
    their first common frame; with no common frame, the full paths to the
    roots are taken.
    """
    measured = list(measured)
    if not measured:
        raise NetworkError("measured set must be nonempty")
    parent_of: dict = {}

    def find(x):
        parent_of.setdefault(x, x)
        while parent_of[x] != x:
            parent_of[x] = parent_of[parent_of[x]]
            x = parent_of[x]
        return x

    for node in measured:
        net._require(node)
        find(node)
    for ev in sorted(interactions):
        a, b = ev.participants
        net._require(a)
        net._require(b)
        if net.ancestors(a)[1:] == net.ancestors(b)[1:]:
            # same preparer chain: not a cross-branch link
            continue
        parent_of[find(a)] = find(b)

    groups: dict = defaultdict(list)
    for node in list(parent_of):
        groups[find(node)].append(node)

    out: set = set()
    for members in groups.values():
        if not any(m in measured for m in members):
            continue
        members = sorted(members, key=str)
        if len(members) == 1:
            (m,) = members
            out.add(m)
            p = net.parents.get(m)
            if p is not None:
                out.add(p)
            continue
        top = _common_frame_of(net, members)
        for m in members:
            for node in net.ancestors(m):
                out.add(node)
                if node == top:
                    break
    return frozenset(out)
