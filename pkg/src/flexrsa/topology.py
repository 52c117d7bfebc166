"""Network graph: loading, validation and adjacency queries.

Topology files are line oriented:

    # comment
    node <id>
    link <src> <dst> <length_km>

Every ``link`` line is an undirected fiber pair and expands into two directed
arcs with identical length and delay; each direction owns its own spectrum.
Arc ids are dense integers (edge k yields arcs 2k and 2k+1), so they double
as row indices into per-arc occupancy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .physics import propagation_ps

DEFAULT_PROPAGATION_KM_S = 2.0e5


class TopologyError(ValueError):
    """Raised for malformed topology input."""


@dataclass(frozen=True)
class Link:
    """One directed arc. ``delay_ps`` is recomputable as round(length/v * 1e12)."""

    id: int
    src: str
    dst: str
    length_km: float
    delay_ps: int

    def __post_init__(self):
        if self.src == self.dst:
            raise TopologyError(f"self-loop at node {self.src!r}")
        if self.length_km < 0:
            raise TopologyError(f"negative length on arc {self.id}")


@dataclass(frozen=True)
class Network:
    """Immutable directed multigraph with per-arc physical attributes."""

    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    slots_per_link: int
    propagation_speed_km_s: float = DEFAULT_PROPAGATION_KM_S

    def __post_init__(self):
        if self.slots_per_link < 1:
            raise TopologyError(f"slots_per_link must be >= 1, got {self.slots_per_link}")
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("duplicate node id")
        known = set(self.nodes)
        for link in self.links:
            if link.src not in known or link.dst not in known:
                raise TopologyError(f"arc {link.id} references unknown node")
        for i, link in enumerate(self.links):
            if link.id != i:
                raise TopologyError(f"arc ids must be dense, found {link.id} at index {i}")

    @cached_property
    def _outgoing(self) -> dict[str, tuple[Link, ...]]:
        table: dict[str, list[Link]] = {v: [] for v in self.nodes}
        for link in self.links:
            table[link.src].append(link)
        return {v: tuple(sorted(arcs, key=lambda a: (a.dst, a.id))) for v, arcs in table.items()}

    def outgoing(self, v: str) -> tuple[Link, ...]:
        """All arcs leaving ``v``, ordered by (dst id, arc id)."""
        try:
            return self._outgoing[v]
        except KeyError:
            raise TopologyError(f"unknown node {v!r}") from None

    def has_node(self, v: str) -> bool:
        return v in self._outgoing

    @property
    def num_arcs(self) -> int:
        return len(self.links)


@dataclass
class _Parser:
    speed_km_s: float
    nodes: list[str] = field(default_factory=list)
    seen: set[str] = field(default_factory=set)
    edges: list[tuple[str, str, float]] = field(default_factory=list)

    def feed(self, lineno: int, line: str):
        text = line.split("#", 1)[0].strip()
        if not text:
            return
        parts = text.split()
        if parts[0] == "node":
            if len(parts) != 2:
                raise TopologyError(f"line {lineno}: expected 'node <id>'")
            name = parts[1]
            if name in self.seen:
                raise TopologyError(f"line {lineno}: duplicate node id {name!r}")
            self.seen.add(name)
            self.nodes.append(name)
        elif parts[0] == "link":
            if len(parts) != 4:
                raise TopologyError(f"line {lineno}: expected 'link <src> <dst> <length_km>'")
            src, dst = parts[1], parts[2]
            try:
                length = float(parts[3])
            except ValueError:
                raise TopologyError(f"line {lineno}: bad length {parts[3]!r}") from None
            if src not in self.seen:
                raise TopologyError(f"line {lineno}: link endpoint {src!r} not declared")
            if dst not in self.seen:
                raise TopologyError(f"line {lineno}: link endpoint {dst!r} not declared")
            if src == dst:
                raise TopologyError(f"line {lineno}: self-loop at {src!r}")
            if length <= 0:
                raise TopologyError(f"line {lineno}: non-positive length {length}")
            self.edges.append((src, dst, length))
        else:
            raise TopologyError(f"line {lineno}: unknown directive {parts[0]!r}")


def load_topology(
    text: str,
    *,
    slots_per_link: int,
    propagation_speed_km_s: float = DEFAULT_PROPAGATION_KM_S,
) -> Network:
    """Parse a topology file, doubling each undirected edge into two arcs."""
    parser = _Parser(propagation_speed_km_s)
    for lineno, line in enumerate(text.splitlines(), start=1):
        parser.feed(lineno, line)
    if not parser.nodes:
        raise TopologyError("no nodes declared")

    links: list[Link] = []
    for src, dst, length in parser.edges:
        delay = propagation_ps(length, propagation_speed_km_s)
        links.append(Link(len(links), src, dst, length, delay))
        links.append(Link(len(links), dst, src, length, delay))
    return Network(
        nodes=tuple(parser.nodes),
        links=tuple(links),
        slots_per_link=slots_per_link,
        propagation_speed_km_s=propagation_speed_km_s,
    )


def dump_topology(net: Network) -> str:
    """Serialize back to the file grammar (one line per undirected edge)."""
    lines = [f"node {v}" for v in net.nodes]
    for i in range(0, len(net.links), 2):
        fwd = net.links[i]
        lines.append(f"link {fwd.src} {fwd.dst} {fwd.length_km!r}")
    return "\n".join(lines) + "\n"
