"""Place graphs for the token-passing selector.

A topology is a set of places (one per antenna), undirected edges along
which a token may move, and for every *directed* edge the neighbourhood
whose capacity decides whether a token crossing that edge may move.

Toroid layout
-------------
``build_toroid(rows, cols)`` numbers places row by row, so place ``p`` sits
at row ``p // cols`` and column ``p % cols``. With 0-based ids on a 4x16
grid, place 0 neighbours places 1 (right), 15 (left), 16 (down) and 48 (up).
A place's left and down edges are governed by its *left neighbourhood*
(the column to its left plus its own column), its right and up edges by
its *right neighbourhood* (its own column plus the column to its right).

Text format
-----------
One directive per line, ``#`` starts a comment, place ids are 0-based::

    places <n>
    shape <rows> <cols>          # optional
    antenna <place> <antenna>    # one per place, optional (default identity)
    edge <a> <b>
    hood <from> <to> : <p> <p> ...
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from ._validation import ContractError, DomainError, TopologyError


@dataclass(frozen=True, eq=False)
class RpnTopology:
    n_places: int
    edges: frozenset
    edge_neighbourhood: MappingProxyType
    place_to_antenna: tuple
    shape: tuple | None = None
    _adjacency: tuple = field(init=False, repr=False)

    def __post_init__(self):
        adj = [set() for _ in range(max(self.n_places, 0))]
        for a, b in self.edges:
            if 0 <= a < self.n_places and 0 <= b < self.n_places:
                adj[a].add(b)
                adj[b].add(a)
        object.__setattr__(self, "_adjacency", tuple(tuple(sorted(s)) for s in adj))

    def neighbours(self, place):
        return self._adjacency[place]

    def neighbourhood(self, src, dst):
        """Places whose capacity governs a token moving ``src -> dst``."""
        return self.edge_neighbourhood[(src, dst)]

    def antenna(self, place):
        return self.place_to_antenna[place]

    def __eq__(self, other):
        if not isinstance(other, RpnTopology):
            return NotImplemented
        return (
            self.n_places == other.n_places
            and self.edges == other.edges
            and dict(self.edge_neighbourhood) == dict(other.edge_neighbourhood)
            and self.place_to_antenna == other.place_to_antenna
        )

    __hash__ = None


def _is_connected(n_places, edges):
    if n_places <= 1:
        return True
    adj = [[] for _ in range(n_places)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    queue = deque([0])
    while queue:
        for q in adj[queue.popleft()]:
            if q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == n_places


def validate(topology):
    """Return a list of human-readable invariant violations (empty if valid)."""
    n = topology.n_places
    problems = []
    if n < 1:
        return [f"n_places must be >= 1, got {n}"]
    if sorted(topology.place_to_antenna) != list(range(n)):
        problems.append("place_to_antenna is not a bijection onto 0..n_places-1")
    good_edges = []
    for a, b in sorted(topology.edges):
        if not (0 <= a < n and 0 <= b < n):
            problems.append(f"edge ({a}, {b}) references a place outside 0..{n - 1}")
            continue
        if a == b:
            problems.append(f"edge ({a}, {b}) is a self-loop")
            continue
        good_edges.append((a, b))
        for src, dst in ((a, b), (b, a)):
            hood = topology.edge_neighbourhood.get((src, dst))
            if hood is None:
                problems.append(f"edge ({src}, {dst}) has no neighbourhood")
                continue
            if src not in hood or dst not in hood:
                problems.append(f"neighbourhood of edge ({src}, {dst}) misses an endpoint")
            if any(not 0 <= p < n for p in hood):
                problems.append(f"neighbourhood of edge ({src}, {dst}) has unknown places")
    undirected = {tuple(sorted(e)) for e in topology.edges}
    for src, dst in sorted(topology.edge_neighbourhood):
        if tuple(sorted((src, dst))) not in undirected:
            problems.append(f"neighbourhood given for non-edge ({src}, {dst})")
    if not _is_connected(n, good_edges):
        problems.append("graph not connected")
    return problems


def _finish(n_places, edges, hoods, place_to_antenna, shape=None):
    if place_to_antenna is None:
        place_to_antenna = range(n_places)
    top = RpnTopology(
        n_places=n_places,
        edges=frozenset(edges),
        edge_neighbourhood=MappingProxyType(dict(hoods)),
        place_to_antenna=tuple(int(a) for a in place_to_antenna),
        shape=shape,
    )
    problems = validate(top)
    if problems:
        raise TopologyError(problems)
    return top


def build_custom(n_places, edges, neighbourhoods, place_to_antenna=None):
    """Build and validate an arbitrary topology.

    ``neighbourhoods`` is either a mapping from (directed or undirected) edge
    to its neighbourhood, or a sequence of place sets; in the latter case
    each edge is governed by the first set containing both endpoints.
    """
    norm_edges = {tuple(sorted((int(a), int(b)))) for a, b in edges}
    hoods = {}
    if isinstance(neighbourhoods, dict):
        for (a, b), hood in neighbourhoods.items():
            hood = tuple(int(p) for p in hood)
            hoods[(int(a), int(b))] = hood
            hoods.setdefault((int(b), int(a)), hood)
    else:
        sets = [tuple(int(p) for p in s) for s in neighbourhoods]
        for a, b in sorted(norm_edges):
            for s in sets:
                if a in s and b in s:
                    hoods[(a, b)] = hoods[(b, a)] = s
                    break
    return _finish(int(n_places), norm_edges, hoods, place_to_antenna)


def build_toroid(rows, cols, place_to_antenna=None):
    """Wrap-around ``rows x cols`` grid with Von Neumann links.

    When ``rows == 2`` (or ``cols == 2``) the up/down (left/right) links
    coincide; the duplicate keeps the left-neighbourhood assignment.
    """
    if rows < 2 or cols < 2:
        raise DomainError(f"toroid needs rows >= 2 and cols >= 2, got {rows}x{cols}")
    if rows * cols < 4:
        raise DomainError("toroid needs at least 4 places")

    def place(r, c):
        return (r % rows) * cols + (c % cols)

    def column(c):
        return tuple(place(r, c) for r in range(rows))

    edges = set()
    hoods = {}
    for p in range(rows * cols):
        r, c = divmod(p, cols)
        left_hood = column(c - 1) + column(c)
        right_hood = column(c) + column(c + 1)
        # left-hood moves first so they win when links coincide
        moves = (
            (place(r, c - 1), left_hood),
            (place(r + 1, c), left_hood),
            (place(r, c + 1), right_hood),
            (place(r - 1, c), right_hood),
        )
        for q, hood in moves:
            edges.add((min(p, q), max(p, q)))
            hoods.setdefault((p, q), tuple(dict.fromkeys(hood)))
    return _finish(rows * cols, edges, hoods, place_to_antenna, shape=(rows, cols))


def toroid_for(n_places, hood_size=None):
    """Toroid whose neighbourhoods hold ``hood_size`` places (default ``isqrt(n)``).

    Raises :class:`DomainError` when no ``rows x cols`` factorisation with
    ``2 * rows == hood_size`` exists.
    """
    from math import isqrt

    if hood_size is None:
        hood_size = isqrt(n_places)
    rows = max(2, hood_size // 2)
    if n_places % rows or n_places // rows < 2:
        raise DomainError(
            f"no toroid with {rows} rows (neighbourhood {hood_size}) for {n_places} places"
        )
    return build_toroid(rows, n_places // rows)


def to_text(topology):
    lines = ["# rpnsel topology v1", f"places {topology.n_places}"]
    if topology.shape:
        lines.append(f"shape {topology.shape[0]} {topology.shape[1]}")
    lines += [f"antenna {p} {a}" for p, a in enumerate(topology.place_to_antenna)]
    lines += [f"edge {a} {b}" for a, b in sorted(topology.edges)]
    for (a, b), hood in sorted(topology.edge_neighbourhood.items()):
        lines.append(f"hood {a} {b} : " + " ".join(str(p) for p in hood))
    return "\n".join(lines) + "\n"


def from_text(text):
    n_places = None
    shape = None
    antennas = {}
    edges = []
    hoods = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key == "places":
                n_places = int(rest[0])
            elif key == "shape":
                shape = (int(rest[0]), int(rest[1]))
            elif key == "antenna":
                antennas[int(rest[0])] = int(rest[1])
            elif key == "edge":
                edges.append((int(rest[0]), int(rest[1])))
            elif key == "hood":
                head, members = line[len("hood"):].split(":")
                a, b = (int(x) for x in head.split())
                hoods[(a, b)] = tuple(int(x) for x in members.split())
            else:
                raise ContractError(f"line {lineno}: unknown directive {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ContractError):
                raise
            raise ContractError(f"line {lineno}: malformed {key!r} directive") from exc
    if n_places is None:
        raise ContractError("topology text has no 'places' line")
    mapping = [antennas.get(p, p) for p in range(n_places)]
    norm_edges = {tuple(sorted(e)) for e in edges}
    return _finish(n_places, norm_edges, hoods, mapping, shape=shape)


def dump_topology(topology, path):
    Path(path).write_text(to_text(topology))


def load_topology(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"topology file not found: {path}")
    return from_text(path.read_text())
