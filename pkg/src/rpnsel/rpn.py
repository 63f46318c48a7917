"""Token-passing antenna selection on a place graph.

Each place (antenna) holds at most one token; tokens mark the active
antennas. A token may cross an edge to an empty neighbour when doing so
strictly raises the sum-capacity of the tokens inside the neighbourhood
attached to that directed edge. Passes visit places in a seeded random
order and apply moves immediately, so later visits in the same pass see
the updated marking. The run stops after a pass with no moves.

Tokens are only ever moved, never created or destroyed, so every run is
replayable backwards from its firing trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ContractError, check_channel, check_count
from .flops import FlopLedger
from .numerics import mean_capacity, subset_capacity

GUARD_TOL = 1e-12
DEFAULT_MAX_PASSES = 20
GUARD_MODES = ("shared", "directed")

_TRACE_HEADER = "pass\tfrom\tto\tdelta"


@dataclass
class SelectionState:
    """Token marking over the places of ``topology``."""

    topology: object
    tokens: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=bool).copy()
        if self.tokens.shape != (self.topology.n_places,):
            raise ContractError("token vector length must equal n_places")
        if not 1 <= self.token_count <= self.topology.n_places:
            raise ContractError("a marking needs at least one token")

    @property
    def token_count(self):
        return int(self.tokens.sum())

    def marked(self):
        return np.flatnonzero(self.tokens)

    def selected_antennas(self):
        places = self.marked()
        return np.sort(np.asarray(self.topology.place_to_antenna)[places])

    def move(self, src, dst):
        if not self.tokens[src] or self.tokens[dst]:
            raise ContractError(f"cannot move token {src} -> {dst}")
        self.tokens[src] = False
        self.tokens[dst] = True

    def copy(self):
        return SelectionState(self.topology, self.tokens)

    def __eq__(self, other):
        return (
            isinstance(other, SelectionState)
            and self.topology is other.topology
            and np.array_equal(self.tokens, other.tokens)
        )


@dataclass(frozen=True)
class Transition:
    src: int
    dst: int
    neighbourhood: tuple
    delta: float
    c_before: float
    c_after: float
    enabled: bool = True


@dataclass(frozen=True)
class Firing:
    pass_index: int
    src: int
    dst: int
    delta: float


@dataclass
class RunStats:
    passes: int = 0
    firings: int = 0
    initial_capacity: float = 0.0
    final_capacity: float = 0.0
    flops: int = 0
    converged: bool = False
    trace: list = field(default_factory=list, repr=False)


class _Guard:
    """Neighbourhood capacity oracle with flop accounting.

    Capacities are computed from a precomputed per-subcarrier Gram matrix
    over all places, padded with one all-zero place so that token sets of
    different sizes can share a single batched factorisation. The ledger is
    charged per distinct capacity evaluation with the analytic cost model.
    """

    def __init__(self, state, H, rho, mode, scaling, ledger, algorithm):
        coeffs = check_channel(H)
        top = state.topology
        if coeffs.shape[1] != top.n_places:
            raise ContractError(
                f"channel has {coeffs.shape[1]} antennas but topology has {top.n_places} places"
            )
        if scaling not in ("local", "global"):
            raise ContractError(f"guard_scaling must be 'local' or 'global', got {scaling!r}")
        if mode not in GUARD_MODES:
            raise ContractError(f"guard_mode must be one of {GUARD_MODES}, got {mode!r}")
        n_sub, n, n_users = coeffs.shape
        by_place = coeffs[:, list(top.place_to_antenna), :]
        gram = np.zeros((n_sub, n + 1, n + 1), dtype=complex)
        gram[:, :n, :n] = by_place @ by_place.conj().transpose(0, 2, 1)
        self.gram = gram
        self.pad = n
        self.n_sub = n_sub
        self.n_users = n_users
        self.rho = float(rho)
        self.global_count = state.token_count if scaling == "global" else None
        self.mode = mode
        self.ledger = ledger
        self.algorithm = algorithm
        self.hood = top.neighbourhood

    def capacities(self, place_sets, hood_sizes):
        """Subcarrier-averaged capacity of each place set (uniform power)."""
        if not place_sets:
            return np.zeros(0)
        sizes = np.array([len(s) for s in place_sets])
        if self.ledger is not None:
            for m, s in zip(sizes, hood_sizes):
                self.ledger.charge_capacity(
                    self.algorithm, "guard", int(m), self.n_users, self.n_sub, hood_size=s
                )
        width = max(1, int(sizes.max()))
        idx = np.full((len(place_sets), width), self.pad)
        for i, s in enumerate(place_sets):
            idx[i, : len(s)] = s
        n_scale = np.full(len(sizes), self.global_count) if self.global_count else sizes
        scale = self.rho / np.maximum(n_scale, 1)
        A = self.gram[:, idx[:, :, None], idx[:, None, :]] * scale[None, :, None, None]
        diag = np.arange(width)
        A[..., diag, diag] += 1.0
        L = np.linalg.cholesky(A)
        logdet = 2.0 * np.log(np.abs(L[..., diag, diag])).sum(axis=-1)
        return logdet.mean(axis=0) / np.log(2.0)

    def moves(self, tokens, src, dsts):
        """Evaluate the moves ``src -> dst`` for each ``dst`` against ``tokens``."""
        jobs = {}
        hood_sizes = {}
        plans = []
        for dst in dsts:
            hoods = [self.hood(src, dst)]
            if self.mode == "shared":
                back = self.hood(dst, src)
                if set(back) != set(hoods[0]):
                    hoods.append(back)
            plan = []
            for hood in hoods:
                held = tuple(p for p in hood if tokens[p])
                after = tuple(dst if p == src else p for p in held)
                for key in (held, after):
                    jobs.setdefault(key, len(jobs))
                    hood_sizes.setdefault(key, len(hood))
                plan.append((jobs[held], jobs[after]))
            plans.append((dst, hoods[0], plan))
        caps = self.capacities(list(jobs), [hood_sizes[k] for k in jobs])
        out = []
        for dst, hood, plan in plans:
            (b, a), *others = plan
            delta = float(caps[a] - caps[b])
            enabled = delta > GUARD_TOL and all(
                caps[a2] - caps[b2] > GUARD_TOL for b2, a2 in others
            )
            out.append(
                Transition(src, int(dst), hood, delta, float(caps[b]), float(caps[a]), enabled)
            )
        return out


def init_state(topology, n_tokens, seed=None):
    """Uniformly random marking with ``n_tokens`` tokens."""
    n_tokens = check_count(n_tokens, "n_tokens", 1, topology.n_places)
    rng = np.random.default_rng(seed)
    tokens = np.zeros(topology.n_places, dtype=bool)
    tokens[rng.choice(topology.n_places, size=n_tokens, replace=False)] = True
    return SelectionState(topology, tokens)


def enabled_transitions(state, H, rho, guard_mode="shared", guard_scaling="local",
                        ledger=None, algorithm="rpn"):
    """All token moves whose guard currently holds, ordered by (src, dst).

    ``delta`` is the capacity gain in the neighbourhood governing the
    directed edge. With ``guard_mode="shared"`` a move across an edge whose
    two directions are governed by different neighbourhoods must also
    strictly improve the reverse-direction neighbourhood.
    """
    guard = _Guard(state, H, rho, guard_mode, guard_scaling, ledger, algorithm)
    found = []
    for src in state.marked():
        dsts = [q for q in state.topology.neighbours(src) if not state.tokens[q]]
        found += [t for t in guard.moves(state.tokens, int(src), dsts) if t.enabled]
    return found


def _best_move(guard, state, src):
    dsts = [q for q in state.topology.neighbours(src) if not state.tokens[q]]
    best = None
    # neighbours are sorted, so strict ">" keeps the lowest destination on ties
    for t in guard.moves(state.tokens, src, dsts):
        if t.enabled and (best is None or t.delta > best.delta):
            best = t
    return best


def step(state, H, rho, rng, pass_index=0, guard_mode="shared", guard_scaling="local",
         ledger=None, algorithm="rpn", _guard=None):
    """Run one asynchronous pass over ``state`` in place.

    Places are visited in ``rng``-drawn order; each token-holding place
    fires its best enabled move. Returns the list of firings; an empty list
    means the marking is a fixpoint.
    """
    guard = _guard or _Guard(state, H, rho, guard_mode, guard_scaling, ledger, algorithm)
    fired = []
    for src in rng.permutation(state.topology.n_places):
        src = int(src)
        if not state.tokens[src]:
            continue
        move = _best_move(guard, state, src)
        if move is not None:
            state.move(move.src, move.dst)
            fired.append(Firing(pass_index, move.src, move.dst, move.delta))
    return fired


def run_to_fixpoint(state, H, rho, max_passes=DEFAULT_MAX_PASSES, ledger=None, seed=None,
                    guard_mode="shared", guard_scaling="local", algorithm="rpn"):
    """Iterate passes until one fires nothing or ``max_passes`` is spent.

    ``state`` is not modified; the final marking is returned with its
    :class:`RunStats`. ``stats.converged`` is false when the pass budget
    ran out before a quiet pass.
    """
    max_passes = check_count(max_passes, "max_passes", 1)
    coeffs = check_channel(H)
    run_ledger = ledger.spawn() if ledger is not None else FlopLedger()
    guard = _Guard(state, coeffs, rho, guard_mode, guard_scaling, run_ledger, algorithm)
    rng = np.random.default_rng(seed)
    current = state.copy()
    stats = RunStats(initial_capacity=subset_capacity(coeffs, current.selected_antennas(), rho))
    for pass_index in range(max_passes):
        fired = step(current, coeffs, rho, rng, pass_index, _guard=guard)
        stats.passes += 1
        stats.trace.extend(fired)
        if not fired:
            stats.converged = True
            break
    stats.firings = len(stats.trace)
    stats.final_capacity = subset_capacity(coeffs, current.selected_antennas(), rho)
    stats.flops = run_ledger.total()
    if ledger is not None:
        ledger.merge(run_ledger)
    return current, stats


@dataclass
class RaceResult:
    best: SelectionState
    best_index: int
    states: list
    stats: list

    @property
    def capacities(self):
        return [s.final_capacity for s in self.stats]


def race(topology, H, rho, n_tokens, k=5, seed=None, max_passes=DEFAULT_MAX_PASSES,
         guard_mode="shared", guard_scaling="local", ledger=None, algorithm="rpn"):
    """Run ``k`` independently seeded selections and keep the best one.

    Members are ranked by the subcarrier-averaged capacity of their whole
    selection under uniform power; ties go to the lowest member index.
    """
    k = check_count(k, "k", 1)
    coeffs = check_channel(H)
    children = np.random.SeedSequence(seed).spawn(k)
    states, stats = [], []
    for child in children:
        init_seed, order_seed = child.generate_state(2)
        start = init_state(topology, n_tokens, int(init_seed))
        final, st = run_to_fixpoint(
            start, coeffs, rho, max_passes, ledger, int(order_seed),
            guard_mode, guard_scaling, algorithm,
        )
        states.append(final)
        stats.append(st)
    if ledger is not None:
        n_sub, _, n_users = coeffs.shape
        for _ in range(k):
            ledger.charge_capacity(algorithm, "select", n_tokens, n_users, n_sub)
    caps = [s.final_capacity for s in stats]
    best = int(np.argmax(caps))
    return RaceResult(states[best], best, states, stats)


def format_trace(trace):
    """Render firings as tab-separated ``pass from to delta`` lines."""
    lines = [_TRACE_HEADER]
    lines += [f"{f.pass_index}\t{f.src}\t{f.dst}\t{f.delta!r}" for f in trace]
    return "\n".join(lines) + "\n"


def parse_trace(text):
    rows = text.strip().splitlines()
    if not rows or rows[0] != _TRACE_HEADER:
        raise ContractError("trace text must start with the 'pass from to delta' header")
    out = []
    for row in rows[1:]:
        p, a, b, d = row.split("\t")
        out.append(Firing(int(p), int(a), int(b), float(d)))
    return out


def replay_backward(final_state, trace):
    """Undo ``trace`` from ``final_state``, returning the initial marking."""
    state = final_state.copy()
    for f in reversed(trace):
        state.move(f.dst, f.src)
    return state
