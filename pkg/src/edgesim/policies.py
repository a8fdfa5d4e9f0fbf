"""Cache-eviction policies: probabilistic (pcache), LRU, fixed caching, no-cache."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import ConfigError, ContractError
from .model import NodeState

POLICY_NAMES = ("pcache", "lru", "fc", "nocache")


@dataclass
class EvictionDistribution:
    """Eviction probability per cached type; sums to one over the support."""

    probs: dict[int, float]

    def __post_init__(self):
        if not self.probs:
            raise ContractError("eviction distribution needs a non-empty support")
        if any(p < 0 for p in self.probs.values()):
            raise ContractError("eviction probabilities must be >= 0")
        s = sum(self.probs.values())
        if abs(s - 1.0) > 1e-9:
            raise ContractError(f"eviction probabilities sum to {s!r}, not 1")


def pcache_distribution(state: NodeState, catalog, now: int, freq=None, last_used=None) -> EvictionDistribution:
    """Eviction distribution over the node's cached types.

    A type's weight is its memory footprint divided by (invocation count +
    last-invocation interval), so large, rarely and long-ago used containers
    are the likeliest victims. Only types with an idle cached container are in
    the support.
    """
    freq = state.freq if freq is None else freq
    last_used = state.last_used if last_used is None else last_used
    weights = {}
    for f in catalog:
        n = f.id
        if state.cache[n] < 1:
            continue
        denom = freq[n] + last_used[n]
        if denom <= 0:
            raise ContractError(
                f"node {state.node_id}: cached type {n} has freq + last_used = {denom}; "
                "a cached container must have been invoked"
            )
        weights[n] = f.mem_mb / denom
    if not weights:
        raise ContractError(f"node {state.node_id}: no cached containers to evict")
    total = sum(weights.values())
    return EvictionDistribution({n: w / total for n, w in sorted(weights.items())})


def pcache_select_victim(state: NodeState, catalog, now: int, rng, freq=None, last_used=None) -> int:
    """Sample one victim type by inverse CDF over ascending type id."""
    dist = pcache_distribution(state, catalog, now, freq, last_used)
    r = rng.random()
    acc = 0.0
    last = None
    for n, p in dist.probs.items():
        acc += p
        last = n
        if r < acc:
            return n
    return last  # guard against accumulated rounding


def lru_select_victim(state: NodeState, catalog, now: int = 0, last_used=None) -> int:
    """Cached type with the smallest last-invocation interval; ties to lower id."""
    last_used = state.last_used if last_used is None else last_used
    best = None
    for f in catalog:
        n = f.id
        if state.cache[n] < 1:
            continue
        key = (last_used[n], n)
        if best is None or key < best:
            best = key
    if best is None:
        raise ContractError(f"node {state.node_id}: no cached containers to evict")
    return best[1]


class EvictionPolicy:
    """Behaviour contract shared by all policies.

    on_invocation keeps the per-type statistics (shared bookkeeping for every
    policy), select_victim picks a cached type to destroy under capacity
    pressure, end_of_interval returns (type, count) pairs to destroy after
    service completes.
    """

    name = "?"

    def __init__(self, n_types: int, global_stats: bool = False):
        self.n_types = n_types
        self.global_stats = global_stats
        if global_stats:
            self.freq = [0] * n_types
            self.last_used = [0] * n_types

    def on_invocation(self, state: NodeState, ftype: int, now: int, count: int = 1) -> None:
        state.freq[ftype] += count
        state.last_used[ftype] = now
        if self.global_stats:
            self.freq[ftype] += count
            self.last_used[ftype] = now

    def _stats(self, state: NodeState):
        if self.global_stats:
            return self.freq, self.last_used
        return state.freq, state.last_used

    def select_victim(self, state: NodeState, catalog, rng, now: int) -> int:
        raise NotImplementedError

    def end_of_interval(self, state: NodeState, now: int) -> list[tuple[int, int]]:
        return []


class PCache(EvictionPolicy):
    name = "pcache"

    def select_victim(self, state, catalog, rng, now):
        freq, last_used = self._stats(state)
        return pcache_select_victim(state, catalog, now, rng, freq, last_used)


class LRU(EvictionPolicy):
    name = "lru"

    def select_victim(self, state, catalog, rng, now):
        _, last_used = self._stats(state)
        return lru_select_victim(state, catalog, now, last_used)


class FixedCaching(EvictionPolicy):
    """Keeps a container alive for a fixed number of idle intervals.

    Tracks per-container cache-entry timestamps (oldest first); hits and
    pressure evictions retire the oldest entries, the end-of-interval sweep
    destroys entries whose idle age reached the ttl.
    """

    name = "fc"

    def __init__(self, n_types: int, ttl: int = 10, global_stats: bool = False):
        super().__init__(n_types, global_stats)
        if ttl < 0:
            raise ConfigError("fc ttl must be >= 0")
        self.ttl = ttl
        self._entries: dict[int, list[deque]] = {}

    def _node_entries(self, state: NodeState) -> list[deque]:
        entries = self._entries.get(state.node_id)
        if entries is None:
            entries = [deque() for _ in range(self.n_types)]
            self._entries[state.node_id] = entries
        return entries

    def _sync_consumed(self, state: NodeState, entries: list[deque]) -> None:
        # Cache counts only shrink mid-interval; drop the oldest entries that
        # were consumed by hits or destroyed by evictions since the last sync.
        for n in range(self.n_types):
            dq = entries[n]
            while len(dq) > state.cache[n]:
                dq.popleft()

    def select_victim(self, state, catalog, rng, now):
        entries = self._node_entries(state)
        self._sync_consumed(state, entries)
        best = None
        for n in range(self.n_types):
            if state.cache[n] < 1:
                continue
            entered = entries[n][0] if entries[n] else now
            key = (entered, n)
            if best is None or key < best:
                best = key
        if best is None:
            raise ContractError(f"node {state.node_id}: no cached containers to evict")
        return best[1]

    def end_of_interval(self, state, now):
        entries = self._node_entries(state)
        self._sync_consumed(state, entries)
        for n in range(self.n_types):
            while len(entries[n]) < state.cache[n]:
                entries[n].append(now)  # containers cached after serving this interval
        destroy = []
        for n in range(self.n_types):
            dq = entries[n]
            count = 0
            while dq and now - dq[0] >= self.ttl:
                dq.popleft()
                count += 1
            if count:
                destroy.append((n, count))
        return destroy


class NoCache(EvictionPolicy):
    """Destroys every container as soon as service completes (the baseline)."""

    name = "nocache"

    def select_victim(self, state, catalog, rng, now):
        return lru_select_victim(state, catalog, now, self._stats(state)[1])

    def end_of_interval(self, state, now):
        return [(n, state.cache[n]) for n in range(self.n_types) if state.cache[n]]


def make_policy(name: str, n_types: int, ttl: int = 10, global_stats: bool = False) -> EvictionPolicy:
    if name == "pcache":
        return PCache(n_types, global_stats)
    if name == "lru":
        return LRU(n_types, global_stats)
    if name == "fc":
        return FixedCaching(n_types, ttl=ttl, global_stats=global_stats)
    if name == "nocache":
        return NoCache(n_types, global_stats)
    raise ConfigError(f"unknown policy {name!r}; valid policies: {', '.join(POLICY_NAMES)}")
