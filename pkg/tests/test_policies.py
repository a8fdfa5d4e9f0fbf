import numpy as np
import pytest

from edgesim.errors import ConfigError, ContractError
from edgesim.model import DEFAULT_CATALOG, FunctionType, NodeState
from edgesim.policies import (
    EvictionDistribution,
    FixedCaching,
    LRU,
    NoCache,
    PCache,
    lru_select_victim,
    make_policy,
    pcache_distribution,
    pcache_select_victim,
)

WEB, FILEPROC, CHECKOUT, IMGREC = DEFAULT_CATALOG


def _state(cache=None, freq=None, last_used=None, n_types=4):
    state = NodeState(0, n_types)
    for n, c in (cache or {}).items():
        state.cache[n] = c
    for n, c in (freq or {}).items():
        state.freq[n] = c
    for n, c in (last_used or {}).items():
        state.last_used[n] = c
    return state


def test_distribution_single_cached_type():
    state = _state(cache={WEB.id: 2}, freq={WEB.id: 3}, last_used={WEB.id: 5})
    dist = pcache_distribution(state, DEFAULT_CATALOG, now=6)
    assert dist.probs == {WEB.id: 1.0}


def test_distribution_symmetric_weights():
    catalog = (FunctionType(0, 100.0), FunctionType(1, 100.0))
    state = _state(cache={0: 1, 1: 1}, freq={0: 4, 1: 7}, last_used={0: 6, 1: 3}, n_types=2)
    dist = pcache_distribution(state, catalog, now=7)
    assert dist.probs[0] == pytest.approx(0.5)
    assert dist.probs[1] == pytest.approx(0.5)


def test_distribution_checkout_vs_web_sizes():
    # 332 and 55 MB with equal freq + recency denominators
    state = _state(
        cache={WEB.id: 1, CHECKOUT.id: 1},
        freq={WEB.id: 4, CHECKOUT.id: 4},
        last_used={WEB.id: 6, CHECKOUT.id: 6},
    )
    dist = pcache_distribution(state, DEFAULT_CATALOG, now=7)
    assert dist.probs[CHECKOUT.id] == pytest.approx(0.858, abs=1e-3)
    assert dist.probs[WEB.id] == pytest.approx(0.142, abs=1e-3)
    assert sum(dist.probs.values()) == pytest.approx(1.0, abs=1e-9)


def test_distribution_excludes_uncached_types():
    state = _state(
        cache={WEB.id: 1},
        freq={WEB.id: 1, CHECKOUT.id: 50},
        last_used={WEB.id: 1, CHECKOUT.id: 50},
    )
    dist = pcache_distribution(state, DEFAULT_CATALOG, now=50)
    assert set(dist.probs) == {WEB.id}


def test_distribution_empty_cache_rejected():
    state = _state()
    with pytest.raises(ContractError):
        pcache_distribution(state, DEFAULT_CATALOG, now=1)


def test_distribution_zero_denominator_guard():
    state = _state(cache={WEB.id: 1})  # freq and last_used both 0: invariant broken
    with pytest.raises(ContractError):
        pcache_distribution(state, DEFAULT_CATALOG, now=1)


def test_distribution_monotone_in_size_freq_recency():
    base = dict(cache={0: 1, 1: 1}, n_types=2)
    catalog_small = (FunctionType(0, 100.0), FunctionType(1, 100.0))
    catalog_big = (FunctionType(0, 200.0), FunctionType(1, 100.0))
    s = _state(freq={0: 5, 1: 5}, last_used={0: 5, 1: 5}, **base)
    p_small = pcache_distribution(s, catalog_small, now=6).probs[0]
    p_big = pcache_distribution(s, catalog_big, now=6).probs[0]
    assert p_big > p_small  # larger memory footprint -> likelier victim

    s_hot = _state(freq={0: 50, 1: 5}, last_used={0: 5, 1: 5}, **base)
    p_hot = pcache_distribution(s_hot, catalog_small, now=6).probs[0]
    assert p_hot < p_small  # more invocations -> safer

    s_recent = _state(freq={0: 5, 1: 5}, last_used={0: 50, 1: 5}, **base)
    p_recent = pcache_distribution(s_recent, catalog_small, now=51).probs[0]
    assert p_recent < p_small  # more recent -> safer


def test_select_victim_single_type():
    state = _state(cache={IMGREC.id: 1}, freq={IMGREC.id: 1}, last_used={IMGREC.id: 1})
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert pcache_select_victim(state, DEFAULT_CATALOG, 2, rng) == IMGREC.id


def test_select_victim_balanced_frequencies():
    catalog = (FunctionType(0, 100.0), FunctionType(1, 100.0))
    state = _state(cache={0: 1, 1: 1}, freq={0: 3, 1: 3}, last_used={0: 4, 1: 4}, n_types=2)
    rng = np.random.default_rng(7)
    hits = sum(pcache_select_victim(state, catalog, 5, rng) == 0 for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_select_victim_deterministic_sequence():
    state = _state(
        cache={WEB.id: 1, CHECKOUT.id: 1},
        freq={WEB.id: 2, CHECKOUT.id: 2},
        last_used={WEB.id: 3, CHECKOUT.id: 3},
    )
    seq_a = [pcache_select_victim(state, DEFAULT_CATALOG, 4, np.random.default_rng(9)) for _ in range(1)]
    seq_b = [pcache_select_victim(state, DEFAULT_CATALOG, 4, np.random.default_rng(9)) for _ in range(1)]
    rng_a = np.random.default_rng(13)
    rng_b = np.random.default_rng(13)
    seq_a += [pcache_select_victim(state, DEFAULT_CATALOG, 4, rng_a) for _ in range(50)]
    seq_b += [pcache_select_victim(state, DEFAULT_CATALOG, 4, rng_b) for _ in range(50)]
    assert seq_a == seq_b


def test_select_victim_chi_square_fit():
    scipy_stats = pytest.importorskip("scipy.stats")
    state = _state(
        cache={WEB.id: 1, FILEPROC.id: 1, CHECKOUT.id: 1, IMGREC.id: 1},
        freq={0: 9, 1: 2, 2: 5, 3: 1},
        last_used={0: 11, 1: 4, 2: 9, 3: 12},
    )
    dist = pcache_distribution(state, DEFAULT_CATALOG, now=12)
    rng = np.random.default_rng(2024)
    draws = 10_000
    observed = [0, 0, 0, 0]
    for _ in range(draws):
        observed[pcache_select_victim(state, DEFAULT_CATALOG, 12, rng)] += 1
    expected = [dist.probs[n] * draws for n in range(4)]
    result = scipy_stats.chisquare(observed, expected)
    assert result.pvalue >= 0.01


def test_lru_single_and_ordering():
    state = _state(cache={WEB.id: 1}, last_used={WEB.id: 3})
    assert lru_select_victim(state, DEFAULT_CATALOG) == WEB.id
    state = _state(
        cache={WEB.id: 1, CHECKOUT.id: 1},
        last_used={WEB.id: 7, CHECKOUT.id: 3},
    )
    assert lru_select_victim(state, DEFAULT_CATALOG) == CHECKOUT.id


def test_lru_tie_breaks_to_lower_id():
    state = _state(cache={0: 1, 2: 1}, last_used={0: 5, 2: 5})
    assert lru_select_victim(state, DEFAULT_CATALOG) == 0


def test_lru_empty_cache_rejected():
    with pytest.raises(ContractError):
        lru_select_victim(_state(), DEFAULT_CATALOG)


def test_fc_fresh_container_survives():
    fc = FixedCaching(n_types=4, ttl=10)
    state = _state()
    state.cache[WEB.id] = 1
    state.freq[WEB.id] = 1
    assert fc.end_of_interval(state, now=5) == []  # entered at 5, age 0


def test_fc_destroys_at_exact_ttl():
    fc = FixedCaching(n_types=4, ttl=10)
    state = _state(cache={WEB.id: 1}, freq={WEB.id: 1})
    assert fc.end_of_interval(state, now=1) == []
    for now in range(2, 11):
        assert fc.end_of_interval(state, now=now) == []
    assert fc.end_of_interval(state, now=11) == [(WEB.id, 1)]


def test_fc_mixed_ages():
    # entries aged 3, 10, 12 with ttl 10: the 10 and 12 go
    fc = FixedCaching(n_types=4, ttl=10)
    state = _state(freq={WEB.id: 3})
    state.cache[WEB.id] = 1
    fc.end_of_interval(state, now=1)  # entered at 1
    state.cache[WEB.id] = 2
    fc.end_of_interval(state, now=3)  # second entered at 3
    state.cache[WEB.id] = 3
    fc.end_of_interval(state, now=10)  # third entered at 10
    destroy = fc.end_of_interval(state, now=13)  # ages 12, 10, 3
    assert destroy == [(WEB.id, 2)]


def test_fc_victim_is_oldest_entry():
    fc = FixedCaching(n_types=4, ttl=100)
    state = _state(freq={WEB.id: 1, CHECKOUT.id: 1})
    state.cache[CHECKOUT.id] = 1
    fc.end_of_interval(state, now=1)
    state.cache[WEB.id] = 1
    fc.end_of_interval(state, now=4)
    rng = np.random.default_rng(0)
    assert fc.select_victim(state, DEFAULT_CATALOG, rng, now=5) == CHECKOUT.id


def test_fc_ttl_zero_flushes_everything():
    fc = FixedCaching(n_types=4, ttl=0)
    state = _state(cache={WEB.id: 2, IMGREC.id: 1}, freq={WEB.id: 2, IMGREC.id: 1})
    assert fc.end_of_interval(state, now=3) == [(WEB.id, 2), (IMGREC.id, 1)]


def test_fc_negative_ttl_rejected():
    with pytest.raises(ConfigError):
        FixedCaching(n_types=4, ttl=-1)


def test_nocache_flushes_cache():
    policy = NoCache(n_types=4)
    state = _state(cache={WEB.id: 2, CHECKOUT.id: 1}, freq={WEB.id: 2, CHECKOUT.id: 1})
    assert policy.end_of_interval(state, now=1) == [(WEB.id, 2), (CHECKOUT.id, 1)]


def test_on_invocation_statistics():
    policy = PCache(n_types=4)
    state = _state()
    policy.on_invocation(state, WEB.id, now=4)
    assert state.freq[WEB.id] == 1
    assert state.last_used[WEB.id] == 4
    policy.on_invocation(state, WEB.id, now=4)
    assert state.freq[WEB.id] == 2
    for now in (6, 5, 9):
        policy.on_invocation(state, WEB.id, now=now)
    assert state.last_used[WEB.id] == 9
    assert state.freq[WEB.id] == 5


def test_global_stats_shared_across_nodes():
    policy = PCache(n_types=2, global_stats=True)
    a, b = NodeState(0, 2), NodeState(1, 2)
    policy.on_invocation(a, 0, now=2)
    policy.on_invocation(b, 0, now=5)
    policy.on_invocation(b, 1, now=5)
    assert policy.freq[0] == 2 and policy.last_used[0] == 5
    # node b caches both types; with global stats type 0 is busier, so under
    # equal sizes type 1 is the likelier victim
    catalog = (FunctionType(0, 100.0), FunctionType(1, 100.0))
    b.cache = [1, 1]
    freq, last = policy._stats(b)
    dist = pcache_distribution(b, catalog, now=6, freq=freq, last_used=last)
    assert dist.probs[1] > dist.probs[0]


def test_make_policy_names():
    for name in ("pcache", "lru", "fc", "nocache"):
        assert make_policy(name, 4).name == name
    with pytest.raises(ConfigError):
        make_policy("bogus", 4)


def test_eviction_distribution_validation():
    with pytest.raises(ContractError):
        EvictionDistribution({})
    with pytest.raises(ContractError):
        EvictionDistribution({0: 0.4, 1: 0.4})
    with pytest.raises(ContractError):
        EvictionDistribution({0: 1.5, 1: -0.5})
