import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rebvoter.models import (
    DUAL_PAIRS,
    Family,
    FlipEvent,
    ModelSpec,
    ParticleMenu,
    Representation,
    RingConfig,
    apply_flip,
    channels,
    dual_of,
    has_menu,
    interface_of,
    menu_table,
    parse_family,
    parse_representation,
    particle_menu,
    spin_flip_rate,
    total_rate,
    transitions_at,
)

S, I, M = Representation.SPIN, Representation.INTERFACE, Representation.MIRROR_DUAL
ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
ALL_SPECS = [ModelSpec(f, r) for f in Family for r in (S, I, M)
             if r is not M or f in (Family.ONE_SIDED, Family.MIXED_ONE_SIDED)]
MENU_SPECS = [s for s in ALL_SPECS if has_menu(s)]


def cfg(text):
    return RingConfig.from_string(text)


# ---------------------------------------------------------------- RingConfig

def test_ringconfig_caches_ones_and_parity():
    x = cfg("0110100")
    assert x.ones == 3 and x.parity == 1 and x.size == 7
    assert x[-1] == 0 and x[8] == 1  # indices wrap


def test_ringconfig_rejects_small_or_bad():
    with pytest.raises(ValueError):
        cfg("010")
    with pytest.raises(ValueError):
        RingConfig(np.array([0, 2, 0, 0]))
    with pytest.raises(ValueError):
        RingConfig(np.array([1, 0, 0, 0]), ones=2)


def test_ringconfig_is_immutable():
    x = cfg("1000")
    with pytest.raises(ValueError):
        x.bits[0] = 0


def test_int_roundtrip():
    for s in range(1 << 6):
        assert RingConfig.from_int(s, 6).to_int() == s


# ---------------------------------------------------------------- spin rates

def test_one_sided_spin_example():
    # x(i-2)=0, x(i-1)=1, x(i)=0 at i=2: both indicators fire
    x = cfg("01000")
    assert spin_flip_rate(ModelSpec(Family.ONE_SIDED, S, 0.3), x, 2) == pytest.approx(1.0)


@pytest.mark.parametrize("family", list(Family))
def test_constant_configurations_are_traps(family):
    for bits in ("000000", "111111"):
        x = cfg(bits)
        spec = ModelSpec(family, S, 0.4)
        assert all(spin_flip_rate(spec, x, i) == 0 for i in range(6))
        assert total_rate(spec, x) == 0


def test_two_sided_spin_example():
    # x(i-2..i+2) = 0,1,0,1,0 around i=2
    x = cfg("010100")
    assert spin_flip_rate(ModelSpec(Family.TWO_SIDED, S, 0.5), x, 2) == pytest.approx(1.0)


@given(st.lists(st.integers(0, 1), min_size=4, max_size=12), st.integers(0, 30),
       st.sampled_from(list(Family)), st.floats(0, 1))
def test_spin_rate_rotation_invariant(bits, k, family, alpha):
    x = RingConfig(np.array(bits, dtype=np.uint8))
    spec = ModelSpec(family, S, alpha)
    xr = x.rotate(k)
    for i in range(x.size):
        assert spin_flip_rate(spec, xr, i + k) == pytest.approx(spin_flip_rate(spec, x, i), abs=1e-15)


# ---------------------------------------------------------------- transitions

def test_one_sided_interface_example():
    y = cfg("00100")  # y(2)=1, y(1)=0
    ev = transitions_at(ModelSpec(Family.ONE_SIDED, I, 0.4), y, 2)
    assert ev == [FlipEvent(frozenset({2, 3}), pytest.approx(0.4))]


def test_mirror_dual_example():
    y = cfg("00100")  # y(2)=1, y(3)=0
    ev = transitions_at(ModelSpec(Family.ONE_SIDED, M, 0.4), y, 2)
    assert ev == [FlipEvent(frozenset({1, 2}), pytest.approx(0.4))]


def test_dbarw_example():
    y = cfg("001100")  # y(2)=y(3)=1
    ev = transitions_at(ModelSpec(Family.SWAPPING, I, 0.25), y, 2)
    got = {e.sites: e.rate for e in ev}
    assert got == {frozenset({2, 3}): pytest.approx(0.5), frozenset({1, 3}): pytest.approx(0.75)}


def test_sarw_has_no_branching_at_alpha_zero():
    spec = ModelSpec(Family.DISAGREEMENT, I, 0.0)
    for s in range(1 << 6):
        y = RingConfig.from_int(s, 6)
        for i in range(6):
            for e in transitions_at(spec, y, i):
                assert apply_flip(y, e).ones <= y.ones


def test_interface_representations_flip_pairs():
    for spec in ALL_SPECS:
        sizes = {len(ch.offsets) for ch in channels(spec)}
        if spec.representation is S:
            assert 1 in sizes
        else:
            assert sizes == {2}
            assert spec.flips_pairs


def test_interface_of_examples():
    assert str(interface_of(cfg("00110"))) == "01010"
    assert interface_of(cfg("11111")).ones == 0
    assert interface_of(cfg("010101")).ones == 6


@given(st.lists(st.integers(0, 1), min_size=4, max_size=16))
def test_interface_of_has_even_parity(bits):
    assert interface_of(RingConfig(np.array(bits, dtype=np.uint8))).parity == 0


def test_apply_flip_examples():
    y = cfg("10000")
    z = apply_flip(y, FlipEvent(frozenset({0, 1}), 1.0))
    assert str(z) == "01000" and z.ones == 1
    z = apply_flip(cfg("11000"), [0, 1])
    assert z.ones == 0 and z.parity == 0
    z = apply_flip(cfg("10100"), [1, 2])
    assert str(z) == "11000" and z.ones == 2


@given(st.lists(st.integers(0, 1), min_size=4, max_size=16),
       st.lists(st.tuples(st.integers(0, 100), st.integers(1, 3)), max_size=50))
def test_pair_flips_preserve_parity(bits, flips):
    y = RingConfig(np.array(bits, dtype=np.uint8))
    p = y.parity
    for s, d in flips:
        y = apply_flip(y, [s % y.size, (s + d) % y.size])
        assert y.parity == p
        assert y.ones == int(y.bits.sum())


@given(st.lists(st.integers(0, 1), min_size=4, max_size=10), st.integers(0, 9))
def test_spin_flip_changes_two_adjacent_kinks(bits, i):
    x = RingConfig(np.array(bits, dtype=np.uint8))
    i %= x.size
    before, after = interface_of(x), interface_of(apply_flip(x, [i]))
    changed = set(np.nonzero(before.bits ^ after.bits)[0])
    assert changed == {(i - 1) % x.size, i}


# ---------------------------------------------------------------- menus

def test_menu_examples():
    m = particle_menu(ModelSpec(Family.ONE_SIDED, I), 0.0)
    assert m.entries == (((1, 2), 1.0),)
    m = particle_menu(ModelSpec(Family.TWO_SIDED, I), 1.0)
    assert set(m.entries) == {((-1, 0), 0.5), ((0, 1), 0.5)}
    m = particle_menu(ModelSpec(Family.ONE_SIDED, I), 0.3)
    assert dict(m.entries) == {(0, 1): pytest.approx(0.3), (1, 2): pytest.approx(0.7)}
    assert m.rate == 1.0


@pytest.mark.parametrize("family", [Family.DISAGREEMENT, Family.SWAPPING])
def test_menu_rejects_non_uniform_kernels(family):
    with pytest.raises(ValueError):
        particle_menu(ModelSpec(family, I), 0.5)


def test_menu_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        ParticleMenu((((0, 1), 0.5),))


def _aggregate_menu(spec, y, alpha):
    menu = particle_menu(spec, alpha)
    out = Counter()
    for j in np.nonzero(y.bits)[0]:
        for offs, p in menu.entries:
            out[frozenset((int(j) + o) % y.size for o in offs)] += p * menu.rate
    return out


def _aggregate_scan(spec, y, alpha):
    spec = spec.with_alpha(alpha)
    out = Counter()
    for i in range(y.size):
        for e in transitions_at(spec, y, i):
            out[e.sites] += e.rate
    return out


def _close(a, b):
    keys = {k for k, v in a.items() if abs(v) > 1e-14} | {k for k, v in b.items() if abs(v) > 1e-14}
    return all(abs(a.get(k, 0) - b.get(k, 0)) < 1e-12 for k in keys)


@pytest.mark.parametrize("spec", MENU_SPECS, ids=lambda s: f"{s.family.value}-{s.representation.value}")
@pytest.mark.parametrize("N", [5, 6, 7, 8])
def test_menu_matches_transition_scan_exhaustively(spec, N):
    for alpha in ALPHAS:
        for s in range(1 << N):
            y = RingConfig.from_int(s, N)
            assert _close(_aggregate_menu(spec, y, alpha), _aggregate_scan(spec, y, alpha)), (s, alpha)


def test_reflected_one_sided_menu_is_the_mirror_menu():
    for a in (0.0, 0.3, 1.0):
        left = particle_menu(ModelSpec(Family.ONE_SIDED, I), a).reflected()
        mirror = particle_menu(ModelSpec(Family.ONE_SIDED, M), a)
        assert set(left.entries) == set((tuple(sorted(o)), p) for o, p in mirror.entries)


def test_two_sided_menu_is_reflection_symmetric():
    m = particle_menu(ModelSpec(Family.TWO_SIDED, I), 0.37)
    assert set(m.reflected().entries) == set(m.entries)


@pytest.mark.parametrize("N", [5, 6, 7, 8])
def test_reflection_equivariance_of_rate_tables(N):
    # reflecting the ring maps one-sided interface rates onto mirror rates
    refl = lambda y: RingConfig(y.bits[(-np.arange(N)) % N])  # noqa: E731
    a = 0.35
    for s in range(1 << N):
        y = RingConfig.from_int(s, N)
        agg = _aggregate_scan(ModelSpec(Family.ONE_SIDED, I), y, a)
        mirrored = Counter({frozenset((-k) % N for k in sites): r for sites, r in agg.items()})
        assert _close(mirrored, _aggregate_scan(ModelSpec(Family.ONE_SIDED, M), refl(y), a))


def test_menu_table_shapes():
    offs, p0, p1 = menu_table(ModelSpec(Family.TWO_SIDED, I))
    assert offs.shape == (4, 2) and p0.shape == p1.shape == (4,)
    for a in (0.0, 0.5, 1.0):
        assert (p0 + p1 * a).sum() == pytest.approx(1.0)


# ---------------------------------------------------------------- specs

def test_mirror_dual_only_for_one_sided_families():
    with pytest.raises(ValueError):
        ModelSpec(Family.TWO_SIDED, M)
    ModelSpec(Family.ONE_SIDED, M)
    ModelSpec(Family.MIXED_ONE_SIDED, M)


def test_alpha_range_checked():
    with pytest.raises(ValueError):
        ModelSpec(Family.ONE_SIDED, I, 1.5)


def test_dual_pairings():
    assert dual_of(ModelSpec(Family.ONE_SIDED, S, 0.2)) == ModelSpec(Family.ONE_SIDED, M, 0.2)
    assert dual_of(ModelSpec(Family.TWO_SIDED, S)).representation is I
    assert dual_of(ModelSpec(Family.DISAGREEMENT, S)).family is Family.SWAPPING
    assert dual_of(ModelSpec(Family.SWAPPING, S)).family is Family.DISAGREEMENT
    assert set(DUAL_PAIRS) == set(Family)
    with pytest.raises(ValueError):
        dual_of(ModelSpec(Family.ONE_SIDED, I))


def test_name_parsing():
    assert parse_family("rv") is Family.TWO_SIDED
    assert parse_family("One-Sided") is Family.ONE_SIDED
    assert parse_representation("dual") is M
    with pytest.raises(ValueError):
        parse_family("voter")
    with pytest.raises(ValueError):
        parse_representation("kinks")


def test_vectorised_rates_agree_with_scalar():
    # the same channel lambdas are evaluated on integer arrays by the exact module
    N = 6
    states = np.arange(1 << N)
    for spec in ALL_SPECS:
        spec = spec.with_alpha(0.3)
        for i, ch in itertools.product(range(N), channels(spec)):
            vec = np.broadcast_to(np.asarray(ch.rate(lambda k: (states >> ((i + k) % N)) & 1, 0.3),
                                             dtype=float), states.shape)
            for s in (0, 5, 21, 42, 63):
                y = RingConfig.from_int(s, N)
                assert vec[s] == pytest.approx(float(ch.rate(lambda k: y[i + k], 0.3)))
