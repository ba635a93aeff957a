import math

import mpmath
import pytest

from fraclap import theory as th


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_gaussian_l2_exponents(N):
    assert th.gaussian_decay_exponent(N, 2) == -N / 4
    assert th.gaussian_decay_exponent(N, 2, 1) == -N / 4 - 0.5
    assert th.gaussian_decay_exponent(N, 1) == 0.0


def test_young_triples():
    assert th.young_triple_valid(1, 2, 2)
    assert not th.young_triple_valid(2, 2, 2)
    for p in (2, 2.5, 4, 10):
        assert th.young_triple_valid(2 * p / (2 + p), 2, p)


def test_semigroup_exponent_values_and_monotonicity():
    assert th.semigroup_decay_exponent(1, 0.5, 1, math.inf) == -1.0
    assert th.semigroup_decay_exponent(2, 0.3, 3, 3) == 0.0
    assert th.semigroup_decay_exponent(3, 0.5, 4, math.inf) > -1
    ms = [2, 3, 5, math.inf]
    vals = [th.semigroup_decay_exponent(2, 0.4, 2, m) for m in ms]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        th.semigroup_decay_exponent(1, 0.5, 4, 2)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_gamma_reflection_matches_mpmath(s):
    assert th.gamma_reflection(s) == pytest.approx(float(mpmath.gamma(-s)), rel=1e-13)
    assert abs(s * th.gamma_reflection(s) + th.gamma(1 - s)) < 1e-12


def test_gamma_reflection_half():
    assert th.gamma_reflection(0.5) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-14)


def test_epsilon_window_nonempty():
    for N in (3, 4, 5):
        for k in range(1, 10):
            lo, hi = th.epsilon_window(N, k / 10)
            assert 0 <= lo < hi <= 1
    with pytest.raises(ValueError):
        th.epsilon_window(2, 0.5)


def test_embedding_map_cases():
    assert th.embedding_map(3, 0.5, 4)["kind"] == "Linf"
    e = th.embedding_map(3, 0.5, 2)
    assert e["kind"] == "Lq-range" and e["q_min"] == 2 and e["q_max"] == pytest.approx(6)
    e = th.embedding_map(1, 0.75, 2)
    assert e["kind"] == "holder" and e["exponent"] == pytest.approx(0.25)
    assert th.embedding_map(1, 0.5, 2)["kind"] == "Lq-all"
    assert th.embedding_map(3, 0.5, 1.2)["kind"] == "below-threshold"


def test_check_identities_all_pass():
    res = th.check_identities()
    assert res and all(res.values())


def test_exponent_record_roundtrip():
    rec = th.ExponentRecord("ultra", {"N": 1, "s": 0.5}, -1.0, True)
    d = rec.to_dict()
    assert d["value"] == -1.0 and d["admissible"] is True
