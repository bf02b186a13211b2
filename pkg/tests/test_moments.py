import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from momdecon.errors import AssumptionBViolation
from momdecon.known_components import MomentProvider, squared_provider
from momdecon.moments import (
    MomentSequence,
    deconvolve_location,
    deconvolve_scale,
    discrete_moments,
    empirical_moments,
    even_reduce,
    exact_mixture_moments,
)


def test_empirical_examples():
    assert empirical_moments([2, 2, 2], 2).values == (1, 2, 4)
    assert empirical_moments([-1, 1], 3).values == (1, 0, 1, 0)
    assert empirical_moments([1, 3], 4).values == (1, 2, 5, 14, 41)


def test_empirical_errors():
    with pytest.raises(ValueError):
        empirical_moments([], 4)
    with pytest.raises(ValueError):
        empirical_moments([1.0, math.nan], 4)


@settings(max_examples=60)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60), st.randoms())
def test_empirical_permutation_invariant(xs, rnd):
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    assert empirical_moments(xs, 8).values == empirical_moments(shuffled, 8).values


def test_sequence_contract():
    with pytest.raises(ValueError):
        MomentSequence((2.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        MomentSequence((1.0, 1.0))


def test_deconvolve_scale_examples():
    exp_mix = [math.factorial(j) * (1 + 3**j) / 2 for j in range(5)]
    assert exp_mix == [1, 2, 10, 84, 984]
    out = deconvolve_scale(exp_mix, MomentProvider.exponential(1.0))
    assert out.values == pytest.approx([1, 2, 5, 14, 41], rel=1e-15)
    m = [1.0, 0.3, 2.7, -1.1]
    assert deconvolve_scale(m, MomentProvider.degenerate(1.0)).values == tuple(m)
    sq = squared_provider(MomentProvider.normal(0, 1))
    assert deconvolve_scale([1, 5, 123, 5475, 344505], sq).values == (1, 5, 41, 365, 3281)


def test_deconvolve_scale_assumption_b():
    with pytest.raises(AssumptionBViolation) as info:
        deconvolve_scale([1, 0, 1, 0, 3], MomentProvider.normal(0, 1))
    assert info.value.order == 1


@settings(max_examples=60)
@given(
    st.lists(st.floats(0.2, 3.0), min_size=1, max_size=4),
    st.sampled_from([MomentProvider.exponential(1.0), MomentProvider.exponential(0.5),
                     MomentProvider.normal(0.5, 1.0), MomentProvider.laplace(1.0, 0.5)]),
)
def test_deconvolve_scale_round_trip(support, z):
    w = [1.0 / len(support)] * len(support)
    ym = discrete_moments(support, w, 10)
    ym[0] = 1.0
    xm = [z.moment(j) * ym[j] for j in range(11)]
    if max(abs(v) for v in xm) > 1e6:
        return
    out = deconvolve_scale(xm, z).values
    for j in range(11):
        assert out[j] == pytest.approx(ym[j], rel=1e-12)


def test_deconvolve_location_examples():
    assert deconvolve_location([1, 0, 2, 0, 10], MomentProvider.normal(0, 1)).values == (1, 0, 1, 0, 1)
    z = MomentProvider.laplace(0.3, 0.9)
    own = deconvolve_location(z.moments(8), z).values
    assert own[0] == 1.0
    assert max(abs(v) for v in own[1:]) < 1e-10
    zero = MomentProvider.custom([1, 0, 0, 0])
    assert deconvolve_location([1, 1, 1], zero).values == (1, 1, 1)


def _location_oracle(support, weights, z, s):
    # E(Y + Z)^s by integrating against the density of Z
    dist = stats.norm(*z.params) if z.family == "normal" else stats.laplace(*z.params)
    centre = z.params[0]
    total = 0.0
    for y, w in zip(support, weights):
        f = lambda t, y=y: (y + t) ** s * dist.pdf(t)
        cuts = [-math.inf, *sorted({centre, -y}), math.inf]
        val = sum(integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=400)[0]
                  for a, b in zip(cuts, cuts[1:]))
        total += w * val
    return total


@pytest.mark.parametrize("support,weights,z", [
    ((1.0, 2.5), (0.5, 0.5), MomentProvider.normal(0.0, 1.0)),
    ((0.5, 1.5, 3.0), (0.25, 0.5, 0.25), MomentProvider.normal(0.2, 0.7)),
    ((1.0, 3.0), (0.3, 0.7), MomentProvider.laplace(0.0, 0.5)),
    ((2.0,), (1.0,), MomentProvider.laplace(0.5, 1.0)),
])
def test_deconvolve_location_round_trip(support, weights, z):
    j_max = 8
    xm = [1.0] + [_location_oracle(support, weights, z, s) for s in range(1, j_max + 1)]
    ym = discrete_moments(support, weights, j_max)
    out = deconvolve_location(xm, z).values
    for s in range(1, j_max + 1):
        assert out[s] == pytest.approx(ym[s], rel=1e-10)


def test_exact_mixture_moments_match_fractions():
    # Y uniform on {1, 3}, Z ~ Exp(1): moments j!(1 + 3^j)/2
    got = exact_mixture_moments([1, 3], [0.5, 0.5], MomentProvider.exponential(1.0), "scale", 8).values
    want = [Fraction(math.factorial(j) * (1 + 3**j), 2) for j in range(9)]
    assert [Fraction(v) for v in got] == want


def test_even_reduce_examples():
    assert even_reduce([-2, 3]).tolist() == [4, 9]
    assert even_reduce([0]).tolist() == [0]


def test_even_reduce_simulation():
    rng = np.random.default_rng(20240601)
    n = 10**6
    y = rng.choice([1.0, 3.0], size=n)
    x2 = even_reduce(y * rng.standard_normal(n))
    m = empirical_moments(x2, 2).values
    # E X^2 = 5, E X^4 = 123, sd from E X^4 - 25 and E X^8 - 123^2
    assert abs(m[1] - 5.0) < 4 * math.sqrt((123 - 25) / n)
    assert abs(m[2] - 123.0) < 4 * math.sqrt((344505 - 123**2) / n)
    dm = deconvolve_scale(m, squared_provider(MomentProvider.normal(0, 1))).values
    assert dm[1] == pytest.approx(5.0, rel=0.01)
    assert dm[2] == pytest.approx(41.0, rel=0.05)
