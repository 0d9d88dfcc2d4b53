import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slope_ope.core import (
    EstimatorBundle,
    Interval,
    build_intervals,
    enforce_monotone_cnf,
    kappa_of,
    oracle_bound,
    oracle_diagnostics,
    select,
)

from oracles import assumption_bundle, brute_force_select

FIG_ESTIMATES = [1.0, 0.8, 1.25, 0.525, 0.1625]
FIG_CNF = [0.5, 0.25, 0.125, 0.0625, 0.03125]

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
nonneg = st.floats(0, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def bundles(draw, max_size=10):
    M = draw(st.integers(1, max_size))
    est = draw(st.lists(finite, min_size=M, max_size=M))
    raw = draw(st.lists(nonneg, min_size=M, max_size=M))
    return EstimatorBundle(np.array(est), enforce_monotone_cnf(raw))


class TestInterval:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0)

    def test_contains_endpoints(self):
        iv = Interval(0.0, 2.0)
        assert 0.0 in iv and 2.0 in iv and 2.1 not in iv
        assert iv.width == 2.0


class TestBundle:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            EstimatorBundle([], [])

    def test_negative_cnf_rejected(self):
        with pytest.raises(ValueError):
            EstimatorBundle([0.0, 1.0], [1.0, -0.1])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            EstimatorBundle([0.0, 1.0], [1.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            EstimatorBundle([np.nan], [1.0])

    def test_monotone_copy(self):
        b = EstimatorBundle([0, 0, 0], [1, 3, 2]).monotone()
        np.testing.assert_array_equal(b.cnf, [3, 3, 2])


class TestBuildIntervals:
    def test_first_figure_interval(self):
        (iv,) = build_intervals(EstimatorBundle([1.0], [0.5]))
        assert (iv.lo, iv.hi) == (0.0, 2.0)

    def test_second_figure_interval(self):
        (iv,) = build_intervals(EstimatorBundle([0.8], [0.25]))
        assert iv.lo == pytest.approx(0.3) and iv.hi == pytest.approx(1.3)

    def test_zero_width(self):
        (iv,) = build_intervals(EstimatorBundle([7.3], [0.0]))
        assert iv.lo == iv.hi == 7.3

    @given(bundles())
    def test_width_is_four_cnf(self, b):
        for iv, c in zip(build_intervals(b), b.cnf):
            assert iv.width == pytest.approx(4 * c, rel=1e-12, abs=1e-9)


class TestEnforceMonotone:
    @pytest.mark.parametrize(
        "raw, expected",
        [([4, 2, 1], [4, 2, 1]), ([1, 3, 2], [3, 3, 2]), ([0.7, 0.7, 0.7], [0.7, 0.7, 0.7])],
    )
    def test_examples(self, raw, expected):
        np.testing.assert_array_equal(enforce_monotone_cnf(raw), expected)

    def test_empty(self):
        with pytest.raises(ValueError):
            enforce_monotone_cnf([])

    @given(st.lists(nonneg, min_size=1, max_size=30))
    def test_suffix_max_properties(self, raw):
        out = enforce_monotone_cnf(raw)
        assert np.all(np.diff(out) <= 0)
        assert np.all(out >= np.asarray(raw))
        for i in range(len(raw)):
            assert out[i] == max(raw[i:])


class TestSelect:
    def test_figure_example(self):
        res = select(EstimatorBundle(FIG_ESTIMATES, FIG_CNF))
        # third estimator, 0-based index 2
        assert res.chosen_index == 2
        assert res.chosen_estimate == 1.25
        assert len(res.running_intersection) == 3

    def test_single_estimator(self):
        assert select(EstimatorBundle([3.0], [1.0])).chosen_index == 0

    def test_common_center_selects_last(self):
        res = select(EstimatorBundle([2.0] * 5, [5, 4, 3, 2, 0]))
        assert res.chosen_index == 4

    def test_touching_endpoints_intersect(self):
        # [0, 4] and [4, 4] touch at 4
        assert select(EstimatorBundle([2.0, 4.0], [1.0, 0.0])).chosen_index == 1

    def test_gap_just_past_endpoint(self):
        assert select(EstimatorBundle([2.0, 4.0 + 1e-12], [1.0, 0.0])).chosen_index == 0

    def test_non_monotone_rejected(self):
        with pytest.raises(ValueError):
            select(EstimatorBundle([0, 0], [1, 2]))

    def test_running_intersection_nested(self):
        res = select(EstimatorBundle(FIG_ESTIMATES, FIG_CNF))
        for outer, inner in zip(res.running_intersection, res.running_intersection[1:]):
            assert outer.lo <= inner.lo and inner.hi <= outer.hi

    def test_matches_brute_force_seeded(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            M = int(rng.integers(1, 9))
            est = rng.normal(size=M)
            cnf = enforce_monotone_cnf(rng.exponential(size=M))
            assert select(EstimatorBundle(est, cnf)).chosen_index == brute_force_select(est, cnf)

    @given(bundles())
    def test_matches_brute_force(self, b):
        assert select(b).chosen_index == brute_force_select(b.estimates, b.cnf)

    @given(
        st.lists(st.tuples(st.integers(-4000, 4000), st.integers(0, 800)), min_size=1, max_size=10),
        st.integers(-4000, 4000),
    )
    def test_translation_invariance(self, pairs, shift):
        # quarter-integer values keep every sum exact in floating point
        est = np.array([p[0] for p in pairs]) / 4.0
        cnf = enforce_monotone_cnf([p[1] / 8.0 for p in pairs])
        c = shift / 4.0
        base = select(EstimatorBundle(est, cnf))
        moved = select(EstimatorBundle(est + c, cnf))
        assert moved.chosen_index == base.chosen_index
        assert moved.chosen_estimate == base.chosen_estimate + c

    @given(bundles(), st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]))
    def test_scale_invariance(self, b, s):
        # powers of two keep the arithmetic exact
        scaled = EstimatorBundle(b.estimates * s, b.cnf * s)
        assert select(scaled).chosen_index == select(b).chosen_index


class TestKappa:
    @pytest.mark.parametrize("cnf, expected", [([4, 2, 1], 0.5), ([1], 1.0), ([9, 3, 2], 1 / 3)])
    def test_examples(self, cnf, expected):
        assert kappa_of(cnf) == pytest.approx(expected)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            kappa_of([1.0, 0.0])

    def test_increasing_rejected(self):
        with pytest.raises(ValueError):
            kappa_of([1.0, 2.0])


class TestOracleBound:
    def test_unit_kappa(self):
        assert oracle_bound(EstimatorBundle([0, 0], [2, 1]), [0, 1], 1.0) == 24.0

    def test_zero_bound(self):
        assert oracle_bound(EstimatorBundle([0], [0]), [0], 0.5) == 0.0

    def test_min_at_middle(self):
        b = EstimatorBundle([0, 0, 0], [0.8, 0.2, 0.05])
        assert oracle_bound(b, [0, 0.1, 0.4], 0.25) == pytest.approx(9.0)

    @pytest.mark.parametrize("kappa", [0.0, -1.0, 1.5])
    def test_kappa_domain(self, kappa):
        with pytest.raises(ValueError):
            oracle_bound(EstimatorBundle([0], [1]), [0], kappa)

    def test_decreasing_bias_rejected(self):
        with pytest.raises(ValueError):
            oracle_bound(EstimatorBundle([0, 0], [1, 1]), [1, 0], 1.0)

    def test_diagnostics(self):
        b = EstimatorBundle([0, 0, 0], [0.8, 0.2, 0.05])
        d = oracle_diagnostics(b, [0, 0.1, 0.4])
        assert d.kappa == pytest.approx(0.25)
        assert d.bound == pytest.approx(9.0)

    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1))
    def test_inequality_holds(self, seed):
        theta, est, cnf, bias = assumption_bundle(np.random.default_rng(seed))
        b = EstimatorBundle(est, cnf)
        res = select(b)
        bound = oracle_bound(b, bias, kappa_of(cnf))
        assert abs(res.chosen_estimate - theta) <= bound * (1 + 1e-12) + 1e-12

    def test_select_takes_no_bias(self):
        import inspect

        assert list(inspect.signature(select).parameters) == ["bundle"]
