"""Tests for kernel evaluation, side sums, and local linear weights."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from paneljump.errors import InsufficientSupport
from paneljump.kernels import (
    KERNEL_KINDS,
    KernelSpec,
    SideSums,
    denominator_floor,
    eval_kernel,
    kernel_moments,
    local_weights,
    side_sums,
)

UNIFORM = KernelSpec("uniform")


def _kernel_fn(kind):
    if kind == "uniform":
        return lambda u: 0.5
    if kind == "triangular":
        return lambda u: 1.0 - abs(u)
    return lambda u: 0.75 * (1.0 - u * u)


class TestEvalKernel:
    def test_uniform_constant_inside(self):
        u = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
        np.testing.assert_array_equal(eval_kernel(UNIFORM, u), 0.5)

    def test_closed_support_endpoints(self):
        """|u| == 1 is inside the support for every kernel."""
        assert eval_kernel(UNIFORM, 1.0) == 0.5
        assert eval_kernel(UNIFORM, -1.0) == 0.5
        assert eval_kernel(KernelSpec("triangular"), 1.0) == 0.0
        assert eval_kernel(KernelSpec("epanechnikov"), -1.0) == 0.0

    def test_zero_outside_support(self):
        u = np.array([-1.0000001, 1.0000001, 5.0, -17.0])
        for kind in KERNEL_KINDS:
            np.testing.assert_array_equal(eval_kernel(KernelSpec(kind), u), 0.0)

    def test_triangular_shape(self):
        np.testing.assert_allclose(
            eval_kernel(KernelSpec("triangular"), np.array([-0.25, 0.0, 0.75])),
            [0.75, 1.0, 0.25],
        )

    def test_epanechnikov_shape(self):
        np.testing.assert_allclose(
            eval_kernel(KernelSpec("epanechnikov"), np.array([0.0, 0.5])),
            [0.75, 0.5625],
        )

    def test_scalar_in_scalar_out(self):
        out = eval_kernel(UNIFORM, 0.3)
        assert isinstance(out, float)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown kernel"):
            KernelSpec("gaussian")


class TestKernelMoments:
    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    def test_matches_numeric_integration(self, kind):
        """Closed-form one-sided moments agree with direct quadrature."""
        fn = _kernel_fn(kind)
        m = kernel_moments(KernelSpec(kind))
        for ell in range(3):
            plus, _ = quad(lambda u: u**ell * fn(u), 0.0, 1.0)
            minus, _ = quad(lambda u: u**ell * fn(u), -1.0, 0.0)
            assert m.plus[ell] == pytest.approx(plus, abs=1e-12)
            assert m.minus[ell] == pytest.approx(minus, abs=1e-12)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    def test_sides_integrate_to_one(self, kind):
        m = kernel_moments(KernelSpec(kind))
        assert m.plus[0] + m.minus[0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    def test_odd_moment_flips_sign(self, kind):
        m = kernel_moments(KernelSpec(kind))
        assert m.minus[1] == -m.plus[1]
        assert m.minus[2] == m.plus[2]


class TestSideSums:
    def test_hand_computed_uniform(self):
        """x = [-0.3, 0.2, 0.4, 1.5], c = 0, b = 1, uniform kernel.

        Plus side keeps 0.2 and 0.4 (1.5 is outside the window), each with
        kernel factor 0.5; minus side keeps -0.3 alone.
        """
        x = [-0.3, 0.2, 0.4, 1.5]
        plus = side_sums(x, 0.0, 1.0, UNIFORM, "plus")
        assert plus.as_tuple() == pytest.approx((1.0, 0.3, 0.1), abs=1e-15)
        minus = side_sums(x, 0.0, 1.0, UNIFORM, "minus")
        assert minus.as_tuple() == pytest.approx((0.5, -0.15, 0.045), abs=1e-15)

    def test_threshold_point_counts_as_plus(self):
        plus = side_sums([0.0], 0.0, 1.0, UNIFORM, "plus")
        assert plus.s0 == 0.5
        minus = side_sums([0.0], 0.0, 1.0, UNIFORM, "minus")
        assert minus.s0 == 0.0

    def test_empty_side_gives_zero_sums(self):
        s = side_sums([1.0, 2.0], 0.0, 0.5, UNIFORM, "minus")
        assert s == SideSums(0.0, 0.0, 0.0)

    def test_bad_side_rejected(self):
        with pytest.raises(ValueError, match="side"):
            side_sums([0.1], 0.0, 1.0, UNIFORM, "left")

    def test_nonpositive_bandwidth_rejected(self):
        with pytest.raises(ValueError, match="bandwidth"):
            side_sums([0.1], 0.0, 0.0, UNIFORM, "plus")


class TestDenominatorFloor:
    def test_relative_above_one(self):
        assert denominator_floor(10.0, 5.0) == 1e-12 * 50.0

    def test_absolute_below_one(self):
        assert denominator_floor(1e-3, 1e-3) == 1e-12


class TestLocalWeights:
    def test_two_point_interpolation(self):
        """With two in-support points the boundary fit is the secant line:
        w = [x2, -x1] / (x2 - x1) regardless of the kernel factors."""
        x = np.array([0.2, 0.4, -0.3, 1.5])
        w = local_weights(x, 0.0, 1.0, UNIFORM, "plus")
        np.testing.assert_allclose(w, [2.0, -1.0, 0.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("kind", KERNEL_KINDS)
    @pytest.mark.parametrize("side", ["plus", "minus"])
    def test_reproduces_affine_functions(self, kind, side):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1.0, 1.0, size=60)
        w = local_weights(x, 0.1, 0.7, KernelSpec(kind), side)
        # exactness on affine y means intercept recovery at the threshold
        y = 3.0 - 2.0 * x
        assert w @ y == pytest.approx(3.0 - 2.0 * 0.1, abs=1e-9)

    def test_zero_off_own_side(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(-1.0, 1.0, size=40)
        w = local_weights(x, 0.0, 0.8, UNIFORM, "plus")
        assert np.all(w[x < 0.0] == 0.0)

    def test_fewer_than_two_distinct_points(self):
        with pytest.raises(InsufficientSupport, match="plus"):
            local_weights([0.5, 0.5, -0.2], 0.0, 1.0, UNIFORM, "plus")

    def test_no_points_at_all(self):
        with pytest.raises(InsufficientSupport, match="minus"):
            local_weights([0.5, 0.6], 0.0, 1.0, UNIFORM, "minus")

    def test_near_singular_design(self):
        # two points 1e-9 apart: distinct, but the design denominator is
        # below the relative floor
        with pytest.raises(InsufficientSupport, match="singular"):
            local_weights([0.5, 0.5 + 1e-9], 0.0, 1.0, UNIFORM, "plus")


# dyadic grids keep the identity checks exact in floating point
_dyadic = st.integers(min_value=-256, max_value=256).map(lambda k: k / 256.0)


@settings(max_examples=200, deadline=None)
@given(
    xs=st.lists(_dyadic, min_size=4, max_size=24),
    c=st.integers(min_value=-4, max_value=4).map(lambda k: k / 8.0),
    b=st.sampled_from([0.25, 0.5, 1.0]),
    kind=st.sampled_from(KERNEL_KINDS),
    side=st.sampled_from(["plus", "minus"]),
)
def test_weight_identities_property(xs, c, b, kind, side):
    """Sum to one and orthogonality to (x - c), whenever the fit exists."""
    x = np.array(xs)
    try:
        w = local_weights(x, c, b, KernelSpec(kind), side)
    except InsufficientSupport:
        return
    assert np.sum(w) == pytest.approx(1.0, abs=1e-10)
    assert np.sum((x - c) * w) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(
    xs=st.lists(_dyadic, min_size=4, max_size=16),
    shift=st.integers(min_value=-8, max_value=8).map(lambda k: k / 4.0),
    kind=st.sampled_from(KERNEL_KINDS),
)
def test_weights_translation_invariant(xs, shift, kind):
    """Shifting x and c together leaves the weights untouched (dyadic
    shifts make the kernel arguments bit-identical)."""
    x = np.array(xs)
    try:
        w0 = local_weights(x, 0.0, 0.5, KernelSpec(kind), "plus")
    except InsufficientSupport:
        return
    w1 = local_weights(x + shift, shift, 0.5, KernelSpec(kind), "plus")
    np.testing.assert_array_equal(w0, w1)


def test_weights_scale_equivariant():
    """Scaling x, c, b by s > 0 leaves w unchanged up to rounding."""
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, size=50)
    w0 = local_weights(x, 0.25, 0.5, KernelSpec("triangular"), "minus")
    for s in (2.0, 0.125, 37.5):
        w1 = local_weights(s * x, s * 0.25, s * 0.5, KernelSpec("triangular"), "minus")
        np.testing.assert_allclose(w1, w0, atol=1e-10)
