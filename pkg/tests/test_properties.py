"""Property-based checks of the invariants, driven by hypothesis."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_fronts
from xsimtest.analysis import (
    CATEGORIES,
    classify,
    hypervolume,
    mann_whitney_u,
    tree_fit,
    xsim_report,
)
from xsimtest.fitness import ScenarioOutcome, evaluate
from xsimtest.adas import DetectorConfig
from xsimtest.scene import (
    CANONICAL,
    FrameSpec,
    InputSpace,
    SceneConfig,
    TestInput,
    clamp,
    sample_uniform,
    translate,
)
from xsimtest.search import crowding_distance, fast_nondominated_sort, sbx_crossover
from xsimtest.simulator import ALPHA, BETA

SPACE = InputSpace()
SCENE = SceneConfig()

finite = st.floats(-1e3, 1e3, allow_nan=False)
unit = st.floats(0.0, 1.0, allow_nan=False)

inputs = st.builds(
    TestInput,
    v0c=st.floats(1, 25), x0p=st.floats(20, 85), y0p=st.floats(-15, -2),
    theta_p=st.floats(40, 160), v0p=st.floats(1, 5),
)
any_inputs = st.builds(TestInput, finite, finite, finite, finite, finite)
frames = st.builds(
    FrameSpec,
    origin=st.tuples(finite, finite),
    zero_heading=st.floats(0, 359),
    sense=st.sampled_from([1, -1]),
    speed_unit=st.sampled_from(["m/s", "km/h"]),
)


def _angle_close(a, b, tol=1e-9):
    d = (a - b) % 360.0
    return min(d, 360.0 - d) <= tol


@given(inputs, frames, frames)
def test_translation_round_trip(x, a, b):
    back = translate(translate(x, a, b), b, a)
    for g in ("v0c", "x0p", "y0p", "v0p"):
        assert math.isclose(getattr(back, g), getattr(x, g), abs_tol=1e-9)
    assert _angle_close(back.theta_p, x.theta_p)


@given(any_inputs)
def test_clamp_idempotent_and_in_space(x):
    once = clamp(x, SPACE)
    assert clamp(once, SPACE) == once
    assert SPACE.contains(once)


@given(st.integers(0, 2**32 - 1))
def test_sample_uniform_in_space(seed):
    assert SPACE.contains(sample_uniform(SPACE, np.random.default_rng(seed)))


@given(inputs, st.sampled_from([ALPHA, BETA]))
@settings(max_examples=60, deadline=None)
def test_outcome_invariants(x, backend):
    out = evaluate(translate(x, CANONICAL, backend.frame), backend, SCENE, DetectorConfig())
    assert out.ff1 >= 0 and out.ff2 >= 0 and 0 <= out.ff3 <= 4.0
    if out.collision:
        assert out.ff1 <= SCENE.ped_radius + SCENE.car_width / 2
    c = classify(out)
    assert not c.violation or (c.critical and not out.detected)


points3 = st.lists(st.tuples(unit, unit, unit), min_size=1, max_size=12)


@given(points3)
def test_sort_partitions_like_brute_force(pts):
    fronts = fast_nondominated_sort(pts)
    assert sorted(i for f in fronts for i in f) == list(range(len(pts)))
    assert [sorted(f) for f in fronts] == brute_force_fronts(pts)


@given(points3)
def test_crowding_non_negative(pts):
    assert all(d >= 0 for d in crowding_distance(pts))


@given(points3, st.tuples(unit, unit, unit))
def test_hv_monotone(pts, extra):
    assert hypervolume(pts + [extra]) >= hypervolume(pts) - 1e-12


@given(inputs, inputs, st.floats(0, 50), st.integers(0, 2**32 - 1))
def test_sbx_preserves_midpoint_before_clamping(p1, p2, eta, seed):
    wide = InputSpace(*(((-1e9, 1e9),) * 5))
    c1, c2 = sbx_crossover(p1, p2, eta, np.random.default_rng(seed), wide)
    np.testing.assert_allclose(
        c1.as_array() + c2.as_array(), p1.as_array() + p2.as_array(), rtol=1e-9, atol=1e-6
    )


samples = st.lists(st.integers(-20, 20), min_size=1, max_size=8)


@given(samples, samples, st.integers(-100, 100))
def test_mw_shift_invariance_and_identity(a, b, c):
    r = mann_whitney_u(a, b)
    s = mann_whitney_u([v + c for v in a], [v + c for v in b])
    assert (r.u, r.p) == (s.u, s.p)
    assert r.u + mann_whitney_u(b, a).u == len(a) * len(b)
    assert 0.0 < r.p <= 1.0


outcomes = st.builds(
    ScenarioOutcome,
    ff1=st.floats(0, 10), ff2=st.floats(0, 10), ff3=st.floats(0, 4),
    collision=st.booleans(), detected=st.booleans(), detection_time=st.none(),
    termination=st.just("passed"), backend=st.just("alpha"), input=st.just(TestInput(1, 20, -5, 90, 1)),
)


@given(st.lists(st.tuples(outcomes, outcomes), min_size=1, max_size=30))
def test_xsim_partition(pairs):
    pairs = [(s, r) for s, r in pairs if classify(s).critical]
    if not pairs:
        return
    rep = xsim_report(pairs)
    assert set(rep.categories) <= set(CATEGORIES)
    assert sum(rep.counts.values()) == len(pairs)
    unsafe = sum(classify(s).violation for s, _ in pairs)
    assert rep.source_unsafe == unsafe and rep.source_safe == len(pairs) - unsafe


@given(st.integers(0, 2**32 - 1), st.integers(20, 120))
@settings(max_examples=30, deadline=None)
def test_tree_partition_thresholds_accuracy(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 5))
    y = rng.random(n) < X[:, 1]
    tree = tree_fit(X, y, max_depth=3, min_leaf=5)
    assert sum(leaf.n_samples for leaf in tree.leaves()) == n
    stack = [tree]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            assert X[:, node.gene].min() <= node.threshold <= X[:, node.gene].max()
            stack += [node.left, node.right]
    assert np.mean(tree.predict(X) == y) >= max(y.mean(), 1 - y.mean())
