from dataclasses import replace

import numpy as np
import pytest

from oracles import ttc_by_stepping
from xsimtest.adas import AwaSpec, DetectorConfig
from xsimtest.fitness import ScenarioOutcome, distance_to_awa, evaluate
from xsimtest.kinematics import State, ttc
from xsimtest.scene import CANONICAL, SceneConfig, TestInput, sample_uniform, translate
from xsimtest.simulator import ALPHA, BETA, LossyChannelConfig, simulate

SCENE = SceneConfig()
DET = DetectorConfig()


def test_ttc_matches_stepping_oracle():
    rng = np.random.default_rng(21)
    for _ in range(100):
        car = State(0.0, 0.0, rng.uniform(1, 25), 0.0)
        ped = State(rng.uniform(2, 60), rng.uniform(-10, 10), rng.uniform(-5, 5), rng.uniform(-5, 5))
        got = ttc(car, ped, 1.2)
        want = ttc_by_stepping((ped.x - car.x, ped.y - car.y), (ped.vx - car.vx, ped.vy - car.vy), 1.2)
        assert abs(got - want) <= 2e-3


def test_distance_to_awa():
    awa = AwaSpec(length=10, width=4)
    car = State(5.0, 1.0, 10.0, 0.0)
    assert distance_to_awa((10.0, 1.0), awa, car) == 0.0
    # 3-4-5 triangle off the far corner
    assert distance_to_awa((18.0, 7.0), awa, car) == pytest.approx(5.0)


def test_far_pedestrian_keeps_ff3_at_cap():
    short = replace(ALPHA, sensor_range=10.0)
    out = evaluate(TestInput(10, 40, -15, 270, 1), short, SCENE, DET, seed=0)
    assert out.ff3 == 4.0 and not out.detected


def test_collision_fixture_geometry():
    out = evaluate(TestInput(10, 20, 0, 90, 0), ALPHA, SCENE, DET)
    assert out.collision
    assert out.ff1 <= SCENE.ped_radius + SCENE.car_width / 2


def test_degenerate_channel_matches_lossless():
    rng = np.random.default_rng(8)
    ch = LossyChannelConfig(loss_probability=0.0, repeats=1)
    for _ in range(20):
        x = sample_uniform(SCENE.input_space(), rng)
        assert evaluate(x, ALPHA, SCENE, DET, channel=ch, seed=3) == evaluate(x, ALPHA, SCENE, DET, seed=3)


def test_outcome_invariants_and_ff1_recheck():
    rng = np.random.default_rng(13)
    zero_margin = replace(DET, margin=0.0)
    for backend in (ALPHA, BETA):
        for _ in range(100):
            x = translate(sample_uniform(SCENE.input_space(), rng), CANONICAL, backend.frame)
            out = evaluate(x, backend, SCENE, DET)
            tr = simulate(x, SCENE, backend)
            assert out.ff1 == tr.dist.min()
            assert out.ff1 >= 0 and out.ff2 >= 0 and 0 <= out.ff3 <= 4.0
            if out.collision:
                assert out.ff1 <= SCENE.ped_radius + SCENE.car_width / 2
            if not backend.quantization and not backend.latency:
                strict = evaluate(x, backend, SCENE, zero_margin)
                if strict.detected:
                    assert strict.ff2 == 0.0


def test_evaluate_deterministic_with_channel():
    x = translate(TestInput(14, 45, -5, 100, 2), CANONICAL, BETA.frame)
    ch = LossyChannelConfig()
    assert evaluate(x, BETA, SCENE, DET, ch, seed=5) == evaluate(x, BETA, SCENE, DET, ch, seed=5)


def test_oracle_ttc_option():
    x = TestInput(20, 60, -3, 90, 1)
    sensed = evaluate(x, ALPHA, SCENE, DET)
    truth = evaluate(x, ALPHA, SCENE, DET, ttc_source="oracle")
    assert truth.ff3 <= sensed.ff3
    with pytest.raises(ValueError):
        evaluate(x, ALPHA, SCENE, DET, ttc_source="psychic")


def test_outcome_dict_round_trip():
    out = evaluate(TestInput(12, 40, -6, 100, 2.5), ALPHA, SCENE, DET, seed=17)
    assert ScenarioOutcome.from_dict(out.to_dict()) == out
