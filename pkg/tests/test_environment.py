import math

import numpy as np
import pytest

from taxisim import config as config_mod
from taxisim.environment import (
    Action,
    EnvParams,
    Environment,
    SalienceSchedule,
    StartSpec,
    wrap_angle,
    _reflect,
)
from taxisim.landscape import Bounds, DensityComponent, Landscape
from taxisim.verify import convergence_ratios, fcd_convergence

BOUNDS = Bounds(-3.0, 3.0, -3.0, 3.0)


def gaussian_env(**param_overrides):
    ls = Landscape((DensityComponent("gaussian", (0, 0), 1.0, "food"),), BOUNDS)
    params = EnvParams(**param_overrides)
    return Environment(ls, params)


class TestWrapReflect:
    @pytest.mark.parametrize("angle,expected", [
        (0.0, 0.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (3 * math.pi, math.pi),
        (math.pi + 0.1, -math.pi + 0.1),
    ])
    def test_wrap(self, angle, expected):
        assert wrap_angle(angle) == pytest.approx(expected)

    def test_reflect_folds_back(self):
        assert _reflect(3.4, -3.0, 3.0) == pytest.approx(2.6)
        assert _reflect(-3.7, -3.0, 3.0) == pytest.approx(-2.3)
        assert _reflect(1.0, -3.0, 3.0) == 1.0


class TestReset:
    def test_fixed_start_echoes_config(self):
        env = gaussian_env()
        env.start = StartSpec(mode="fixed", z=(0.5, -0.5), heading=1.0)
        s = env.reset(seed=0)
        assert (s.x, s.y) == (0.5, -0.5)
        assert s.heading == 1.0
        assert s.t == 0.0 and s.speed == 0.0

    def test_same_seed_identical_rng_state(self):
        env = gaussian_env()
        s1 = env.reset(seed=123)
        s2 = env.reset(seed=123)
        assert s1.rng.bit_generator.state == s2.rng.bit_generator.state

    def test_start_outside_bounds_rejected(self):
        env = gaussian_env()
        env.start = StartSpec(mode="fixed", z=(5.0, 0.0))
        with pytest.raises(ValueError):
            env.reset(seed=0)

    def test_uniform_start_distribution(self):
        from scipy import stats

        env = gaussian_env()
        env.start = StartSpec(mode="uniform")
        xs = np.empty(10_000)
        ys = np.empty(10_000)
        for i in range(10_000):
            s = env.reset(seed=i)
            xs[i], ys[i] = s.x, s.y
        # 4x4 spatial cells; chi-square against uniform occupancy.
        ix = np.clip(((xs + 3) / 6 * 4).astype(int), 0, 3)
        iy = np.clip(((ys + 3) / 6 * 4).astype(int), 0, 3)
        counts = np.bincount(ix * 4 + iy, minlength=16)
        _, p = stats.chisquare(counts)
        assert p > 0.01


class TestStep:
    def test_zero_action_zero_speed_is_static(self):
        env = gaussian_env()
        env.start = StartSpec(z=(1.0, 1.0))
        s = env.reset(seed=0)
        s2, res = env.step(s, Action(0.0, 0.0))
        assert (s2.x, s2.y) == (1.0, 1.0)
        assert res.reward == 0.0

    def test_flat_landscape_zero_reward(self):
        env = gaussian_env()
        env.salience_schedule = SalienceSchedule(mode="fixed", fixed_value=0.0)
        s = env.reset(seed=0)
        for _ in range(20):
            s, res = env.step(s, Action(1.0, 3.0))
            assert res.reward == 0.0

    def test_reward_moving_toward_mode(self):
        # Post-step pose (1, 0) with speed 1 toward the center: |grad| = 1, theta = 0.
        dt = 0.05
        env = gaussian_env(dt_s=dt)
        env.start = StartSpec(z=(1.0 + dt, 0.0), heading=math.pi)
        s = env.reset(seed=0)
        s.speed = 1.0
        s2, res = env.step(s, Action(0.0, 0.0))
        assert s2.x == pytest.approx(1.0)
        assert res.reward == pytest.approx(1.0, abs=2 * dt)

    def test_dt_out_of_range_rejected(self):
        env = gaussian_env()
        s = env.reset(seed=0)
        with pytest.raises(ValueError):
            env.step(s, Action(0.0, 0.0), dt=0.2)

    def test_non_finite_action_rejected(self):
        with pytest.raises(ValueError):
            Action(float("inf"), 0.0)

    def test_speed_clamped_to_v_max(self):
        env = gaussian_env(v_max_units_per_s=0.7)
        s = env.reset(seed=0)
        for _ in range(50):
            s, _ = env.step(s, Action(100.0, 0.0))
        assert s.speed == pytest.approx(0.7)

    def test_fcd_scalar_equals_reward_exactly(self):
        env = gaussian_env(observation_mode="fcd_scalar")
        env.start = StartSpec(mode="uniform")
        rng = np.random.default_rng(5)
        s = env.reset(seed=11)
        for _ in range(200):
            s, res = env.step(s, Action(rng.uniform(-5, 5), rng.uniform(-20, 20)))
            assert abs(res.observation.values[0] - res.reward) <= 1e-9

    def test_per_channel_observation_sums_to_scalar(self):
        ls = Landscape(
            (
                DensityComponent("gaussian", (1, 0), 0.8, "food"),
                DensityComponent("gaussian", (-1, 0), 0.8, "water"),
            ),
            BOUNDS,
        )
        env = Environment(ls, EnvParams(observation_mode="fcd_per_channel"))
        env.start = StartSpec(mode="uniform")
        s = env.reset(seed=2)
        for _ in range(50):
            s, res = env.step(s, Action(2.0, 5.0))
            total = ls.directional_derivative(s.z, s.velocity, s.beta)
            assert sum(res.observation.values) == pytest.approx(total, abs=1e-12)

    def test_full_gradient_observation_at_mode(self):
        env = gaussian_env(observation_mode="full_gradient", dt_s=0.01)
        env.start = StartSpec(z=(0.0, 0.0))
        s = env.reset(seed=0)
        s2, res = env.step(s, Action(0.0, 0.0))
        np.testing.assert_allclose(res.observation.values, [0.0, 0.0], atol=1e-12)

    def test_observation_noise_is_seed_deterministic(self):
        env = gaussian_env(noise_std=0.3)
        outs = []
        for _ in range(2):
            s = env.reset(seed=9)
            vals = []
            for _ in range(10):
                s, res = env.step(s, Action(1.0, 0.0))
                vals.append(res.observation.values[0])
            outs.append(vals)
        assert outs[0] == outs[1]

    def test_done_at_episode_end(self):
        env = gaussian_env(dt_s=0.1, episode_s=1.0)
        s = env.reset(seed=0)
        done_flags = []
        for _ in range(10):
            s, res = env.step(s, Action(0.0, 0.0))
            done_flags.append(res.done)
        assert done_flags == [False] * 9 + [True]


class TestInvariants:
    def test_boundary_safety_random_actions(self):
        env = gaussian_env(noise_std=0.1)
        env.start = StartSpec(mode="uniform")
        s = env.reset(seed=42)
        rng = np.random.default_rng(0)
        for _ in range(20_000):
            a = Action(rng.uniform(-10, 10), rng.uniform(-50, 50))
            s, res = env.step(s, a)
            assert -3.0 <= s.x <= 3.0 and -3.0 <= s.y <= 3.0
            assert s.speed >= 0.0
            assert -math.pi < s.heading <= math.pi
            assert math.isfinite(res.reward)
            assert all(math.isfinite(v) for v in res.observation.values)

    def test_reward_negligible_at_mode_all_headings(self):
        env = gaussian_env(dt_s=0.01)
        for heading in np.linspace(-math.pi, math.pi, 16):
            env.start = StartSpec(z=(0.0, 0.0), heading=float(heading))
            s = env.reset(seed=0)
            s.speed = 1.0
            _, res = env.step(s, Action(0.0, 0.0))
            # post-step displacement is 0.01; gradient there is ~0.01
            assert abs(res.reward) <= 1.0 * 0.02

    def test_temporal_fd_matches_reward_first_order(self):
        raw = {
            "landscape": {
                "bounds": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3},
                "components": [{"kind": "gaussian", "center": [0, 0], "scale": 1.0,
                                "channel": "food"}],
            },
            "policy": {"kind": "scripted", "params": {"actions": [[0.1, 0.5]]}},
            "environment": {"dt_s": 0.01, "episode_s": 10.0, "v_max_units_per_s": 2.0},
        }
        cfg = config_mod.from_dict(raw)
        results = fcd_convergence(cfg, dt0=0.01, halvings=3)
        for ratio in convergence_ratios(results):
            assert 1.8 <= ratio <= 2.2
