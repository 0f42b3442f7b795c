import json
import math

import numpy as np
import pytest

from pulsefalsify.signals import Signal
from pulsefalsify.systems import (
    Benchmark,
    ModelSpec,
    SimulationError,
    builtin_benchmark,
    builtin_benchmark_names,
    load_benchmark,
    rk4_step,
    simulate,
)


def constant_inputs(benchmark, values):
    grid = benchmark.grid()
    channels = tuple(np.full(len(grid), v) for v in values)
    return Signal(times=grid, channels=channels, channel_names=benchmark.input_names)


class TestRk4Step:
    def test_zero_derivative(self):
        state = np.array([3.0, -1.0])
        out = rk4_step(lambda s, u: np.zeros_like(s), state, np.zeros(1), 0.1)
        np.testing.assert_array_equal(out, state)

    def test_constant_derivative_exact(self):
        out = rk4_step(lambda s, u: np.ones_like(s), np.array([0.0]), np.zeros(1), 0.1)
        assert out[0] == pytest.approx(0.1, abs=1e-15)

    def test_exponential_accuracy(self):
        out = rk4_step(lambda s, u: s, np.array([1.0]), np.zeros(1), 0.1)
        assert out[0] == pytest.approx(math.exp(0.1), abs=1e-7)


class TestLag:
    def test_step_response_matches_closed_form(self):
        b = load_benchmark(json.dumps({
            "name": "lag", "horizon": 10.0, "dt": 0.01,
            "inputs": [{"name": "u", "min": 0.0, "max": 1.0}],
            "model": {"kind": "first_order_lag", "params": {"K": 1.0, "tau": 1.0}},
            "specs": {"phi": "alw[0,10](y <= 2)"},
        }))
        out = simulate(b, constant_inputs(b, [1.0]))
        assert out.channel("y")[-1] == pytest.approx(1 - math.exp(-10), abs=1e-6)

    def test_rk4_order_on_lag(self):
        errors = []
        for dt in (0.1, 0.05, 0.025):
            b = load_benchmark(json.dumps({
                "name": "lag", "horizon": 2.0, "dt": dt,
                "inputs": [{"name": "u", "min": 0.0, "max": 1.0}],
                "model": {"kind": "first_order_lag"},
                "specs": {"phi": "alw[0,2](y <= 2)"},
            }))
            out = simulate(b, constant_inputs(b, [1.0]))
            errors.append(abs(out.channel("y")[-1] - (1 - math.exp(-2.0))))
        for coarse, fine in zip(errors, errors[1:]):
            assert 8.0 <= coarse / fine <= 32.0

    def test_grid_alignment(self):
        b = builtin_benchmark("lag")
        out = simulate(b, constant_inputs(b, [0.5]))
        np.testing.assert_array_equal(out.times, b.grid())

    def test_determinism(self):
        b = builtin_benchmark("lag")
        u = constant_inputs(b, [0.7])
        a = simulate(b, u)
        c = simulate(b, u)
        np.testing.assert_array_equal(a.channel("y"), c.channel("y"))


class TestChasingCars:
    def test_no_overtaking_at_rest(self):
        b = builtin_benchmark("cc")
        out = simulate(b, constant_inputs(b, [0.0, 0.0]))
        for lead, follow in [("y1", "y2"), ("y2", "y3"), ("y3", "y4"), ("y4", "y5")]:
            assert np.all(out.channel(lead) >= out.channel(follow))

    def test_lead_velocity_clamped(self):
        # full brake from rest: the lead car must not move backwards
        b = builtin_benchmark("cc")
        out = simulate(b, constant_inputs(b, [0.0, 1.0]))
        y1 = out.channel("y1")
        assert np.all(np.diff(y1) >= -1e-9)

    def test_throttle_grows_lead_gap(self):
        b = builtin_benchmark("cc")
        out = simulate(b, constant_inputs(b, [1.0, 0.0]))
        gap = out.channel("y1") - out.channel("y5")
        assert gap[-1] > gap[0] + 10


class TestDeltaSigma:
    def hand_iterate(self, u_seq, b=(0.044, 0.287, 0.8)):
        x = [0.0, 0.0, 0.0]
        states = [tuple(x)]
        for u in u_seq:
            v = 1.0 if x[2] >= 0 else -1.0
            ins = [u, x[0], x[1]]
            x = [x[j] + b[j] * (ins[j] - v) for j in range(3)]
            states.append(tuple(x))
        return states

    def test_zero_input_matches_hand_iteration(self):
        bench = load_benchmark(json.dumps({
            "name": "dsm", "horizon": 5.0, "dt": 1.0,
            "inputs": [{"name": "u", "min": -0.35, "max": 0.35}],
            "model": {"kind": "delta_sigma"},
            "specs": {"phi": "alw[0,5](x1 <= 10)"},
        }))
        out = simulate(bench, constant_inputs(bench, [0.0]))
        expected = self.hand_iterate([0.0] * 5)
        for k, (x1, x2, x3) in enumerate(expected):
            assert out.channel("x1")[k] == pytest.approx(x1, abs=1e-12)
            assert out.channel("x2")[k] == pytest.approx(x2, abs=1e-12)
            assert out.channel("x3")[k] == pytest.approx(x3, abs=1e-12)

    def test_initial_conditions_via_statics(self):
        bench = builtin_benchmark("dsm")
        out = simulate(bench, constant_inputs(bench, [0.0]),
                       {"x1_init": 0.1, "x2_init": -0.05, "x3_init": 0.02})
        assert out.channel("x1")[0] == 0.1
        assert out.channel("x2")[0] == -0.05
        assert out.channel("x3")[0] == 0.02

    def test_static_outside_range_rejected(self):
        bench = builtin_benchmark("dsm")
        with pytest.raises(ValueError):
            simulate(bench, constant_inputs(bench, [0.0]), {"x1_init": 0.5})


class TestSwitchedSystem:
    def test_zero_input_stays_at_origin(self):
        b = builtin_benchmark("ss")
        out = simulate(b, constant_inputs(b, [0.0, 0.0]))
        assert np.all(out.channel("x1") == 0.0)
        assert np.all(out.channel("x2") == 0.0)

    def test_threshold_changes_trajectory(self):
        b = builtin_benchmark("ss")
        u = constant_inputs(b, [1.0, 0.0])
        low = simulate(b, u, {"thresh": 0.65})
        high = simulate(b, u, {"thresh": 0.95})
        assert not np.allclose(low.channel("x1"), high.channel("x1"))


class TestSimulationFailures:
    def test_missing_channel(self):
        b = builtin_benchmark("cc")
        grid = b.grid()
        partial = Signal(times=grid, channels=(np.zeros(len(grid)),), channel_names=("throttle",))
        with pytest.raises(KeyError):
            simulate(b, partial)

    def test_wrong_grid(self):
        b = builtin_benchmark("lag")
        t = np.arange(5) * 0.1
        sig = Signal(times=t, channels=(np.zeros(5),), channel_names=("u",))
        with pytest.raises(ValueError):
            simulate(b, sig)

    def test_divergence_reported_as_simulation_error(self):
        # unstable lag (negative tau) blows up to non-finite state
        bench = load_benchmark(json.dumps({
            "name": "bad", "horizon": 2000.0, "dt": 1.0,
            "inputs": [{"name": "u", "min": 0.0, "max": 1.0}],
            "model": {"kind": "first_order_lag", "params": {"tau": -0.1}},
            "specs": {"phi": "alw[0,10](y <= 2)"},
        }))
        with pytest.raises(SimulationError):
            simulate(bench, constant_inputs(bench, [1.0]))


class TestLoadBenchmark:
    def base_doc(self):
        return {
            "name": "demo", "horizon": 10.0, "dt": 0.1,
            "inputs": [{"name": "u", "min": 0.0, "max": 1.0}],
            "model": {"kind": "first_order_lag"},
            "specs": {"phi": "alw[0,10](y <= 1)"},
        }

    def test_shipped_cc(self):
        b = builtin_benchmark("cc")
        assert len(b.inputs) == 2
        for _, rng in b.inputs:
            assert (rng.lower, rng.upper) == (0.0, 1.0)

    def test_shipped_dsm_range(self):
        b = builtin_benchmark("dsm")
        assert b.inputs[0][1].lower == -0.35
        assert b.inputs[0][1].upper == 0.35

    def test_all_builtins_load(self):
        for name in builtin_benchmark_names():
            b = builtin_benchmark(name)
            assert b.specs

    def test_missing_horizon(self):
        doc = self.base_doc()
        del doc["horizon"]
        with pytest.raises(ValueError, match="horizon"):
            load_benchmark(json.dumps(doc))

    def test_unknown_key_rejected(self):
        doc = self.base_doc()
        doc["extra"] = 1
        with pytest.raises(ValueError, match="unknown keys"):
            load_benchmark(json.dumps(doc))

    def test_inverted_range_rejected(self):
        doc = self.base_doc()
        doc["inputs"][0]["min"] = 2.0
        with pytest.raises(ValueError):
            load_benchmark(json.dumps(doc))

    def test_unparseable_spec_rejected(self):
        doc = self.base_doc()
        doc["specs"]["phi"] = "alw[0,10]("
        with pytest.raises(Exception):
            load_benchmark(json.dumps(doc))

    def test_spec_horizon_exceeding_benchmark_rejected(self):
        doc = self.base_doc()
        doc["specs"]["phi"] = "alw[0,20](y <= 1)"
        with pytest.raises(ValueError, match="horizon"):
            load_benchmark(json.dumps(doc))

    def test_unknown_model_kind(self):
        doc = self.base_doc()
        doc["model"]["kind"] = "quadcopter"
        with pytest.raises(ValueError):
            load_benchmark(json.dumps(doc))

    def test_zero_horizon_rejected(self):
        with pytest.raises(ValueError):
            Benchmark(
                name="x", inputs=(("u", __import__("pulsefalsify").InputRange(0, 1)),),
                horizon=0.0, dt=0.1, model=ModelSpec("first_order_lag"),
                spec_texts={"phi": "y > 0"},
            )
