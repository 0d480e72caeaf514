import numpy as np
import pytest

from pfsm_mpc.hysteresis import DEFAULT_PARAMS, BoucWenParams
from pfsm_mpc.lti import MimoPlantModel, TransferFunction, assemble_mimo, default_mirror_model, simulate_ss
from pfsm_mpc.plant import DisturbanceSpec, PfsmPlant

DT = 5e-4
ZERO_BW = BoucWenParams()


def make_plant(model, params=ZERO_BW, **kw):
    return PfsmPlant(model, params, params, DT, **kw)


def static_model(gxx=1.0, gyy=1.0):
    tf = lambda k: TransferFunction((k,), (1.0,))
    plant = MimoPlantModel(g_xx=tf(gxx), g_yy=tf(gyy), g_xy=tf(0.0), g_yx=tf(0.0))
    return assemble_mimo(plant, DT)


def default_model():
    return assemble_mimo(default_mirror_model(), DT)


class TestPlantStep:
    def test_equilibrium_at_bias(self):
        plant = make_plant(default_model())
        for _ in range(10):
            meas, true = plant.step(np.array([50.0, 50.0]))
            np.testing.assert_array_equal(true, [0.0, 0.0])
            np.testing.assert_array_equal(meas, true)

    def test_zero_hysteresis_equals_linear_simulation(self):
        model = default_model()
        plant = make_plant(model)
        rng = np.random.default_rng(0)
        u = rng.uniform(30.0, 70.0, (100, 2))
        got = np.array([plant.step(uk)[1] for uk in u])
        expect = simulate_ss(model, u - 50.0)
        np.testing.assert_array_equal(got, expect)

    def test_static_gain_example(self):
        plant = make_plant(static_model())
        _, true = plant.step(np.array([52.0, 49.0]))
        np.testing.assert_allclose(true, [4.0, -2.0])

    def test_determinism_per_seed(self):
        def run(seed):
            plant = make_plant(default_model(), sensor_noise_std=0.002, seed=seed)
            rng = np.random.default_rng(1)
            return np.array([plant.step(uk)[0] for uk in rng.uniform(40, 60, (50, 2))])

        a = run(123)
        b = run(123)
        c = run(124)
        np.testing.assert_array_equal(a, b)
        assert np.any(a != c)

    def test_superposition_in_linear_regime(self):
        model = default_model()
        rng = np.random.default_rng(2)
        u1 = rng.uniform(-5, 5, (80, 2))
        u2 = rng.uniform(-5, 5, (80, 2))

        def response(du):
            plant = make_plant(model)
            return np.array([plant.step(50.0 + uk)[1] for uk in du])

        lhs = response(u1 + u2)
        rhs = response(u1) + response(u2)
        scale = np.max(np.abs(rhs)) + 1e-30
        np.testing.assert_allclose(lhs, rhs, atol=1e-8 * scale)

    def test_constant_drive_settles(self):
        plant = make_plant(default_model(), params=DEFAULT_PARAMS)
        out = np.array([plant.step(np.array([50.0, 50.0]))[1] for _ in range(2000)])
        deltas = np.abs(np.diff(out[-100:], axis=0))
        assert deltas.max() < 1e-3

    def test_rejects_non_finite_drive(self):
        plant = make_plant(default_model())
        with pytest.raises(ValueError):
            plant.step(np.array([np.nan, 50.0]))

    def test_drive_clamped_to_physical_range(self):
        plant = make_plant(static_model())
        _, true = plant.step(np.array([150.0, -20.0]))
        np.testing.assert_allclose(true, [2 * 50.0, 2 * (-50.0)])
        assert plant.clamped_steps == 1


class TestDisturbanceSpec:
    def test_kinds(self):
        assert np.all(DisturbanceSpec().sample(0.3) == 0.0)
        np.testing.assert_allclose(DisturbanceSpec(kind="constant", value=2.0).sample(9.9), [2.0, 2.0])
        step = DisturbanceSpec(kind="step", value=(1.0, -1.0), start_time=0.1)
        np.testing.assert_allclose(step.sample(0.05), [0.0, 0.0])
        np.testing.assert_allclose(step.sample(0.1), [1.0, -1.0])
        sine = DisturbanceSpec(kind="sine", value=2.0, frequency=10.0)
        np.testing.assert_allclose(sine.sample(0.025), [2.0, 2.0])

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            DisturbanceSpec(kind="ramp")

    def test_input_disturbance_shifts_drive(self):
        model = static_model()
        clean = make_plant(model)
        shifted = make_plant(model, input_disturbance=DisturbanceSpec(kind="constant", value=1.0))
        _, y0 = clean.step(np.array([50.0, 50.0]))
        _, y1 = shifted.step(np.array([50.0, 50.0]))
        np.testing.assert_allclose(y1 - y0, [2.0, 2.0])

    def test_output_disturbance_adds_to_angle(self):
        plant = make_plant(static_model(), output_disturbance=DisturbanceSpec(kind="constant", value=0.1))
        _, true = plant.step(np.array([50.0, 50.0]))
        np.testing.assert_allclose(true, [0.1, 0.1])
