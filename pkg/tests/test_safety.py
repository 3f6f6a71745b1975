import numpy as np
import pytest

from phantomplan.safety import (CorridorConstraint, StopConstraint, YieldConstraint,
                                check_stop_feasibility, constraint_set,
                                stop_distance, yield_intention_clear)
from phantomplan.scene import PredictedObject
from phantomplan.trajectory import ManeuverId, Trajectory

from scenes import (LONG_STRAIGHT, combined_fixture, cruise_trajectory,
                    path_s, simple_scene, static_object)


def braking_distance_simulated(v0: float, a_max: float, dt: float = 1e-3) -> float:
    """Oracle: integrate the braking profile with exact per-step kinematics."""
    s, v = 0.0, v0
    while v > 0.0:
        step_t = min(dt, v / a_max)
        s += v * step_t - 0.5 * a_max * step_t ** 2
        v -= a_max * step_t
    return s


class TestStopDistance:
    def test_zero_speed(self):
        assert stop_distance(0.0, 8.0) == 0.0

    def test_kinematic_value_and_simulation_oracle(self):
        assert stop_distance(10.0, 8.0) == pytest.approx(6.25, abs=1e-12)
        assert stop_distance(10.0, 8.0) == pytest.approx(
            braking_distance_simulated(10.0, 8.0), abs=1e-6)

    def test_quadratic_law(self):
        assert stop_distance(20.0, 8.0) == pytest.approx(4 * stop_distance(10.0, 8.0))

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            stop_distance(-1.0, 8.0)

    def test_bad_deceleration_rejected(self):
        with pytest.raises(ValueError):
            stop_distance(5.0, 0.0)


class TestYieldIntention:
    def test_standing_vehicle_is_clear(self):
        assert yield_intention_clear(0.0, 0.0, 2.0)
        assert yield_intention_clear(0.0, 100.0, 2.0)

    def test_boundary_inclusive(self):
        # 10^2 / (2 * 2) = 25 exactly
        assert yield_intention_clear(10.0, 25.0, 2.0)

    def test_just_inside_boundary(self):
        assert not yield_intention_clear(10.0, 24.9, 2.0)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            yield_intention_clear(-1.0, 10.0, 2.0)
        with pytest.raises(ValueError):
            yield_intention_clear(1.0, -10.0, 2.0)


class TestCheckStopFeasibility:
    def test_distant_object_all_positive(self):
        t = cruise_trajectory(12, speed=0.0, s_world0=0.0, pin=2)
        obj = static_object("car", 150.0, t.n)
        margins = check_stop_feasibility(t, obj, 8.0, LONG_STRAIGHT)
        assert margins.shape == (2,)
        assert np.all(margins > 0.0)

    def test_standing_at_bound_margin_zero(self):
        obj = static_object("car", 30.0, 12, sigma=2.0, bound_sigmas=3.0)
        bound_world = 30.0 - 6.0
        t = cruise_trajectory(12, speed=0.0, s_world0=bound_world, pin=2)
        margins = check_stop_feasibility(t, obj, 8.0, LONG_STRAIGHT)
        assert margins == pytest.approx(np.zeros(2), abs=1e-9)

    def test_composed_stop_distance_fixture(self):
        # moving at 10 m/s toward a bound 6.25 m ahead: margin 0 at window start
        t = cruise_trajectory(12, speed=10.0, s_world0=0.0, pin=2)
        first_window_s = 10.0 * t.step * 2  # position at index n_pin
        obj = static_object("car", first_window_s + 6.25 + 6.0, t.n,
                            sigma=2.0, bound_sigmas=3.0)
        margins = check_stop_feasibility(t, obj, 8.0, LONG_STRAIGHT)
        assert margins[0] == pytest.approx(0.0, abs=1e-9)

    def test_monotone_in_braking_authority(self):
        t = cruise_trajectory(12, speed=12.0, pin=2)
        obj = static_object("car", 40.0, t.n)
        prev = None
        for a_max in (2.0, 4.0, 8.0, 12.0):
            margins = check_stop_feasibility(t, obj, a_max, LONG_STRAIGHT)
            if prev is not None:
                assert np.all(margins >= prev - 1e-12)
            prev = margins

    def test_short_predictions_rejected(self):
        t = cruise_trajectory(12, pin=4)
        obj = static_object("car", 40.0, 3)
        with pytest.raises(IndexError):
            check_stop_feasibility(t, obj, 8.0, LONG_STRAIGHT)


class TestConstraintSet:
    def _fixture(self, objects):
        v = combined_fixture(None, n=12, n_pin=2)
        scene = simple_scene(objects)
        return v, scene

    def test_empty_scene_only_corridor(self):
        v, scene = self._fixture([])
        records = constraint_set(scene, v, 8.0)
        assert all(isinstance(r, CorridorConstraint) for r in records)
        scopes = {r.scope for r in records}
        assert scopes == {"prefix", "A", "B"}

    def test_stop_window_exactness(self):
        n_b = 15
        v, scene = self._fixture([static_object("car", 60.0, n_b)])
        records = constraint_set(scene, v, 8.0)
        stops = [r for r in records if isinstance(r, StopConstraint)]
        assert len(stops) == 1
        assert stops[0].indices == (2, 3)   # {n_pin, ..., 2 n_pin - 1}

    def test_yield_rows_on_treating_branch_only(self):
        n_b = 15
        v, scene = self._fixture([static_object("car", 60.0, n_b, classes=("B",))])
        records = constraint_set(scene, v, 8.0)
        yields = [r for r in records if isinstance(r, YieldConstraint)]
        assert len(yields) == 1
        assert yields[0].branch == "B"
        # every branch index beyond the shared prefix, through the longer horizon
        assert yields[0].indices == tuple(range(5, 15))

    def test_both_class_object_constrains_both_branches(self):
        n_b = 15
        v, scene = self._fixture([static_object("car", 60.0, n_b, classes=("A", "B"))])
        yields = [r for r in constraint_set(scene, v, 8.0)
                  if isinstance(r, YieldConstraint)]
        assert {y.branch for y in yields} == {"A", "B"}

    def test_deactivated_equals_removed(self):
        n_b = 15
        obj = static_object("car", 60.0, n_b)
        inactive = PredictedObject(obj.object_id, obj.p_exist, obj.steps,
                                   constraints_active=False)
        v, scene_off = self._fixture([inactive])
        _, scene_empty = self._fixture([])
        assert constraint_set(scene_off, v, 8.0) == constraint_set(scene_empty, v, 8.0)

    def test_stop_bounds_use_most_conservative_class(self):
        n_b = 15
        s = path_s(LONG_STRAIGHT, 60.0)
        from phantomplan.probkit import TruncatedNormal
        near = TruncatedNormal(s, 1.0, s - 3.0, s + 3.0)
        far = TruncatedNormal(s + 10.0, 1.0, s + 7.0, s + 13.0)
        obj = PredictedObject("car", 1.0, {"A": tuple(far for _ in range(n_b)),
                                           "B": tuple(near for _ in range(n_b))})
        v, scene = self._fixture([obj])
        stops = [r for r in constraint_set(scene, v, 8.0)
                 if isinstance(r, StopConstraint)]
        assert stops[0].bounds == (s - 3.0, s - 3.0)

    def test_branch_band_override(self):
        v = combined_fixture(None, n=12, n_pin=2)
        scene = simple_scene([], band_a=(0.5, 2.5))
        records = constraint_set(scene, v, 8.0)
        band_a = [r for r in records
                  if isinstance(r, CorridorConstraint) and r.scope == "A"][0]
        assert (band_a.lo, band_a.hi) == (0.5, 2.5)
