import math

import numpy as np
import pytest

from overwatch.se3 import (
    FrameId,
    Pose,
    RelativeStream,
    StampedRelative,
    WORLD,
    compose,
    invert,
    pose_error,
    relative_between_ugvs,
    relative_in_world,
    reset_mav_world,
    yaw_of,
)

from oracles import matrix_compose, pose_matrix_error, pose_to_matrix, random_pose


def test_compose_identity_left_and_right():
    rng = np.random.default_rng(1)
    p = random_pose(rng)
    ident = Pose.identity()
    for result in (compose(ident, p), compose(p, ident)):
        t_err, r_err = pose_error(result, p)
        assert t_err < 1e-12 and r_err < 1e-9


def test_compose_with_inverse_is_identity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = random_pose(rng)
        t_err, r_err = pose_error(compose(p, invert(p)), Pose.identity())
        assert t_err < 1e-9 and r_err < 1e-9


def test_compose_translation_after_yaw():
    a = Pose.from_xy_yaw(1.0, 0.0, math.pi / 2)
    b = Pose.from_xy_yaw(1.0, 0.0, 0.0)
    c = compose(a, b)
    assert np.allclose(c.translation, [1.0, 1.0, 0.0], atol=1e-12)
    assert abs(yaw_of(c) - math.pi / 2) < 1e-12


def test_compose_matches_matrix_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = random_pose(rng), random_pose(rng)
        assert pose_matrix_error(compose(a, b), matrix_compose(a, b)) < 1e-9


def test_compose_associativity():
    rng = np.random.default_rng(4)
    for _ in range(200):
        a, b, c = (random_pose(rng) for _ in range(3))
        t_err, r_err = pose_error(compose(compose(a, b), c), compose(a, compose(b, c)))
        assert t_err < 1e-9 and r_err < 1e-9


def test_quaternion_stays_normalized():
    rng = np.random.default_rng(5)
    p = random_pose(rng)
    for _ in range(100):
        p = compose(p, random_pose(rng))
        assert abs(np.linalg.norm(p.rotation) - 1.0) < 1e-9


def test_relative_in_world_identity_chain():
    ident = Pose.identity()
    out = relative_in_world(ident, ident, ident)
    t_err, r_err = pose_error(out, ident)
    assert t_err < 1e-12 and r_err < 1e-12


def test_relative_in_world_left_translation():
    lift = Pose(np.array([0.0, 0.0, 2.0]), np.array([1.0, 0, 0, 0]))
    rel = Pose.from_rpy(np.array([0.3, -0.1, 1.9]), yaw=0.4)
    out = relative_in_world(lift, Pose.identity(), rel)
    t_err, r_err = pose_error(out, compose(lift, rel))
    assert t_err < 1e-12 and r_err < 1e-12


def test_relative_in_world_matches_matrix_product():
    rng = np.random.default_rng(6)
    for _ in range(500):
        t_m_w, t_c_m, rel = (random_pose(rng) for _ in range(3))
        oracle = matrix_compose(t_m_w, t_c_m, rel)
        assert pose_matrix_error(relative_in_world(t_m_w, t_c_m, rel), oracle) < 1e-9


def test_reset_zero_offset_returns_ugv_pose():
    rng = np.random.default_rng(7)
    t_u_w = random_pose(rng)
    out = reset_mav_world(t_u_w, Pose.identity())
    t_err, r_err = pose_error(out, t_u_w)
    assert t_err < 1e-12 and r_err < 1e-12


def test_reset_closure_on_random_inputs():
    rng = np.random.default_rng(8)
    for _ in range(300):
        t_u_w, rel = random_pose(rng), random_pose(rng)
        recovered = compose(reset_mav_world(t_u_w, rel), rel)
        t_err, r_err = pose_error(recovered, t_u_w)
        assert t_err < 1e-9 and r_err < 1e-9


def test_reset_example_two_meters_above():
    t_u_w = Pose(np.array([3.0, 1.0, 0.0]), np.array([1.0, 0, 0, 0]))
    rel = Pose(np.array([0.0, 0.0, -2.0]), np.array([1.0, 0, 0, 0]))
    out = reset_mav_world(t_u_w, rel)
    assert np.allclose(out.translation, [3.0, 1.0, 2.0], atol=1e-12)


def test_reset_is_idempotent_for_same_detection():
    rng = np.random.default_rng(9)
    t_u_w, rel = random_pose(rng), random_pose(rng)
    once = reset_mav_world(t_u_w, rel)
    twice = reset_mav_world(t_u_w, rel)
    assert np.array_equal(once.translation, twice.translation)
    assert np.array_equal(once.rotation, twice.rotation)


def test_relative_between_identical_poses_is_identity():
    rng = np.random.default_rng(10)
    p = random_pose(rng)
    t_err, r_err = pose_error(relative_between_ugvs(p, p), Pose.identity())
    assert t_err < 1e-9 and r_err < 1e-9


def test_relative_between_ugvs_five_meter_separation():
    # the two targets are placed 5 m apart
    t_i = Pose.identity()
    t_j = Pose(np.array([5.0, 0.0, 0.0]), np.array([1.0, 0, 0, 0]))
    rel = relative_between_ugvs(t_i, t_j)
    assert np.allclose(rel.translation, [5.0, 0.0, 0.0], atol=1e-12)


def test_relative_between_ugvs_with_yaw():
    t_i = Pose.from_xy_yaw(0.0, 0.0, math.pi / 2)
    t_j = Pose(np.array([5.0, 0.0, 0.0]), np.array([1.0, 0, 0, 0]))
    rel = relative_between_ugvs(t_i, t_j)
    assert np.allclose(rel.translation, [0.0, -5.0, 0.0], atol=1e-9)
    assert abs(yaw_of(rel) + math.pi / 2) < 1e-12


def test_yaw_of_identity_and_quarter_turn():
    assert yaw_of(Pose.identity()) == 0.0
    assert abs(yaw_of(Pose.from_rpy(np.zeros(3), yaw=math.pi / 2)) - math.pi / 2) < 1e-12


def test_yaw_of_roll_then_yaw():
    # roll about x first, then yaw: the heading must read back untouched
    rolled = Pose.from_rpy(np.zeros(3), roll=math.radians(10))
    yawed = Pose.from_rpy(np.zeros(3), yaw=math.radians(30))
    combined = compose(yawed, rolled)
    assert abs(yaw_of(combined) - math.radians(30)) < 1e-9
    m = pose_to_matrix(combined)
    assert abs(yaw_of(combined) - math.atan2(m[1, 0], m[0, 0])) < 1e-12


def test_yaw_of_pure_yaw_round_trip():
    for psi in np.linspace(-math.pi + 1e-6, math.pi, 25):
        p = Pose.from_rpy(np.zeros(3), yaw=psi)
        wrapped = math.remainder(psi, 2 * math.pi)
        assert abs(yaw_of(p) - wrapped) < 1e-12


def test_yaw_in_half_open_interval():
    p = Pose.from_rpy(np.zeros(3), yaw=math.pi)
    assert -math.pi < yaw_of(p) <= math.pi


def test_pose_serialization_round_trip():
    rng = np.random.default_rng(11)
    p = random_pose(rng)
    obj = p.to_json()
    assert set(obj) == {"t", "q"} and len(obj["q"]) == 4
    back = Pose.from_json(obj)
    t_err, r_err = pose_error(p, back)
    assert t_err < 1e-12 and r_err < 1e-12


def test_matrix_round_trip():
    rng = np.random.default_rng(12)
    for _ in range(100):
        p = random_pose(rng)
        back = Pose.from_matrix(p.matrix())
        t_err, r_err = pose_error(p, back)
        assert t_err < 1e-9 and r_err < 1e-9


def test_frame_id_validation():
    assert str(FrameId.ugv("ugv3")) == "ugv:ugv3"
    assert WORLD.kind == "world"
    with pytest.raises(ValueError):
        FrameId("satellite")
    with pytest.raises(ValueError):
        FrameId("world", index="x")


def test_stamped_relative_stream_monotonic():
    stream = RelativeStream(WORLD, FrameId.ugv("u1"))
    stream.append(Pose.identity(), 0.0)
    stream.append(Pose.identity(), 0.5)
    with pytest.raises(ValueError):
        stream.append(Pose.identity(), 0.25)
    with pytest.raises(ValueError):
        StampedRelative(WORLD, FrameId.ugv("u1"), Pose.identity(), -1.0)
