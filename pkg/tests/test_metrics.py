import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from oracles import ncc_direct
from sipservo import afm, metrics
from sipservo.kinematics import FrameError, Pose

seeds = st.integers(0, 2**32 - 1)


def noise_image(seed, shape=(32, 32)):
    return np.random.default_rng(seed).integers(0, 256, shape).astype(np.uint8)


# ---- NCC ---------------------------------------------------------------------

def test_ncc_self_and_negation():
    a = noise_image(1)
    assert metrics.ncc(a, a) == pytest.approx(1.0)
    assert metrics.ncc(a, 255 - a.astype(int)) == pytest.approx(-1.0)


@given(seeds)
def test_ncc_matches_direct_summation(seed):
    a, b = noise_image(seed, (8, 8)), noise_image(seed + 1, (8, 8))
    assert metrics.ncc(a, b) == pytest.approx(ncc_direct(a, b), abs=1e-10)


@given(seeds, st.floats(0.1, 10), st.floats(-100, 100))
def test_ncc_affine_invariance(seed, alpha, beta):
    a, b = noise_image(seed), noise_image(seed + 1)
    got = metrics.ncc(a, alpha * b.astype(float) + beta)
    assert got == pytest.approx(metrics.ncc(a, b), abs=1e-10)


def test_ncc_constant_images():
    c = np.full((8, 8), 7.0)
    with pytest.raises(metrics.UndefinedCorrelationError):
        metrics.ncc(c, c)
    assert metrics.ncc(c, noise_image(0, (8, 8))) == 0.0
    with pytest.raises(ValueError):
        metrics.ncc(np.zeros((2, 2)), np.zeros((3, 3)))


# ---- SSD / NSSD --------------------------------------------------------------

def test_nssd_examples():
    a, b = noise_image(3), noise_image(4)
    s = metrics.ssd(a, b)
    assert metrics.nssd(a, a, s) == 1.0
    assert metrics.nssd(a, b, s) == 0.0
    assert metrics.nssd(a, b, 2 * s) == pytest.approx(0.5)
    assert metrics.nssd(a, a, 0.0) == 1.0
    with pytest.raises(ValueError):
        metrics.nssd(a, b, s / 2)


def test_ssd_oracle():
    a, b = np.array([[1, 2], [3, 4]]), np.array([[0, 2], [5, 4]])
    assert metrics.ssd(a, b) == 1 + 4


# ---- MI / entropy ------------------------------------------------------------

@given(seeds)
def test_mi_identity_and_symmetry(seed):
    a, b = noise_image(seed), noise_image(seed + 1)
    assert metrics.mutual_information(a, a) == pytest.approx(metrics.entropy(a), abs=1e-12)
    assert metrics.mutual_information(a, b) == metrics.mutual_information(b, a)


def test_mi_independent_noise_is_small():
    a, b = noise_image(10, (256, 256)), noise_image(11, (256, 256))
    assert metrics.mutual_information(a, b) <= 0.05


def test_mi_float_and_uint8_binning_agree():
    a, b = noise_image(12), noise_image(13)
    assert metrics.mutual_information(a, b) == pytest.approx(
        metrics.mutual_information(a.astype(float), b.astype(float)), abs=1e-12)


def test_entropy_oracle():
    a = np.array([0, 0, 255, 255], dtype=np.uint8)
    assert metrics.entropy(a) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        metrics.mutual_information(a, a, bins=1)


# ---- losses ------------------------------------------------------------------

def test_bce_examples():
    t = np.array([1.0, 0.0, 1.0, 0.0])
    assert metrics.bce_loss(t, t) <= 1e-6
    assert metrics.bce_loss(np.full(4, 0.5), t) == pytest.approx(math.log(2), abs=1e-6)
    assert metrics.bce_loss(1 - t, t) == pytest.approx(-math.log(1e-7), abs=1e-6)
    assert -math.log(1e-7) == pytest.approx(16.12, abs=0.01)


def test_dice_examples():
    ones, zeros = np.ones(100), np.zeros(100)
    assert metrics.dice_loss(ones, ones) == pytest.approx(0.0, abs=1e-12)
    assert metrics.dice_loss(ones, zeros) == pytest.approx(1 - 1 / 101, abs=1e-6)
    assert metrics.dice_loss(ones, zeros) == pytest.approx(0.990099, abs=1e-6)
    assert metrics.dice_loss(zeros, zeros) == 0.0


def test_composite_examples():
    pred, truth = np.full(100, 0.5), np.zeros(100)
    bce, dice = metrics.bce_loss(pred, truth), metrics.dice_loss(pred, truth)
    assert metrics.composite_loss(pred, truth, metrics.LossConfig(1.0)) == bce
    assert metrics.composite_loss(pred, truth, metrics.LossConfig(0.0)) == dice
    assert 0.5 * 0.6931 + 0.5 * 0.9901 == pytest.approx(0.8416, abs=1e-4)
    with pytest.raises(ValueError):
        metrics.LossConfig(1.5)


@given(seeds, st.floats(0, 1))
def test_loss_bounds(seed, alpha):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(0, 1, 50)
    truth = (rng.uniform(0, 1, 50) > 0.5).astype(float)
    bce, dice = metrics.bce_loss(pred, truth), metrics.dice_loss(pred, truth)
    assert bce >= 0
    assert 0 <= dice < 1
    c = metrics.composite_loss(pred, truth, metrics.LossConfig(alpha))
    assert min(bce, dice) - 1e-12 <= c <= max(bce, dice) + 1e-12


# ---- pose error --------------------------------------------------------------

def test_pose_error_examples():
    R = np.diag([1.0, -1.0, -1.0])
    a = Pose(R, [0, 0, -0.007])
    assert metrics.pose_error(a, a) == (0.0, 0.0)
    b = Pose(R, [0.0175, 0, -0.007])
    mm, deg = metrics.pose_error(b, a)
    assert mm == pytest.approx(17.5) and deg == 0.0
    c = Pose(R @ Rotation.from_rotvec(np.radians(10) * np.array([1, 2, 3]) /
                                      math.sqrt(14)).as_matrix(), [0, 0, -0.007])
    mm, deg = metrics.pose_error(c, a)
    assert mm == 0.0 and deg == pytest.approx(10.0)


@given(seeds)
def test_pose_error_symmetric(seed):
    rng = np.random.default_rng(seed)
    Ra, Rb = Rotation.random(2, random_state=rng).as_matrix()
    a, b = Pose(Ra, rng.normal(size=3)), Pose(Rb, rng.normal(size=3))
    assert metrics.pose_error(a, b)[1] == pytest.approx(metrics.pose_error(b, a)[1], abs=1e-9)
    assert metrics.pose_error(a, b)[0] >= 0


def test_pose_error_frame_mismatch():
    with pytest.raises(FrameError):
        metrics.pose_error(Pose(np.eye(3), np.zeros(3)),
                           Pose(np.eye(3), np.zeros(3), "flange", "probe"))


# ---- paired distance ---------------------------------------------------------

def test_paired_pixel_distance():
    same = afm.match([(50, 50)], [(50, 50)])
    assert metrics.paired_pixel_distance({"PL": same}) == {"PL": 0.0, "RS": None}
    p = afm.match([(100, 100)], [(103, 104)], "PL")
    assert metrics.paired_pixel_distance({"PL": p})["PL"] == pytest.approx(5.0)


def test_rms():
    assert metrics.rms([3, -3, 3, -3]) == 3.0
    assert metrics.rms([]) == 0.0
