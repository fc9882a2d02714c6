import numpy as np
import pytest

from intentplan.geometry import (
    GaussianSphere,
    KinematicChain,
    Link,
    Sphere,
    check_confidence,
    collision_bound,
    collision_bounds,
    density_peak,
    end_effector,
    forward_kinematics,
    gaussian_pdf,
    human_spheres,
    link_segments,
    mc_collision_oracle,
    robot_spheres,
)


def planar_two_link():
    return KinematicChain(links=(
        Link(offset=np.array([1.0, 0.0, 0.0]), axis=np.array([0, 0, 1.0]),
             spheres=((0.0, 0.1), (0.5, 0.1), (1.0, 0.1))),
        Link(offset=np.array([1.0, 0.0, 0.0]), axis=np.array([0, 0, 1.0]),
             spheres=((0.5, 0.1), (1.0, 0.1))),
    ))


class TestForwardKinematics:
    def test_straight_chain(self):
        np.testing.assert_allclose(end_effector(planar_two_link(), [0.0, 0.0]),
                                   [2.0, 0.0, 0.0], atol=1e-12)

    def test_first_joint_quarter_turn(self):
        np.testing.assert_allclose(end_effector(planar_two_link(), [np.pi / 2, 0.0]),
                                   [0.0, 2.0, 0.0], atol=1e-12)

    def test_composed_rotations(self):
        np.testing.assert_allclose(end_effector(planar_two_link(), [np.pi / 2, np.pi / 2]),
                                   [-1.0, 1.0, 0.0], atol=1e-12)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            forward_kinematics(planar_two_link(), np.zeros(3))


class TestRobotSpheres:
    def test_zero_offset_fixed_at_base(self):
        chain = planar_two_link()
        for q in ([0.0, 0.0], [1.0, -0.5], [np.pi / 2, 0.3]):
            s = robot_spheres(chain, q)[0]
            np.testing.assert_allclose(s.center, [0.0, 0.0, 0.0], atol=1e-12)

    def test_full_offset_at_end_effector(self):
        chain = planar_two_link()
        q = [0.7, -0.4]
        np.testing.assert_allclose(robot_spheres(chain, q)[-1].center,
                                   end_effector(chain, q), atol=1e-12)

    def test_axis_points_covered(self):
        chain = planar_two_link()
        rng = np.random.default_rng(0)
        for _ in range(100):
            q = rng.uniform(-np.pi, np.pi, 2)
            spheres = robot_spheres(chain, q)
            for start, end in link_segments(chain, q):
                for u in np.linspace(0, 1, 9):
                    p = start + u * (end - start)
                    covered = any(np.linalg.norm(p - s.center) <= s.radius + 0.51
                                  for s in spheres)
                    assert covered


class TestHumanSpheres:
    def _gaussians(self):
        return [
            (np.array([0.0, 0.0, 0.0]), 0.01 * np.eye(3)),
            (np.array([1.0, 0.0, 0.0]), 0.04 * np.eye(3)),
        ]

    def test_endpoints(self):
        spheres = human_spheres(self._gaussians(), [(0, 1)], [0.0, 1.0], 0.05)
        np.testing.assert_allclose(spheres[0].mean, [0, 0, 0])
        np.testing.assert_allclose(spheres[0].cov, 0.01 * np.eye(3))
        np.testing.assert_allclose(spheres[1].mean, [1, 0, 0])
        np.testing.assert_allclose(spheres[1].cov, 0.04 * np.eye(3))

    def test_midpoint_covariance(self):
        gs = [(np.zeros(3), 0.02 * np.eye(3)), (np.ones(3), 0.02 * np.eye(3))]
        s = human_spheres(gs, [(0, 1)], [0.5], 0.05)[0]
        np.testing.assert_allclose(s.cov, 0.01 * np.eye(3), atol=1e-15)

    def test_interpolation_formula_exact(self):
        rng = np.random.default_rng(1)
        a1 = rng.normal(size=(3, 3))
        a2 = rng.normal(size=(3, 3))
        s1, s2 = a1 @ a1.T, a2 @ a2.T
        mu1, mu2 = rng.normal(size=3), rng.normal(size=3)
        for u in (0.0, 0.25, 0.5, 0.9, 1.0):
            s = human_spheres([(mu1, s1), (mu2, s2)], [(0, 1)], [u], 0.03)[0]
            np.testing.assert_allclose(s.mean, (1 - u) * mu1 + u * mu2, atol=1e-14)
            np.testing.assert_allclose(s.cov, (1 - u) ** 2 * s1 + u**2 * s2, atol=1e-14)

    def test_u_outside_rejected(self):
        with pytest.raises(ValueError):
            human_spheres(self._gaussians(), [(0, 1)], [1.2], 0.05)


class TestCollisionBound:
    def test_coincident_center_closed_form(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.zeros(3), cov=0.1**2 * np.eye(3), radius=0.03)
        bound = collision_bound(rob, hum)
        closed = (4.0 / 3.0) * np.pi * 0.05**3 * (2 * np.pi * 0.01) ** -1.5
        np.testing.assert_allclose(bound, closed, rtol=1e-10)

    def test_far_apart_negligible(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.array([1.0, 0, 0]), cov=0.01**2 * np.eye(3),
                             radius=0.03)
        assert collision_bound(rob, hum) < 1e-12

    def test_paper_literal_exponent(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.zeros(3), cov=0.1**2 * np.eye(3), radius=0.03)
        literal = collision_bound(rob, hum, paper_literal_bound=True)
        default = collision_bound(rob, hum)
        np.testing.assert_allclose(literal, default / 0.05, rtol=1e-9)

    def test_monotone_in_radius_at_coincident_centers(self):
        hum = GaussianSphere(mean=np.zeros(3), cov=0.05**2 * np.eye(3), radius=0.01)
        bounds = [collision_bound(Sphere(center=np.zeros(3), radius=r), hum)
                  for r in np.linspace(0.005, 0.2, 20)]
        assert all(b >= a - 1e-15 for a, b in zip(bounds, bounds[1:]))

    def test_clamped_to_unit(self):
        rob = Sphere(center=np.zeros(3), radius=0.5)
        hum = GaussianSphere(mean=np.zeros(3), cov=1e-6 * np.eye(3), radius=0.5)
        assert collision_bound(rob, hum) == 1.0

    def test_indefinite_cov_rejected(self):
        rob = Sphere(center=np.zeros(3), radius=0.1)
        bad = np.diag([1.0, 1.0, -0.5])
        with pytest.raises(ValueError):
            collision_bounds(rob.center[None], np.array([0.1]),
                             np.zeros((1, 3)), bad[None], np.array([0.1]))

    def test_bisection_residual(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.normal(size=(3, 3))
            cov = a @ a.T * 0.001 + 1e-8 * np.eye(3)
            mu = rng.normal(0, 0.3, 3)
            rob = Sphere(center=rng.normal(0, 0.3, 3), radius=rng.uniform(0.01, 0.15))
            hum = GaussianSphere(mean=mu, cov=cov, radius=rng.uniform(0.01, 0.15))
            rr = rob.radius + hum.radius
            if np.linalg.norm(mu - rob.center) <= rr:
                continue
            x = density_peak(rob, hum)
            assert abs(np.linalg.norm(x - rob.center) - rr) < 1e-9

    def test_peak_dominates_ball_samples(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = rng.normal(size=(3, 3))
            cov = a @ a.T * 0.002 + 1e-8 * np.eye(3)
            mu = rng.normal(0, 0.2, 3)
            rob = Sphere(center=rng.normal(0, 0.2, 3), radius=rng.uniform(0.02, 0.1))
            hum = GaussianSphere(mean=mu, cov=cov, radius=rng.uniform(0.02, 0.1))
            x = density_peak(rob, hum)
            rr = rob.radius + hum.radius
            z = rng.standard_normal((2000, 3))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            pts = rob.center + z * (rng.uniform(0, 1, (2000, 1)) ** (1 / 3) * rr)
            f_x = gaussian_pdf(x, mu, cov)
            f_pts = gaussian_pdf(pts, mu, cov)
            assert f_x >= f_pts.max() - 1e-9 * f_x

    def test_soundness_against_oracle_sweep(self):
        rng = np.random.default_rng(9)
        for i in range(100):
            a = rng.normal(size=(3, 3))
            cov = a @ a.T * rng.uniform(0.0005, 0.01) + 1e-9 * np.eye(3)
            rob = Sphere(center=rng.normal(0, 0.25, 3), radius=rng.uniform(0.01, 0.15))
            hum = GaussianSphere(mean=rng.normal(0, 0.25, 3), cov=cov,
                                 radius=rng.uniform(0.01, 0.15))
            bound = collision_bound(rob, hum)
            est = mc_collision_oracle(rob, hum, samples=20000, seed=i)
            se = np.sqrt(max(est * (1 - est), 1e-12) / 20000)
            assert bound >= est - 3 * se


class TestMcOracle:
    def test_point_mass_inside(self):
        rob = Sphere(center=np.zeros(3), radius=0.05)
        hum = GaussianSphere(mean=np.zeros(3), cov=1e-12 * np.eye(3), radius=0.05)
        assert mc_collision_oracle(rob, hum, 1000, seed=0) == 1.0

    def test_separated_zero(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        sigma = 0.01
        hum = GaussianSphere(mean=np.array([10 * (sigma + 0.05), 0, 0]),
                             cov=sigma**2 * np.eye(3), radius=0.03)
        assert mc_collision_oracle(rob, hum, 10**5, seed=1) == 0.0

    def test_frozen_reference_value(self):
        # analytic value P(chi2_3 <= 0.25) = 0.030860; frozen from this oracle
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.zeros(3), cov=0.1**2 * np.eye(3), radius=0.03)
        est = mc_collision_oracle(rob, hum, 10**6, seed=12345)
        assert est == pytest.approx(0.030794, abs=1e-6)
        assert abs(est - 0.030860) < 3 * np.sqrt(0.0309 * 0.9691 / 1e6)

    def test_seed_determinism(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.zeros(3), cov=0.01 * np.eye(3), radius=0.03)
        assert (mc_collision_oracle(rob, hum, 5000, seed=7)
                == mc_collision_oracle(rob, hum, 5000, seed=7))

    def test_invalid_samples_rejected(self):
        rob = Sphere(center=np.zeros(3), radius=0.02)
        hum = GaussianSphere(mean=np.zeros(3), cov=0.01 * np.eye(3), radius=0.03)
        with pytest.raises(ValueError):
            mc_collision_oracle(rob, hum, 0, seed=0)


class TestCheckConfidence:
    def test_pass_and_fail(self):
        assert check_confidence(0.03, 0.95)
        assert not check_confidence(0.06, 0.95)

    def test_table_levels(self):
        for delta in (0.90, 0.95, 0.99):
            assert check_confidence(0.0, delta)
            assert not check_confidence(1.0, delta)

    def test_invalid_delta_rejected(self):
        with pytest.raises(ValueError):
            check_confidence(0.5, 1.5)
