"""
Unit tests for the gradient surrogates.
"""
import math

import numpy as np
import pytest


def _mean_and_se(draws):
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])


class TestEstimatorConfig:
    """Configuration checks."""

    def test_smoothed_needs_positive_mu(self):
        from zomd.errors import ZomdError
        from zomd.estimators import EstimatorConfig

        with pytest.raises(ZomdError):
            EstimatorConfig("smoothed", scheme="l2-sphere", mu=0.0)

    def test_mu_above_mu0(self, linear_problem):
        """mu beyond the neighborhood radius is a domain error."""
        from zomd.errors import DomainError
        from zomd.estimators import EstimatorConfig

        with pytest.raises(DomainError):
            EstimatorConfig("smoothed", scheme="l2-sphere", mu=2.0).check_against(linear_problem)

    @pytest.mark.parametrize("name,step,largest", [
        ("p1", "mu", 1.0),
        ("p2", "mu", 0.5),
        ("pinf", "mu", 0.25),
        ("rademacher", "tau", 0.25),
        ("coordinate", "tau", 0.5),
    ])
    def test_step_scaled_by_direction_extent(self, linear_problem, name, step, largest):
        """mu (or tau) times the largest l1 norm of a direction must stay within mu0 = 1 for n = 4."""
        from zomd.errors import DomainError
        from zomd.estimators import named_estimator

        named_estimator(name, **{step: largest}).check_against(linear_problem)
        with pytest.raises(DomainError):
            named_estimator(name, **{step: 1.01 * largest}).check_against(linear_problem)

    def test_named_estimators(self):
        """Command-line names map to families."""
        from zomd.estimators import EstimatorFamily, named_estimator

        assert named_estimator("p1", mu=0.1).family is EstimatorFamily.SMOOTHED_TWO_POINT
        assert named_estimator("rademacher", tau=0.01).two_point
        assert not named_estimator("directional-p2").two_point
        assert named_estimator("subgradient", mu=0.3).mu is None


class TestSmoothedTwoPoint:
    """Two-point smoothed estimator."""

    @pytest.mark.parametrize("scheme", ["l1-sphere", "l2-sphere", "linf-sphere"])
    def test_constant_function_gives_zero(self, constant_problem, rng, scheme):
        from zomd.estimators import EstimatorConfig, smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(constant_problem, NoiseChannel(), rng.substream(1))
        config = EstimatorConfig("smoothed", scheme=scheme, mu=0.1)
        estimate = smoothed_two_point(config, oracle, np.full(4, 0.25), rng)
        assert np.array_equal(estimate.g, np.zeros(4))
        assert estimate.prefactor == pytest.approx(40.0)

    @pytest.mark.parametrize("scheme", ["l1-sphere", "l2-sphere", "linf-sphere"])
    def test_linear_mean_is_cost(self, linear_problem, rng, scheme):
        """The mean of g on <c, x> is c, whatever the scheme."""
        from zomd.estimators import EstimatorConfig, draw_smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(linear_problem, NoiseChannel(), rng.substream(1))
        config = EstimatorConfig("smoothed", scheme=scheme, mu=0.1)
        draws = draw_smoothed_two_point(config, oracle, np.full(4, 0.25), 200_000, rng)
        mean, se = _mean_and_se(draws)
        assert np.all(np.abs(mean - linear_problem.c) <= 4 * se + 1e-12)

    def test_cube_approximation_shrinks_mean(self, linear_problem, rng):
        """Directions from the solid cube scale the mean by n / (n + 1)."""
        from zomd.estimators import EstimatorConfig, draw_smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(linear_problem, NoiseChannel(), rng.substream(1))
        config = EstimatorConfig("smoothed", scheme="linf-ball", mu=0.1)
        draws = draw_smoothed_two_point(config, oracle, np.full(4, 0.25), 200_000, rng)
        mean, se = _mean_and_se(draws)
        assert np.all(np.abs(mean - 0.8 * linear_problem.c) <= 4 * se + 1e-12)

    def test_one_pair_per_draw(self, linear_problem, rng):
        from zomd.estimators import EstimatorConfig, smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(linear_problem, NoiseChannel("uniform", delta=0.01), rng.substream(1))
        config = EstimatorConfig("smoothed", scheme="l2-sphere", mu=0.1)
        for _ in range(3):
            smoothed_two_point(config, oracle, np.full(4, 0.25), rng)
        assert oracle.call_count == 6

    def test_hard_bound_l1(self, rng):
        """|g|_inf <= (M + 2 delta/mu) n for every l1-sphere draw."""
        from zomd.estimators import EstimatorConfig, draw_smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle
        from zomd.problems import NonsmoothDistL1
        from zomd.sampling import random_simplex_point

        problem = NonsmoothDistL1(np.array([0.2, 0.5, 0.3]), noise_radius=0.0)
        oracle = ZerothOrderOracle(problem, NoiseChannel("sign", delta=0.05), rng.substream(1))
        config = EstimatorConfig("smoothed", scheme="l1-sphere", mu=0.1)
        bound = (problem.M + 2 * 0.05 / 0.1) * 3
        assert bound == pytest.approx(6.0)
        for _ in range(20):
            x = random_simplex_point(3, rng)
            g = draw_smoothed_two_point(config, oracle, x, 5000, rng)
            assert np.max(np.abs(g)) <= bound * (1 + 1e-12)

    def test_noise_keeps_mean(self, quadratic_problem, rng):
        """Zero-mean oracle noise leaves the mean of g unchanged."""
        from zomd.estimators import EstimatorConfig, draw_smoothed_two_point
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        x = np.array([0.4, 0.3, 0.2, 0.1])
        config = EstimatorConfig("smoothed", scheme="l2-sphere", mu=0.1)
        clean = draw_smoothed_two_point(
            config, ZerothOrderOracle(quadratic_problem, NoiseChannel(), rng.substream(1)), x, 200_000, rng.substream(2)
        )
        noisy = draw_smoothed_two_point(
            config, ZerothOrderOracle(quadratic_problem, NoiseChannel("uniform", delta=0.01), rng.substream(3)),
            x, 200_000, rng.substream(4),
        )
        (m1, s1), (m2, s2) = _mean_and_se(clean), _mean_and_se(noisy)
        assert np.all(np.abs(m1 - m2) <= 4 * np.sqrt(s1 ** 2 + s2 ** 2))


class TestDirectionalExact:
    """Directional-derivative estimators."""

    def test_orthogonal_gradient_gives_zero(self):
        """A gradient orthogonal to e gives g = 0."""
        from zomd.estimators import directional_estimate
        from zomd.sampling import Direction

        e = Direction(np.array([0.0, 1.0, 0.0]), "l2-sphere")
        assert np.array_equal(directional_estimate(e, np.array([1.0, 0.0, 2.0])), np.zeros(3))

    def test_fixed_direction_l2(self):
        """n <grad, e> e for the l2 sphere."""
        from zomd.estimators import directional_estimate
        from zomd.sampling import Direction

        e = Direction(np.array([0.6, 0.8]), "l2-sphere")
        g = directional_estimate(e, np.array([1.0, 1.0]))
        assert np.allclose(g, 2 * 1.4 * np.array([0.6, 0.8]))

    @pytest.mark.parametrize("scheme", ["l1-sphere", "l2-sphere", "linf-sphere"])
    def test_unbiased_on_linear(self, rng, scheme):
        from zomd.estimators import draw_directional_exact
        from zomd.problems import LinearNoisy

        problem = LinearNoisy(np.array([0.3, 0.1, 0.5, 0.9]), noise_radius=0.2)
        draws = draw_directional_exact(scheme, problem, np.full(4, 0.25), 200_000, rng)
        mean, se = _mean_and_se(draws)
        assert np.all(np.abs(mean - problem.c) <= 4 * se)

    def test_sup_norm_moment_l2(self, rng):
        """E|g|_inf^2 stays under 4 ln n M2^2 on a quadratic, n = 8."""
        from zomd.estimators import draw_directional_exact
        from zomd.problems import make_problem
        from zomd.sampling import random_simplex_point

        problem = make_problem("quad", 8, rng)
        g = draw_directional_exact("l2-sphere", problem, random_simplex_point(8, rng), 100_000, rng)
        assert np.mean(np.max(np.abs(g), axis=1) ** 2) <= 4 * math.log(8) * problem.M2 ** 2


class TestZSchemes:
    """Z-randomized estimators."""

    def test_rademacher_moment(self, quadratic_problem, rng):
        """E|g|_inf^2 <= M2^2 for Rademacher Z."""
        from zomd.estimators import draw_z_scheme

        g = draw_z_scheme(quadratic_problem, np.full(4, 0.25), "rademacher", 100_000, rng)
        assert np.mean(np.max(np.abs(g), axis=1) ** 2) <= quadratic_problem.M2 ** 2

    def test_coordinate_single_entry(self, linear_problem, rng):
        """Coordinate Z gives one nonzero entry n * partial derivative."""
        from zomd.estimators import z_scheme

        g = z_scheme(linear_problem, np.full(4, 0.25), "coordinate", rng).g
        i = int(np.flatnonzero(g)[0])
        assert np.count_nonzero(g) == 1
        assert g[i] == pytest.approx(4 * linear_problem.c[i])

    def test_rademacher_unbiased(self, quadratic_problem, rng):
        from zomd.estimators import draw_z_scheme

        x = np.array([0.4, 0.3, 0.2, 0.1])
        mean, se = _mean_and_se(draw_z_scheme(quadratic_problem, x, "rademacher", 200_000, rng))
        assert np.all(np.abs(mean - quadratic_problem.gradient(x)) <= 4 * se)

    def test_finite_diff_exact_on_linear(self, linear_problem, rng):
        """No curvature means the difference quotient is the directional derivative."""
        from zomd.estimators import z_finite_diff, z_scheme
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(linear_problem, NoiseChannel(), rng.substream(1))
        x = np.full(4, 0.25)
        fd = z_finite_diff(oracle, x, "rademacher", 0.05, rng.substream(2)).g
        exact = z_scheme(linear_problem, x, "rademacher", rng.substream(2)).g
        assert np.allclose(fd, exact)

    def test_finite_diff_constant_function(self, constant_problem, rng):
        from zomd.estimators import z_finite_diff
        from zomd.oracle import NoiseChannel, ZerothOrderOracle

        oracle = ZerothOrderOracle(constant_problem, NoiseChannel(), rng.substream(1))
        assert np.array_equal(z_finite_diff(oracle, np.full(4, 0.25), "gaussian", 0.01, rng).g, np.zeros(4))

    def test_finite_diff_bias_halves(self, rng):
        """On a quadratic the bias of coordinate g^tau is linear in tau."""
        from zomd.estimators import draw_z_finite_diff
        from zomd.oracle import NoiseChannel, ZerothOrderOracle
        from zomd.problems import SmoothQuadratic

        problem = SmoothQuadratic(np.array([0.1, 0.2, 0.3, 0.4]), noise_radius=0.0)
        x = np.full(4, 0.25)
        biases = []
        for tau in (0.2, 0.1):
            oracle = ZerothOrderOracle(problem, NoiseChannel(), rng.substream(1))
            draws = draw_z_finite_diff(oracle, x, "coordinate", tau, 200_000, rng.substream(2))
            biases.append(np.linalg.norm(draws.mean(axis=0) - problem.gradient(x)))
        assert biases[1] <= 0.6 * biases[0]


class TestEstimate:
    """Single draws through the solver's entry point."""

    @pytest.mark.parametrize("name", ["p1", "pinf-cube", "directional-p2", "z-gaussian", "rademacher", "subgradient"])
    def test_records_direction_stream(self, quadratic_problem, name):
        """Every estimate names the (seed, stream id, jumps) its randomness came from."""
        from zomd.estimators import estimate, named_estimator
        from zomd.oracle import NoiseChannel, ZerothOrderOracle
        from zomd.sampling import RngStream

        directions = RngStream(21, 1).substream(0)
        oracle = ZerothOrderOracle(quadratic_problem, NoiseChannel(), RngStream(21, 1).substream(1))
        config = named_estimator(name, mu=0.05, tau=0.05)
        result = estimate(config, quadratic_problem, oracle, np.full(4, 0.25), directions)
        assert result.stream == (21, 1, 1)
        assert result.g.shape == (4,)


class TestSmoothing:
    """Smoothed objective and constants."""

    def test_constant_smoothed_value(self, constant_problem, rng):
        from zomd.estimators import smoothed_value

        result = smoothed_value(constant_problem, np.full(4, 0.25), 0.1, "l1-ball", 1000, rng)
        assert result.estimate == 5.0
        assert result.std_error == 0.0

    def test_linear_smoothed_value(self, linear_problem, rng):
        """Ball symmetry cancels the linear term."""
        from zomd.estimators import smoothed_value

        x = np.full(4, 0.25)
        result = smoothed_value(linear_problem, x, 0.3, "l2-ball", 100_000, rng)
        assert abs(result.estimate - linear_problem.value(x)) <= 4 * result.std_error

    def test_quadratic_smoothing_bias(self, rng):
        """0 <= f^mu - f <= L mu^2 / 2."""
        from zomd.estimators import smoothed_value
        from zomd.problems import SmoothQuadratic

        problem = SmoothQuadratic(np.array([0.1, 0.2, 0.3, 0.4]), noise_radius=0.0)
        x = np.full(4, 0.25)
        mu = 0.2
        result = smoothed_value(problem, x, mu, "l2-ball", 100_000, rng)
        gap = result.estimate - problem.value(x)
        assert -4 * result.std_error <= gap <= problem.L2 * mu ** 2 / 2 + 4 * result.std_error

    def test_non_ball_scheme_rejected(self, linear_problem, rng):
        from zomd.errors import ZomdError
        from zomd.estimators import smoothed_value

        with pytest.raises(ZomdError):
            smoothed_value(linear_problem, np.full(4, 0.25), 0.1, "l2-sphere", 10, rng)

    def test_fd_gradient_of_quadratic(self, rng):
        """The smoothed gradient of a quadratic is its gradient."""
        from zomd.estimators import smoothed_gradient_fd
        from zomd.problems import SmoothQuadratic

        problem = SmoothQuadratic(np.array([0.1, 0.2, 0.3, 0.4]), noise_radius=0.0)
        x = np.array([0.4, 0.3, 0.2, 0.1])
        grad, se = smoothed_gradient_fd(problem, x, 0.1, "l1-ball", 50_000, rng)
        assert np.all(np.abs(grad - problem.gradient(x)) <= 4 * se + 1e-9)


class TestVolumes:
    """l1 volume ratio."""

    @pytest.mark.parametrize("n,mu,expected", [(2, 1.0, 0.353553), (3, 0.3, 0.057735)])
    def test_ratio_values(self, n, mu, expected):
        from zomd.estimators import l1_volume_ratio

        assert l1_volume_ratio(n, mu) == pytest.approx(expected, abs=1e-6)

    def test_ratio_linear_in_mu(self):
        from zomd.estimators import l1_volume_ratio

        assert l1_volume_ratio(5, 0.4) == pytest.approx(2 * l1_volume_ratio(5, 0.2))

    def test_closed_forms_agree(self):
        """Ball volume over sphere area equals the ratio."""
        from zomd.estimators import l1_ball_volume, l1_sphere_volume, l1_volume_ratio

        for n in range(2, 9):
            assert l1_ball_volume(n, 0.7) / l1_sphere_volume(n, 0.7) == pytest.approx(l1_volume_ratio(n, 0.7))

    def test_square_area(self):
        """In the plane the l1 ball of radius 1 has area 2 and perimeter 4 sqrt(2)."""
        from zomd.estimators import l1_ball_volume, l1_sphere_volume

        assert l1_ball_volume(2, 1.0) == pytest.approx(2.0)
        assert l1_sphere_volume(2, 1.0) == pytest.approx(4 * math.sqrt(2))

    def test_smoothing_bias_bound(self):
        from zomd.estimators import smoothing_bias_bound

        assert smoothing_bias_bound(1.0, 1.0, 0.1) == pytest.approx(0.005)
        assert smoothing_bias_bound(1.0, math.inf, 0.1) == pytest.approx(0.1)
