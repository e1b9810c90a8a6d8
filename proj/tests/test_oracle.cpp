#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "iklflow/oracle.hpp"

using namespace iklflow;
using Vec = Eigen::VectorXd;

TEST_CASE("trapezoid quadrature") {
    const QuadratureGrid g(-10.0, 10.0, 20001);
    const double mass = quad_integral(
        [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); },
        g);
    CHECK(std::abs(mass - 1.0) < 1e-8);

    CHECK(quad_integral([](double) { return 0.0; }, g) == 0.0);
    // odd integrand over a symmetric grid
    CHECK(std::abs(quad_integral(
              [](double x) { return x * std::exp(-x * x); }, g)) < 1e-12);

    CHECK_THROWS_AS(quad_integral(
                        [](double x) {
                            return x == 0.0
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : 1.0;
                        },
                        QuadratureGrid(-1.0, 1.0, 3)),
                    NumericalError);
    CHECK_THROWS_AS(QuadratureGrid(1.0, -1.0, 10), InputError);
    CHECK_THROWS_AS(QuadratureGrid(0.0, 1.0, 1), InputError);
}

TEST_CASE("central finite differences") {
    const auto quadratic = [](const Vec &x) {
        return 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] - x[1];
    };
    Vec x(2);
    x << 0.7, -1.2;
    const Vec g = finite_diff_grad(quadratic, x, 1e-4);
    Vec exact(2);
    exact << 6.0 * x[0] + 2.0 * x[1], 2.0 * x[0] - 1.0;
    CHECK((g - exact).norm() / exact.norm() < 1e-8);

    const Vec zero = finite_diff_grad([](const Vec &) { return 4.2; }, x, 1e-4);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(finite_diff_grad(quadratic, x, 0.0), InputError);
    CHECK_THROWS_AS(finite_diff_grad(quadratic, x, -1e-4), InputError);
}

TEST_CASE("exhaustive simplex grid search") {
    // linear objective attains its minimum at a vertex
    const auto linear = [](const Vec &w) {
        return 3.0 * w[0] + 1.0 * w[1] + 2.0 * w[2];
    };
    const Vec v = simplex_grid_argmin(linear, 3, 0.1);
    CHECK(v[1] == doctest::Approx(1.0));
    CHECK(v[0] == doctest::Approx(0.0));
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-12));

    // resolution 1 only visits the vertices
    const auto quad = [](const Vec &w) {
        return (w[0] - 0.5) * (w[0] - 0.5) + w[1] * w[1];
    };
    const Vec vert = simplex_grid_argmin(quad, 2, 1.0);
    CHECK((vert[0] == 0.0 || vert[0] == 1.0));

    // fine grid localizes the interior optimum of
    // (w0-1/2)^2 + (1-w0)^2, which sits at w0 = 3/4
    const Vec fine = simplex_grid_argmin(quad, 2, 0.01);
    CHECK(fine[0] == doctest::Approx(0.75).epsilon(1e-9));

    CHECK_THROWS_AS(simplex_grid_argmin(linear, 5, 0.1), ScaleError);
    CHECK_THROWS_AS(simplex_grid_argmin(linear, 0, 0.1), ScaleError);
    CHECK_THROWS_AS(simplex_grid_argmin(linear, 3, 0.0), InputError);
    CHECK_THROWS_AS(simplex_grid_argmin(linear, 3, 2.0), InputError);
}
