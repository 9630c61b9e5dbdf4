#include "doctest.h"

#include "zvlab/drift.hpp"
#include "zvlab/error.hpp"
#include "zvlab/grid.hpp"
#include "zvlab/mollify.hpp"
#include "zvlab/zvonkin.hpp"

#include <array>
#include <cmath>
#include <filesystem>

using namespace zvlab;

namespace {

SpaceTimeGrid grid_1d(double T, double L, std::size_t n_t, std::size_t n_x) {
    SpaceTimeGrid g;
    g.T = T;
    g.L = L;
    g.n_t = n_t;
    g.n_x = n_x;
    g.d = 1;
    return g;
}

double at(const GridField& f, double t, double x) {
    std::array<double, 1> out{};
    f.interpolate(t, scalar_vec(x), out);
    return out[0];
}

}  // namespace

TEST_CASE("grid geometry") {
    SpaceTimeGrid g = grid_1d(1.0, 2.0, 10, 41);
    CHECK(g.dx() == doctest::Approx(0.1));
    CHECK(g.coord(20) == doctest::Approx(0.0));
    CHECK(g.on_boundary(0));
    CHECK_FALSE(g.on_boundary(20));
    const SpaceTimeGrid r = g.refined();
    CHECK(r.n_t == 20);
    CHECK(r.dx() == doctest::Approx(0.05));
    g.n_x = 1;
    CHECK_THROWS_AS(g.validate(), DomainError);

    SpaceTimeGrid g2 = grid_1d(1.0, 1.0, 4, 5);
    g2.d = 2;
    for (std::size_t node = 0; node < g2.nodes(); ++node) {
        std::size_t idx[2] = {0, 0};
        g2.unflatten(node, idx);
        CHECK(g2.flatten(idx) == node);
    }
}

TEST_CASE("constant drift: closed-form resolvent") {
    // u(t) = (c / lambda) (1 - exp(-lambda (T - t))) away from the boundary.
    const double c = 1.0, lambda = 1.0;
    const DriftField b = constant_drift(scalar_vec(c));
    const SpaceTimeGrid g = grid_1d(1.0, 6.0, 200, 241);
    const PdeSolution sol = solve_backward_pde(b, b, lambda, g);
    double worst = 0.0;
    for (std::size_t k = 0; k <= g.n_t; k += 10) {
        const double t = g.time(k);
        const double exact = c / lambda * (1.0 - std::exp(-lambda * (g.T - t)));
        for (double x = -2.0; x <= 2.0; x += 0.25) worst = std::max(worst, std::abs(at(sol.u, t, x) - exact));
    }
    CHECK(worst < 3e-3);
    CHECK(sol.max_cfl > 0.0);
}

TEST_CASE("solution is linear in the source") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const SpaceTimeGrid g = grid_1d(1.0, 4.0, 100, 161);
    const PdeSolution one = solve_backward_pde(b, b, 2.0, g);
    const PdeSolution two = solve_backward_pde(b, scale(b, 2.0), 2.0, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < one.u.values.size(); ++i) {
        worst = std::max(worst, std::abs(two.u.values[i] - 2.0 * one.u.values[i]));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("solution respects the resolvent bound") {
    // |u| <= sup|phi| (1 - exp(-lambda T)) / lambda
    const DriftField b = mollify(sign_drift(1), 0.05);
    const SpaceTimeGrid g = grid_1d(1.0, 4.0, 100, 161);
    for (double lambda : {0.5, 1.0, 4.0}) {
        const PdeSolution sol = solve_backward_pde(b, b, lambda, g);
        double sup = 0.0;
        for (double v : sol.u.values) sup = std::max(sup, std::abs(v));
        CHECK(sup <= (1.0 - std::exp(-lambda)) / lambda + 1e-12);
    }
}

TEST_CASE("richardson estimate tracks the discretisation error") {
    const DriftField b = constant_drift(scalar_vec(1.0));
    const double r = richardson_estimate(b, b, 1.0, grid_1d(1.0, 6.0, 50, 61));
    CHECK(r > 0.0);
    CHECK(r < 0.05);
}

TEST_CASE("calibrated zvonkin transform") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const SpaceTimeGrid g = grid_1d(1.0, 6.0, 200, 601);
    const ZvonkinSolution sol = calibrate_lambda(b, g, 0.5);
    CHECK(sol.diagnostics.sup_grad_u <= 0.5);
    CHECK(sol.diagnostics.injective);
    CHECK(sol.diagnostics.sup_grad_gamma_inv <= 2.0);
    REQUIRE_FALSE(sol.trace.empty());
    CHECK(sol.trace.back().first == sol.lambda);
    CHECK(std::log2(sol.lambda) == doctest::Approx(std::round(std::log2(sol.lambda))));
    // every rejected lambda failed the target
    for (std::size_t i = 0; i + 1 < sol.trace.size(); ++i) CHECK(sol.trace[i].second > 0.5);

    SUBCASE("gamma round trip") {
        for (double t : {0.0, 0.37, 0.9}) {
            for (double x = -3.0; x <= 3.0; x += 0.31) {
                const Vec y = gamma_forward(sol, t, scalar_vec(x));
                const Vec back = gamma_inverse(sol, t, y);
                CHECK(std::abs(back(0) - x) < 1e-9);
            }
        }
    }
    SUBCASE("inverse jacobian bound") {
        for (double y = -3.0; y <= 3.0; y += 0.1) {
            CHECK(operator_norm(gamma_inverse_jacobian(sol, 0.5, scalar_vec(y))) <= 2.05);
        }
    }
    SUBCASE("terminal value vanishes") {
        for (double x = -2.0; x <= 2.0; x += 0.5) CHECK(sol.value(1.0, scalar_vec(x))(0) == doctest::Approx(0.0));
    }
    SUBCASE("csv round trip") {
        const auto path = std::filesystem::temp_directory_path() / "zvlab_unit_zvonkin.csv";
        write_solution_csv(sol, path);
        const ZvonkinSolution back = read_solution_csv(path, sol.lambda);
        CHECK(GridField::max_abs_diff(back.U, sol.U) == 0.0);
    }
}

TEST_CASE("unreachable calibration target carries its trace") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const SpaceTimeGrid g = grid_1d(1.0, 4.0, 20, 81);
    try {
        calibrate_lambda(b, g, 1e-9);
        FAIL("expected CalibrationError");
    } catch (const CalibrationError& e) {
        CHECK(e.trace().size() == 21);
    }
    CHECK_THROWS_AS(calibrate_lambda(b, g, 0.0), DomainError);
}
