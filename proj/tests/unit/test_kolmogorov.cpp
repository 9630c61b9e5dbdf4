#include "doctest.h"

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/error.hpp"
#include "zvlab/kolmogorov.hpp"
#include "zvlab/lamperti.hpp"
#include "zvlab/mollify.hpp"
#include "zvlab/stats.hpp"

#include <cmath>
#include <vector>

using namespace zvlab;

namespace {

SpaceTimeGrid grid_1d(double T, double L, std::size_t n_t, std::size_t n_x) {
    SpaceTimeGrid g;
    g.T = T;
    g.L = L;
    g.n_t = n_t;
    g.n_x = n_x;
    return g;
}

}  // namespace

TEST_CASE("kolmogorov: heat equation with quadratic data") {
    // b = 0, phi = x^2: v(t, x) = x^2 + t
    const KolmogorovSolution sol = solve_kolmogorov(zero_drift(1), make_payoff("square"), grid_1d(1.0, 6.0, 100, 241));
    double worst = 0.0;
    for (double t : {0.25, 0.5, 1.0}) {
        for (double x = -2.0; x <= 2.0; x += 0.2) {
            worst = std::max(worst, std::abs(sol.value(t, scalar_vec(x)) - (x * x + t)));
            CHECK(sol.gradient(t, scalar_vec(x))(0) == doctest::Approx(2.0 * x).epsilon(1e-2).scale(1.0));
        }
    }
    CHECK(worst < 2e-3);
}

TEST_CASE("kolmogorov: OU with linear data") {
    // b = -x, phi = x: v(t, x) = x exp(-t)
    const KolmogorovSolution sol = solve_kolmogorov(ou_drift(1), make_payoff("identity"), grid_1d(1.0, 6.0, 500, 601));
    double worst = 0.0;
    for (double t : {0.25, 0.5, 1.0}) {
        for (double x = -2.0; x <= 2.0; x += 0.2) {
            worst = std::max(worst, std::abs(sol.value(t, scalar_vec(x)) - x * std::exp(-t)));
        }
    }
    CHECK(worst < 5e-3);
}

TEST_CASE("kolmogorov: semigroup property") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const Payoff phi = make_payoff("tanh");
    const KolmogorovSolution full = solve_kolmogorov(b, phi, grid_1d(1.0, 6.0, 200, 241));
    const KolmogorovSolution half = solve_kolmogorov(b, phi, grid_1d(0.5, 6.0, 100, 241));
    const KolmogorovSolution rest = continue_kolmogorov(half, 0.5, 100);
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        CHECK(rest.value(0.5, scalar_vec(x)) == doctest::Approx(full.value(1.0, scalar_vec(x))).epsilon(1e-12));
    }
}

TEST_CASE("kolmogorov: maximum principle for bounded data") {
    const KolmogorovSolution sol =
        solve_kolmogorov(mollify(sign_drift(1), 0.05), make_payoff("tanh"), grid_1d(1.0, 4.0, 100, 161));
    for (double v : sol.v.values) CHECK(std::abs(v) <= 1.0 + 1e-12);
}

TEST_CASE("kolmogorov: probe ladder and Monte Carlo comparison") {
    const SpaceTimeGrid g = grid_1d(1.0, 6.0, 500, 601);
    const auto probes = probe_ladder(g, 5);
    REQUIRE(probes.size() == 15);
    CHECK(probes.front().x(0) == doctest::Approx(-3.0));
    CHECK(probes[4].x(0) == doctest::Approx(3.0));

    const KolmogorovSolution sol = solve_kolmogorov(ou_drift(1), make_payoff("identity"), g);
    const BrownianEnsemble ens(4000, 500, g.dt(), 1, 44);
    const ComparisonRecord rec = compare_mc(sol, probes, ens, 5e-3);
    CHECK(rec.rows.size() == probes.size());
    CHECK(rec.passed);
    CHECK(rec.worst_excess <= 0.0);
}

TEST_CASE("lamperti: geometric brownian motion") {
    // sigma(y) = y: Lambda(y) = log(y / y0), b_* = mu - 1/2
    const double mu = 0.1;
    LampertiOptions opts;
    opts.lo = 1e-4;
    opts.hi = 1e4;
    opts.y0 = 1.0;
    const LampertiMap map = lamperti_transform([](double y) { return y; }, [mu](double y) { return mu * y; }, opts);
    for (double y : {1e-3, 0.5, 1.0, 3.0, 500.0}) {
        CHECK(std::abs(map.forward(y) - std::log(y)) < 1e-8);
        CHECK(std::abs(map.inverse(std::log(y)) / y - 1.0) < 1e-8);
        CHECK(map.b_star(std::log(y)) == doctest::Approx(mu - 0.5).epsilon(1e-6));
        CHECK(map.second_derivative(y) == doctest::Approx(-1.0 / (y * y)).epsilon(1e-5));
    }
    CHECK(map.identity_defect() < 1e-6);
    CHECK(map.roundtrip_defect() < 1e-8);
    CHECK_THROWS_AS(map.inverse(map.z_hi() + 1.0), ExtrapolationError);

    const BrownianEnsemble ens(5000, 100, 0.01, 1, 13);
    const NodeSamples s = lamperti_samples(map, 1.0, ens, std::vector<std::size_t>{100});
    const EstimatorResult r = summarize(s.values, 1, s.valid);
    CHECK(std::abs(r.mean[0] - std::exp(mu)) <= 3.0 * r.stderr_[0] + 5.0 * 0.01 * std::exp(mu));

    const NodeSamples d = diffusion_em_samples([mu](double y) { return mu * y; }, [](double y) { return y; }, 1.0,
                                               ens.independent(1), std::vector<std::size_t>{100});
    CHECK(ks_statistic(s.slice(0), d.slice(0)) < ks_critical_value(0.01, 5000, 5000));
}

TEST_CASE("lamperti: degenerate volatility is rejected") {
    LampertiOptions opts;
    opts.lo = -1.0;
    opts.hi = 1.0;
    CHECK_THROWS_AS(lamperti_transform([](double y) { return y; }, [](double) { return 0.0; }, opts), DomainError);
}

TEST_CASE("lamperti: constant volatility is a scaling") {
    LampertiOptions opts;
    opts.lo = -5.0;
    opts.hi = 5.0;
    opts.y0 = 0.0;
    const LampertiMap map = lamperti_transform([](double) { return 2.0; }, [](double y) { return -y; }, opts);
    for (double y : {-4.0, -1.0, 0.0, 2.5}) {
        CHECK(map.forward(y) == doctest::Approx(y / 2.0).scale(1.0).epsilon(1e-10));
        CHECK(map.b_star(y / 2.0) == doctest::Approx(-y / 2.0).scale(1.0).epsilon(1e-8));
    }
}
