#include "doctest.h"

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/error.hpp"
#include "zvlab/girsanov.hpp"
#include "zvlab/mollify.hpp"
#include "zvlab/sde.hpp"
#include "zvlab/sensitivity.hpp"
#include "zvlab/stats.hpp"
#include "zvlab/zvonkin.hpp"

#include <cmath>
#include <vector>

using namespace zvlab;

namespace {

const double kE1 = std::exp(-1.0);

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

}  // namespace

TEST_CASE("euler-maruyama with zero drift reproduces the brownian path") {
    const BrownianEnsemble ens(20, 50, 0.02, 2, 3);
    Vec x0(2);
    x0 << 1.0, -1.0;
    const PathEnsemble p = simulate_em(zero_drift(2), x0, ens);
    std::vector<double> inc(100);
    ens.path_increments(4, inc);
    double x = 1.0;
    for (std::size_t k = 0; k < 50; ++k) x += inc[2 * k];
    CHECK(p.state(4, 50, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(p.excluded() == 0);
}

TEST_CASE("euler-maruyama for OU has the exact discrete mean") {
    // E[X_n] = (1 - dt)^n x0
    const BrownianEnsemble ens(20000, 100, 0.01, 1, 8);
    const NodeSamples s = em_samples(ou_drift(1), scalar_vec(1.0), ens, std::vector<std::size_t>{100});
    const EstimatorResult r = summarize(s.values, 1);
    CHECK(within(r.mean[0], std::pow(0.99, 100), 4.0 * r.stderr_[0]));
}

TEST_CASE("node samples agree with materialized paths") {
    const BrownianEnsemble ens(30, 40, 0.025, 1, 21);
    const DriftField b = mollify(sign_drift(1), 0.1);
    const PathEnsemble p = simulate_em(b, scalar_vec(0.2), ens);
    const std::vector<std::size_t> nodes = {0, 13, 40};
    const NodeSamples s = em_samples(b, scalar_vec(0.2), ens, nodes);
    for (std::size_t path = 0; path < 30; ++path) {
        for (std::size_t j = 0; j < nodes.size(); ++j) CHECK(s.at(path, j) == p.state(path, nodes[j]));
    }
}

TEST_CASE("non-finite states are reported") {
    DriftField blow = zero_drift(1);
    blow.eval = [](double, const Vec& x) { return scalar_vec(1e300 * x(0) * x(0)); };
    const BrownianEnsemble ens(2, 10, 0.1, 1, 1);
    CHECK_THROWS_AS(simulate_em(blow, scalar_vec(1.0), ens), EvaluationError);
}

TEST_CASE("memory budget is enforced") {
    const BrownianEnsemble ens(100000, 1000, 0.001, 1, 1, std::size_t{1} << 20);
    CHECK_THROWS_AS(simulate_em(zero_drift(1), scalar_vec(0.0), ens), SizingError);
}

TEST_CASE("girsanov: constant drift identity and Doleans moments") {
    const double mu = 0.5;
    const DriftField b = constant_drift(scalar_vec(mu));
    const BrownianEnsemble ens(40000, 100, 0.01, 1, 12);
    const EstimatorResult w = girsanov_estimate([](const Vec& x) { return x(0); }, b, scalar_vec(0.0), 1.0, ens);
    CHECK(within(w.mean[0], mu, 3.0 * w.stderr_[0]));

    // The weights are heavy-tailed; a 4-sigma band keeps the false-alarm rate negligible.
    const WeightMoments m = weight_moments(b, scalar_vec(0.0), ens);
    CHECK(within(m.mean.mean[0], 1.0, 4.0 * m.mean.stderr_[0]));
    CHECK(within(m.mean_square.mean[0], std::exp(mu * mu), 4.0 * m.mean_square.stderr_[0]));
}

TEST_CASE("girsanov weighted estimate matches direct simulation") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const BrownianEnsemble ens(20000, 100, 0.01, 1, 77);
    const ScalarFn f = [](const Vec& x) { return std::tanh(x(0)); };
    const EstimatorResult w = girsanov_estimate(f, b, scalar_vec(0.3), 1.0, ens);
    const EstimatorResult d = em_estimate(f, b, scalar_vec(0.3), 1.0, ens.independent(1));
    CHECK(within(w.mean[0], d.mean[0], 3.0 * combined_stderr(w.stderr_[0], d.stderr_[0])));
}

TEST_CASE("exponential moment of a constant drift is exact") {
    const BrownianEnsemble ens(100, 50, 0.02, 1, 2);
    const EstimatorResult e = exp_moment_diagnostic(constant_drift(scalar_vec(0.5)), 2.0, scalar_vec(0.0), ens);
    CHECK(e.mean[0] == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
    CHECK(e.stderr_[0] < 1e-12);
}

TEST_CASE("fourth moment of brownian increments scales like lag^2") {
    const BrownianEnsemble ens(4000, 256, 1.0 / 256.0, 1, 31);
    const std::vector<double> lags = {1.0 / 128, 1.0 / 64, 1.0 / 32, 1.0 / 16};
    const ScalingFit fit = fourth_moment_scaling(zero_drift(1), scalar_vec(0.0), ens, lags);
    CHECK(fit.fit.slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(fit.fit.r2 > 0.99);
    // E|B_h|^4 = 3 h^2
    for (std::size_t l = 0; l < lags.size(); ++l) {
        CHECK(within(fit.moments[l], 3.0 * lags[l] * lags[l], 4.0 * fit.stderrs[l]));
    }
    CHECK_THROWS_AS(fourth_moment_scaling(zero_drift(1), scalar_vec(0.0), ens, std::vector<double>{0.003}),
                    DomainError);
}

TEST_CASE("first variation for OU is deterministic") {
    const double dt = 0.001;
    const BrownianEnsemble ens(16, 1000, dt, 1, 4);
    const PathEnsemble p = simulate_em(ou_drift(1), scalar_vec(0.5), ens);
    const VariationEnsemble z = first_variation(ou_drift(1), p);
    for (std::size_t path = 0; path < 16; ++path) {
        CHECK(z.at(path, 1000)(0, 0) == doctest::Approx(std::pow(1.0 - dt, 1000)).epsilon(1e-12));
        CHECK(within(z.at(path, 1000)(0, 0), kE1, 1e-3));
    }
    const VariationEnsemble d = malliavin_derivative(z, 0.5);
    CHECK(within(d.at(3, 1000)(0, 0), std::exp(-0.5), 1e-3));
    CHECK(d.at(3, 499)(0, 0) == 0.0);
    CHECK(d.at(3, 500)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("first variation matches a finite-difference flow derivative") {
    const DriftField b = mollify(sign_drift(1), 0.1);
    const BrownianEnsemble ens(50, 200, 0.005, 1, 9);
    const double h = 1e-6;
    const PathEnsemble up = simulate_em(b, scalar_vec(0.1 + h), ens);
    const PathEnsemble dn = simulate_em(b, scalar_vec(0.1 - h), ens);
    const PathEnsemble mid = simulate_em(b, scalar_vec(0.1), ens);
    const VariationEnsemble z = first_variation(b, mid);
    for (std::size_t path = 0; path < 50; ++path) {
        const double fd = (up.state(path, 200) - dn.state(path, 200)) / (2.0 * h);
        CHECK(z.at(path, 200)(0, 0) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("malliavin derivative composes along the flow") {
    // D_r X_t computed from Z_t Z_r^{-1} equals the variation restarted at r.
    const DriftField b = mollify(sign_drift(2), 0.2);
    const BrownianEnsemble ens(20, 100, 0.01, 2, 5);
    const PathEnsemble p = simulate_em(b, Vec::Zero(2), ens);
    const VariationEnsemble from0 = first_variation(b, p);
    const VariationEnsemble restarted = first_variation(b, p, 0.3);
    const VariationEnsemble d = malliavin_derivative(from0, 0.3);
    for (std::size_t path = 0; path < 20; ++path) {
        CHECK((d.at(path, 100) - restarted.at(path, 100)).norm() < 1e-12);
        CHECK(restarted.at(path, 20).norm() == 0.0);
    }
}

TEST_CASE("weights") {
    for (const auto& name : weight_presets()) {
        const WeightFunction w = make_weight(name, 2.0);
        CHECK_NOTHROW(validate_weight(w));
        const auto cells = w.cell_weights(0.01, 200);
        double total = 0.0;
        for (double c : cells) total += c * 0.01;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    WeightFunction half{"half", 1.0, [](double) { return 0.5; }};
    CHECK_THROWS_AS(validate_weight(half), DomainError);
    CHECK_THROWS_AS(make_weight("sideways", 1.0), Error);
    CHECK_THROWS_AS(make_weight("constant", 0.0), DomainError);
}

TEST_CASE("payoff gradients are consistent") {
    Vec x(2);
    x << 0.3, -0.7;
    for (const auto& name : payoff_presets()) {
        const Payoff p = make_payoff(name);
        if (p.has_grad()) CHECK(payoff_gradient_consistency(p, x) < 1e-6);
    }
    CHECK(make_payoff("constant", {{"value", "2.5"}})(x) == 2.5);
    CHECK(make_payoff("tanh").bounded);
    CHECK_FALSE(make_payoff("square").bounded);
}

TEST_CASE("BEL gradient oracles at small path counts") {
    const Payoff id = make_payoff("identity");
    const double dt = 0.01;
    const BrownianEnsemble ens(20000, 100, dt, 1, 123);

    SUBCASE("OU closed form, all weights") {
        std::vector<WeightFunction> ws;
        for (const auto& n : weight_presets()) ws.push_back(make_weight(n, 1.0));
        const auto r = bel_gradients(id, ou_drift(1), scalar_vec(0.5), 1.0, ws, ens);
        REQUIRE(r.size() == 3);
        for (const auto& e : r) CHECK(within(e.mean[0], kE1, 3.0 * e.stderr_[0] + 5.0 * dt));
        const EstimatorResult single = bel_gradient(id, ou_drift(1), scalar_vec(0.5), 1.0, ws[0], ens);
        CHECK(single.mean[0] == r[0].mean[0]);
    }
    SUBCASE("pathwise and finite differences are exact for affine problems") {
        const EstimatorResult pw = pathwise_gradient(id, ou_drift(1), scalar_vec(0.5), 1.0, ens);
        CHECK(pw.mean[0] == doctest::Approx(std::pow(1.0 - dt, 100)).epsilon(1e-12));
        const EstimatorResult fd = fd_gradient_oracle(id, constant_drift(scalar_vec(0.5)), scalar_vec(0.0), 1.0, 0.05, ens);
        CHECK(fd.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant payoff has zero gradient") {
        const Payoff c = make_payoff("constant", {{"value", "3"}});
        const EstimatorResult r = bel_gradient(c, mollify(sign_drift(1), 0.1), scalar_vec(0.0), 1.0,
                                               make_weight("constant", 1.0), ens);
        CHECK(within(r.mean[0], 0.0, 4.0 * r.stderr_[0]));
    }
    SUBCASE("BEL agrees with finite differences on a nonlinear problem") {
        const Payoff th = make_payoff("tanh");
        const DriftField b = mollify(sign_drift(1), 0.1);
        const EstimatorResult bel = bel_gradient(th, b, scalar_vec(0.5), 1.0, make_weight("constant", 1.0), ens);
        const EstimatorResult fd = fd_gradient_oracle(th, b, scalar_vec(0.5), 1.0, 0.05, ens);
        CHECK(within(bel.mean[0], fd.mean[0], 3.0 * combined_stderr(bel.stderr_[0], fd.stderr_[0]) + 0.01));
    }
}

TEST_CASE("holder scan") {
    const double t = 1.0, dt = 1.0 / 256.0;
    const auto grid = default_r_grid(t, dt, 6);
    REQUIRE(grid.size() >= 2);
    CHECK(grid.front() == doctest::Approx(0.5));
    for (double r : grid) {
        CHECK(r <= t);
        CHECK(r / dt == doctest::Approx(std::round(r / dt)));
    }
    const BrownianEnsemble ens(200, 256, dt, 1, 6);

    // OU: D_r X_t = exp(-(t - r)) deterministic, so the increment exponent is 2.
    const HolderScan ou = holder_scan(ou_drift(1), scalar_vec(0.0), t, grid, ens);
    CHECK(ou.fit.slope >= 1.7);
    CHECK(ou.fit.slope <= 2.1);
    CHECK(ou.pairs.size() == grid.size() * (grid.size() - 1) / 2);

    const HolderScan flat = holder_scan(zero_drift(1), scalar_vec(0.0), t, grid, ens);
    CHECK(flat.degenerate_zero);
    CHECK(flat.moment_max == doctest::Approx(1.0));
}

TEST_CASE("exponential moment of V vanishes for a trivial transform") {
    SpaceTimeGrid g;
    g.T = 1.0;
    g.L = 4.0;
    g.n_t = 50;
    g.n_x = 81;
    const ZvonkinSolution sol = calibrate_lambda(zero_drift(1), g, 0.5);
    const BrownianEnsemble ens(100, 50, 0.02, 1, 1);
    const PathEnsemble p = simulate_em(zero_drift(1), scalar_vec(0.0), ens);
    const EstimatorResult e = v_exponential_moment(sol, p, 1.0);
    CHECK(e.mean[0] == 1.0);
}

TEST_CASE("transformed simulation matches direct Euler-Maruyama in law") {
    SpaceTimeGrid g;
    g.T = 1.0;
    g.L = 6.0;
    g.n_t = 200;
    g.n_x = 601;
    const DriftField b = mollify(sign_drift(1), 0.1);
    const ZvonkinSolution sol = calibrate_lambda(b, g, 0.5);
    const BrownianEnsemble ens(3000, 200, 0.005, 1, 55);
    const std::vector<std::size_t> last = {200};
    const NodeSamples tr = transformed_samples(sol, scalar_vec(0.0), ens, last);
    const NodeSamples em = em_samples(b, scalar_vec(0.0), ens.independent(2), last);
    CHECK(tr.excluded() == 0);
    const double ks = ks_statistic(tr.slice(0), em.slice(0));
    CHECK(ks < ks_critical_value(0.01, 3000, 3000));
}
