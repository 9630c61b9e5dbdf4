#include "doctest.h"

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/error.hpp"
#include "zvlab/mixed_norm.hpp"
#include "zvlab/mollify.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace zvlab;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

// Sign drift with the closed-form convolution removed, forcing the lattice path.
DriftField sign_without_hook(int dim) {
    DriftField f = sign_drift(dim);
    f.convolve = nullptr;
    return f;
}

}  // namespace

TEST_CASE("drift presets evaluate as documented") {
    const DriftField ou = ou_drift(2, 1.5);
    CHECK((ou(0.3, vec2(1.0, -2.0)) - vec2(-1.5, 3.0)).norm() == 0.0);
    const DriftField s = sign_drift(2, 2.0);
    CHECK((s(0.0, vec2(0.1, -3.0)) - vec2(2.0, -2.0)).norm() == 0.0);
    CHECK(s(0.0, vec2(0.0, 0.0)).norm() == 0.0);
    const DriftField c = make_drift("constant", 1, {{"mu", "0.25"}});
    CHECK(c(5.0, scalar_vec(-7.0))(0) == 0.25);
    CHECK_THROWS_AS(make_drift("no-such-drift", 1), Error);
    for (const auto& name : drift_presets()) CHECK(!name.empty());
}

TEST_CASE("analytic gradients agree with central differences") {
    for (const DriftField& f : {zero_drift(2), constant_drift(vec2(0.5, -1.0)), ou_drift(2, 0.7)}) {
        REQUIRE(f.has_grad());
        CHECK(gradient_consistency(f, 0.5, vec2(0.3, -0.2)) < 1e-6);
    }
    const DriftField m = mollify(sign_drift(1), 0.1);
    REQUIRE(m.has_grad());
    CHECK(gradient_consistency(m, 0.0, scalar_vec(0.03)) < 1e-5);
}

TEST_CASE("drift combinators") {
    const DriftField f = add(ou_drift(1), scale(constant_drift(scalar_vec(1.0)), 3.0));
    CHECK(f(0.0, scalar_vec(2.0))(0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(add(ou_drift(1), ou_drift(2)), Error);
}

TEST_CASE("checked evaluation rejects non-finite values") {
    DriftField f = zero_drift(1);
    f.eval = [](double, const Vec&) { return scalar_vec(std::nan("")); };
    CHECK_THROWS_AS(f.checked(0.0, scalar_vec(0.0)), EvaluationError);
}

TEST_CASE("tabulated drift interpolates multilinearly") {
    const auto path = std::filesystem::temp_directory_path() / "zvlab_unit_grid_drift.csv";
    {
        std::ofstream out(path);
        out << "t,x1,b1\n";
        for (double t : {0.0, 1.0}) {
            for (double x : {-1.0, 0.0, 1.0}) out << t << ',' << x << ',' << 2.0 * x + t << '\n';
        }
    }
    const DriftField g = grid_drift(path, 1);
    CHECK(g(0.5, scalar_vec(0.5))(0) == doctest::Approx(1.5));
    CHECK(g(0.25, scalar_vec(-0.75))(0) == doctest::Approx(-1.25));
    CHECK(g(0.5, scalar_vec(2.0))(0) == 0.0);
    CHECK(g.support_radius.value() == doctest::Approx(1.0));
    CHECK(g.sup_bound.value() == doctest::Approx(3.0));
}

TEST_CASE("bump kernel has unit mass") {
    const double eps = 0.2;
    const int n = 2000;
    const double h = 2.0 * eps / n;
    double one = 0.0;
    for (int i = 0; i < n; ++i) one += bump_kernel(scalar_vec(-eps + (i + 0.5) * h), eps) * h;
    CHECK(one == doctest::Approx(1.0).epsilon(1e-6));

    const int m = 400;
    const double k = 2.0 * eps / m;
    double two = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) two += bump_kernel(vec2(-eps + (i + 0.5) * k, -eps + (j + 0.5) * k), eps) * k * k;
    }
    CHECK(two == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(bump_kernel(scalar_vec(0.3), eps) == 0.0);
}

TEST_CASE("cutoff is one inside, zero outside, monotone between") {
    CHECK(cutoff(0.0, 5.0) == 1.0);
    CHECK(cutoff(5.0, 5.0) == 1.0);
    CHECK(cutoff(6.0, 5.0) == 0.0);
    double prev = 1.0;
    for (double r = 5.0; r <= 6.0; r += 0.01) {
        const double c = cutoff(r, 5.0);
        CHECK(c <= prev + 1e-15);
        prev = c;
    }
    // derivative against a central difference
    CHECK(cutoff_derivative(5.4, 5.0) == doctest::Approx((cutoff(5.4 + 1e-6, 5.0) - cutoff(5.4 - 1e-6, 5.0)) / 2e-6).epsilon(1e-6));
}

TEST_CASE("mollified sign drift") {
    const double eps = 0.1;
    const DriftField m = mollify(sign_drift(1), eps);
    CHECK(m.smooth);
    CHECK(m(0.0, scalar_vec(0.0))(0) == doctest::Approx(0.0));
    CHECK(m(0.0, scalar_vec(0.2))(0) == doctest::Approx(1.0));
    CHECK(m(0.0, scalar_vec(-0.2))(0) == doctest::Approx(-1.0));
    // odd symmetry and monotonicity
    double prev = -1.0;
    for (double x = -0.1; x <= 0.1; x += 0.005) {
        const double v = m(0.0, scalar_vec(x))(0);
        CHECK(v == doctest::Approx(-m(0.0, scalar_vec(-x))(0)));
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    // cut off beyond R + 1 = 1/eps + 1
    CHECK(m(0.0, scalar_vec(11.5))(0) == 0.0);
    CHECK(m(0.0, scalar_vec(5.0))(0) == doctest::Approx(1.0));
}

TEST_CASE("lattice mollification agrees with the closed form") {
    const double eps = 0.1;
    const DriftField exact = mollify(sign_drift(1), eps);
    const DriftField lattice = mollify(sign_without_hook(1), eps);
    for (double x : {-0.15, -0.07, -0.02, 0.0, 0.013, 0.05, 0.09, 0.3}) {
        CHECK(lattice(0.0, scalar_vec(x))(0) == doctest::Approx(exact(0.0, scalar_vec(x))(0)).epsilon(2e-3));
    }
    const DriftField lattice2 = mollify(sign_without_hook(2), eps);
    const Vec v = lattice2(0.0, vec2(0.5, -0.5));
    CHECK(v(0) == doctest::Approx(1.0));
    CHECK(v(1) == doctest::Approx(-1.0));
    // componentwise sign: the first component is sign(x1) against the x1-marginal
    // of the 2-d kernel, integrated here by a fine midpoint rule
    const Vec w = lattice2(0.0, vec2(0.05, 0.0));
    const int m = 800;
    const double k = 2.0 * eps / m;
    double marginal = 0.0;
    for (int i = 0; i < m; ++i) {
        const double y1 = -eps + (i + 0.5) * k;
        const double s = (0.05 - y1 > 0.0) - (0.05 - y1 < 0.0);
        for (int j = 0; j < m; ++j) marginal += s * bump_kernel(vec2(y1, -eps + (j + 0.5) * k), eps) * k * k;
    }
    CHECK(w(0) == doctest::Approx(marginal).epsilon(2e-3));
    CHECK(w(1) == doctest::Approx(0.0));
}

TEST_CASE("mollification reproduces constants and affine fields") {
    const DriftField c = mollify(constant_drift(scalar_vec(0.7)), 0.2);
    CHECK(c(0.0, scalar_vec(1.0))(0) == doctest::Approx(0.7));
    const DriftField o = mollify(ou_drift(1), 0.2);
    CHECK(o(0.0, scalar_vec(1.0))(0) == doctest::Approx(-1.0));
}

TEST_CASE("mollified families") {
    const auto bw = halving_bandwidths(0.1, 3);
    REQUIRE(bw.size() == 3);
    CHECK(bw[2] == doctest::Approx(0.025));
    const MollifiedFamily fam = make_family(sign_drift(1), bw);
    CHECK(fam.size() == 3);
    // sharper members are steeper at the origin
    CHECK(fam[2].grad(0.0, scalar_vec(0.0))(0, 0) > fam[0].grad(0.0, scalar_vec(0.0))(0, 0));
    CHECK_THROWS_AS(make_family(sign_drift(1), {0.1, 0.1}), DomainError);
    CHECK_THROWS_AS(make_family(sign_drift(1), {0.1, -0.05}), DomainError);
}

TEST_CASE("convergence gap shrinks along the family") {
    const BrownianEnsemble ens(2000, 200, 0.005, 1, 17);
    const DriftField b = sign_drift(1);
    GapSpec spec;
    spec.x0 = scalar_vec(0.0);
    const ConvergenceGap g1 = convergence_gap(b, mollify(b, 0.1), 0.1, ens, spec);
    const ConvergenceGap g3 = convergence_gap(b, mollify(b, 0.025), 0.1, ens, spec);
    CHECK(g1.j_n > 0.0);
    CHECK(g3.j_n < g1.j_n);
}

TEST_CASE("mixed-norm admissibility") {
    CHECK(check_admissible({4.0, 4.0, 1, 1.0}));
    CHECK_FALSE(check_admissible({4.0, 4.0, 2, 1.0}));
    CHECK_THROWS_AS(check_admissible({2.0, 8.0, 1, 1.0}), DomainError);
    MixedNormParams bad{2.0, 4.0, 1, 1.0};
    CHECK_THROWS_AS(bad.validate(), DomainError);
    MixedNormParams bad_t{4.0, 4.0, 1, 0.0};
    CHECK_THROWS_AS(bad_t.validate(), DomainError);
}

TEST_CASE("mixed norm of constant and sign fields") {
    // ||c||_{L^q(L^p)} on [0, T] x [-L, L]^d = |c| (2L)^{d/p} T^{1/q}
    QuadratureSpec quad;
    quad.half_width = 3.0;
    quad.time_cells = 16;
    quad.space_cells = 64;
    const NormEstimate c = mixed_norm(constant_drift(scalar_vec(2.0)), {4.0, 3.0, 1, 2.0}, quad);
    CHECK(c.value == doctest::Approx(2.0 * std::pow(6.0, 0.25) * std::pow(2.0, 1.0 / 3.0)));

    const NormEstimate s = mixed_norm(sign_drift(2), {4.0, 4.0, 2, 1.0}, quad);
    CHECK(s.value == doctest::Approx(std::sqrt(2.0) * std::pow(36.0, 0.25)).epsilon(1e-6));
    CHECK_THROWS_AS(mixed_norm(sign_drift(2), {4.0, 4.0, 1, 1.0}, quad), DomainError);
}

TEST_CASE("gaussian running cost against closed forms") {
    // constant field: T |c|^{2(1+delta)}
    const RunningCost c = gaussian_running_cost(constant_drift(scalar_vec(1.5)), 0.5, {8.0, 8.0, 1, 1.0});
    CHECK(c.value == doctest::Approx(std::pow(1.5, 3.0)).epsilon(1e-8));
    // OU field with delta = 0: E int_0^T B_s^2 ds = T^2 / 2
    const RunningCost o = gaussian_running_cost(ou_drift(1), 0.0, {4.0, 4.0, 1, 1.0});
    CHECK(std::abs(o.value - 0.5) < 1e-4);
    // exponents outside the admissible range are rejected
    CHECK_THROWS_AS(gaussian_running_cost(ou_drift(1), 1.0, {4.0, 4.0, 1, 1.0}), DomainError);
}
