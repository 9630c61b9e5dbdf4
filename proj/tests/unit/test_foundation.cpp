#include "doctest.h"
#include "support.hpp"

#include "zvlab/brownian.hpp"
#include "zvlab/csv.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/parallel.hpp"
#include "zvlab/rng.hpp"
#include "zvlab/sde.hpp"
#include "zvlab/stats.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

using namespace zvlab;

// Known-answer vectors for Philox4x32-10 (Random123 kat_vectors).
TEST_CASE("philox known answers") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal stream is random access") {
    std::vector<double> all(64), tail(24);
    fill_normals(7, 3, 0, all);
    fill_normals(7, 3, 40, tail);
    for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i] == all[40 + i]);

    std::vector<double> other(64);
    fill_normals(7, 4, 0, other);
    CHECK(other != all);
}

TEST_CASE("normal stream moments") {
    std::vector<double> z(200000);
    fill_normals(2024, 0, 0, z);
    double m = 0.0, m2 = 0.0, m4 = 0.0;
    for (double v : z) {
        m += v;
        m2 += v * v;
        m4 += v * v * v * v;
    }
    const double n = static_cast<double>(z.size());
    CHECK(std::abs(m / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(m2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("brownian ensemble increments are a pure function of (seed, path, step)") {
    const BrownianEnsemble a(50, 20, 0.05, 2, 11);
    const BrownianEnsemble b = a.with_paths(10);
    std::vector<double> ia(40), ib(40);
    a.path_increments(7, ia);
    b.path_increments(7, ib);
    CHECK(ia == ib);
    const Vec inc = a.increment(7, 3);
    CHECK(inc(0) == ia[6]);
    CHECK(inc(1) == ia[7]);
    CHECK(std::abs(a.horizon() - 1.0) < 1e-15);
    CHECK(a.node_of(0.5) == 10);

    const BrownianEnsemble c = a.independent(1);
    std::vector<double> ic(40);
    c.path_increments(7, ic);
    CHECK(ic != ia);
}

TEST_CASE("brownian increment variance is dt") {
    const double dt = 0.01;
    const BrownianEnsemble ens(20000, 4, dt, 1, 5);
    std::vector<double> inc(4);
    double s2 = 0.0;
    for (std::size_t p = 0; p < ens.paths(); ++p) {
        ens.path_increments(p, inc);
        for (double v : inc) s2 += v * v;
    }
    const double var = s2 / (4.0 * 20000.0);
    CHECK(std::abs(var / dt - 1.0) < 0.05);
}

TEST_CASE("pairwise sum is exact on integers and order-fixed") {
    std::vector<double> v(1000);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(pairwise_sum(v) == 500500.0);
    CHECK(pairwise_sum_strided(v, 500, 2, 1) == 250500.0);
    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
}

TEST_CASE("parallel_for covers every index once for any worker count") {
    for (const char* w : {"1", "2", "3", "7"}) {
        zvlab_test::ThreadsGuard g(w);
        std::vector<int> hits(1001, 0);
        parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) ++hits[i];
        });
        for (int h : hits) CHECK(h == 1);
    }
}

TEST_CASE("simulation is bitwise identical across worker counts") {
    const DriftField b = sign_drift(1);
    const BrownianEnsemble ens(257, 64, 1.0 / 64.0, 1, 99);
    PathEnsemble one, many;
    {
        zvlab_test::ThreadsGuard g("1");
        one = simulate_em(b, scalar_vec(0.0), ens);
    }
    {
        zvlab_test::ThreadsGuard g("5");
        many = simulate_em(b, scalar_vec(0.0), ens);
    }
    CHECK(one.states == many.states);
}

TEST_CASE("summarize matches hand computation") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    const EstimatorResult r = summarize(x, 1);
    CHECK(r.mean[0] == doctest::Approx(2.5));
    // sample variance 5/3, stderr sqrt(5/12)
    CHECK(r.stderr_[0] == doctest::Approx(std::sqrt(5.0 / 12.0)));
    CHECK(r.samples == 4);

    const std::vector<unsigned char> keep = {1, 0, 1, 1};
    const EstimatorResult k = summarize(x, 1, keep);
    CHECK(k.mean[0] == doctest::Approx(8.0 / 3.0));
    CHECK(k.excluded == 1);
    CHECK(combined_stderr(3.0, 4.0) == doctest::Approx(5.0));
}

TEST_CASE("linear fit recovers an exact line") {
    const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y = {1.0, 3.0, 5.0, 7.0};
    const Regression r = linear_fit(x, y);
    CHECK(r.slope == doctest::Approx(2.0));
    CHECK(r.intercept == doctest::Approx(1.0));
    CHECK(r.r2 == doctest::Approx(1.0));
}

TEST_CASE("two-sample KS statistic and critical value") {
    CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.5, 2.5, 3.5}) == doctest::Approx(1.0 / 3.0));
    CHECK(ks_statistic({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(ks_statistic({0.0, 1.0}, {5.0, 6.0}) == doctest::Approx(1.0));
    // c(alpha) = sqrt(-ln(alpha/2)/2)
    const double c = std::sqrt(-std::log(0.005) / 2.0);
    CHECK(ks_critical_value(0.01, 100, 400) == doctest::Approx(c * std::sqrt(500.0 / 40000.0)));
}

TEST_CASE("fnv-1a fingerprint") {
    CHECK(fingerprint("") == "cbf29ce484222325");
    CHECK(fingerprint("a") == "af63dc4c8601ec8c");
}

TEST_CASE("doubles render with 17 significant digits and parse back exactly") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(1.0) == "1");
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::exp(-1.0)}) {
        CHECK(parse_double(format_double(v)) == v);
    }
}

TEST_CASE("csv round trip, LF endings") {
    CsvTable t;
    t.header = {"name", "value", "count"};
    t.add_row({std::string("a"), 0.1, std::int64_t{3}});
    t.add_row({std::string("b"), -1e-12, std::int64_t{-4}});
    const std::string text = render_csv(t);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text == "name,value,count\na,0.10000000000000001,3\nb,-9.9999999999999998e-13,-4\n");

    const auto path = std::filesystem::temp_directory_path() / "zvlab_unit_csv" / "t.csv";
    emit_csv(t, path);
    const CsvText back = read_csv(path);
    CHECK(back.header == t.header);
    REQUIRE(back.rows.size() == 2);
    CHECK(parse_double(back.rows[0][1]) == 0.1);
    CHECK(back.rows[1][2] == "-4");
}

TEST_CASE("csv with header only") {
    CsvTable t;
    t.header = {"x"};
    CHECK(render_csv(t) == "x\n");
    const auto path = std::filesystem::temp_directory_path() / "zvlab_unit_csv" / "empty.csv";
    emit_csv(t, path);
    const CsvText back = read_csv(path);
    CHECK(back.header == t.header);
    CHECK(back.rows.empty());
}
