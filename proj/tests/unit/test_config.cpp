#include "doctest.h"
#include "support.hpp"

#include "zvlab/config.hpp"
#include "zvlab/csv.hpp"
#include "zvlab/error.hpp"
#include "zvlab/recipes.hpp"

#include <string>

using namespace zvlab;

TEST_CASE("config parsing") {
    const Config c = Config::parse_text("# comment\n  M = 1e5\nseed=7   # trailing\n\nlags = 0.5, 0.25\nflag = true\n"
                                        "name = ou\n");
    CHECK(c.count("M") == 100000);
    CHECK(c.seed() == 7);
    CHECK(c.reals("lags") == std::vector<double>{0.5, 0.25});
    CHECK(c.flag("flag"));
    CHECK(c.text("name") == "ou");
    CHECK_THROWS_AS(c.text("missing"), UsageError);
    CHECK_THROWS_AS(c.count("name"), UsageError);
    CHECK_THROWS_AS(Config::parse_text("no equals sign\n"), UsageError);
    CHECK_THROWS_AS(Config::parse_file("/nonexistent/zvlab.cfg"), IoError);

    Config neg;
    neg.set("M", "-3");
    CHECK_THROWS_AS(neg.count("M"), UsageError);
    neg.set("x", "1.5");
    CHECK_THROWS_AS(neg.integer("x"), UsageError);
}

TEST_CASE("later assignments win and fingerprints ignore the output location") {
    Config a = Config::parse_text("M = 10\nM = 20\n");
    CHECK(a.count("M") == 20);
    Config b = a;
    a.set("out", "/tmp/one");
    b.set("out", "/tmp/two");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.canonical() == "M=20\n");
    b.set("M", "21");
    CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("defaults reject unknown keys") {
    Config c;
    c.set("M", "5");
    c.set("bogus", "1");
    try {
        c.with_defaults({{"M", "1"}, {"dt", "0.1"}}, "demo");
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        const std::string what = e.what();
        CHECK(what.find("bogus") != std::string::npos);
        CHECK(what.find("dt") != std::string::npos);
    }
    Config ok;
    ok.set("M", "5");
    const Config full = ok.with_defaults({{"M", "1"}, {"dt", "0.1"}}, "demo");
    CHECK(full.count("M") == 5);
    CHECK(full.real("dt") == 0.1);
}

TEST_CASE("recipes: names, defaults, unknown recipe") {
    CHECK(recipe_names().size() == 9);
    for (const auto& n : recipe_names()) {
        const auto d = recipe_defaults(n);
        CHECK(d.count("seed") == 1);
        CHECK(d.count("out") == 1);
    }
    Config c;
    c.set("experiment", "no-such-recipe");
    CHECK_THROWS_AS(run_experiment(c), UsageError);
    CHECK_THROWS_AS(recipe_defaults("no-such-recipe"), UsageError);
}

TEST_CASE("recipes: pde-constant passes and records its checks") {
    Config c;
    c.set("experiment", "pde-constant");
    const RunRecord rec = run_experiment(c);
    CHECK(rec.passed());
    REQUIRE(rec.find("closed-form-error") != nullptr);
    CHECK(rec.find("closed-form-error")->value <= 1e-3);
    bool has_checks = false;
    for (const auto& f : rec.outputs) has_checks = has_checks || f.name == "checks.csv";
    CHECK(has_checks);
}

TEST_CASE("recipes: a failing assertion is reported, not thrown") {
    Config c;
    c.set("experiment", "fourth-moment");
    c.set("M", "50");
    c.set("lags", "0.0078125,0.015625");
    c.set("drift", "ou");
    c.set("theta", "400");
    const RunRecord rec = run_experiment(c);
    CHECK_FALSE(rec.passed());
}

TEST_CASE("recipes: outputs are byte-identical across worker counts") {
    Config c;
    c.set("experiment", "bel-check");
    c.set("drift", "sign");
    c.set("payoff", "tanh");
    c.set("M", "3001");
    c.set("dt", "0.01");
    RunRecord one, many;
    {
        zvlab_test::ThreadsGuard g("1");
        one = run_experiment(c);
    }
    {
        zvlab_test::ThreadsGuard g("4");
        many = run_experiment(c);
    }
    REQUIRE(one.outputs.size() == many.outputs.size());
    for (std::size_t i = 0; i < one.outputs.size(); ++i) {
        CHECK(render_csv(one.outputs[i].table) == render_csv(many.outputs[i].table));
    }
    CHECK(one.fingerprint == many.fingerprint);
}
