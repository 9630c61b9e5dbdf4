// Acceptance suite: runs every recipe config under configs/ once with a
// single worker, checks the fourteen acceptance criteria, then reruns each
// config with a different worker count and compares the CSV bytes.
//
// usage: zvlab_acceptance [config_dir] [work_dir]

#include "zvlab/config.hpp"
#include "zvlab/error.hpp"
#include "zvlab/recipes.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef ZVLAB_CONFIG_DIR
#define ZVLAB_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
    std::string id;
    std::string recipe;
    std::string file;
};

const std::vector<Run> kRuns = {
    {"bel-ou", "bel-check", "bel-ou.cfg"},
    {"bel-sign", "bel-check", "bel-sign.cfg"},
    {"girsanov-constant", "girsanov-check", "girsanov-constant.cfg"},
    {"girsanov-sign", "girsanov-check", "girsanov-sign.cfg"},
    {"pde-constant", "pde-constant", "pde-constant.cfg"},
    {"transform-sign", "transform-equivalence", "transform-sign.cfg"},
    {"holder-sign", "holder-scan", "holder-sign.cfg"},
    {"expmoment-sign", "expmoment-scan", "expmoment-sign.cfg"},
    {"kolmogorov-zero", "kolmogorov-check", "kolmogorov-zero.cfg"},
    {"kolmogorov-ou", "kolmogorov-check", "kolmogorov-ou.cfg"},
    {"kolmogorov-sign", "kolmogorov-check", "kolmogorov-sign.cfg"},
    {"fourth-zero", "fourth-moment", "fourth-zero.cfg"},
    {"fourth-constant", "fourth-moment", "fourth-constant.cfg"},
    {"fourth-sign", "fourth-moment", "fourth-sign.cfg"},
    {"lamperti-gbm", "lamperti-check", "lamperti-gbm.cfg"},
};

struct Outcome {
    bool ok = false;
    std::string error;
    zvlab::RunRecord rec;
};

void set_threads(const char* value) {
#ifdef _WIN32
    _putenv_s("ZVLAB_THREADS", value);
#else
    setenv("ZVLAB_THREADS", value, 1);
#endif
}

Outcome execute(const Run& run, const fs::path& config_dir, const fs::path& out) {
    Outcome o;
    try {
        zvlab::Config c = zvlab::Config::parse_file(config_dir / run.file);
        c.set("experiment", run.recipe);
        c.set("out", out.string());
        fs::remove_all(out);
        o.rec = zvlab::run_experiment(c);
        o.ok = true;
    } catch (const std::exception& e) {
        o.error = e.what();
    }
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

// Every assertion of `id` whose name starts with one of `prefixes` must pass
// (an empty prefix list selects all of them). At least one must match.
struct Selection {
    std::string id;
    std::vector<std::string> prefixes;
};

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void check_selection(const std::map<std::string, Outcome>& results, const Selection& sel, Verdict& v) {
    const auto it = results.find(sel.id);
    if (it == results.end() || !it->second.ok) {
        v.fail(sel.id + " did not run" + (it == results.end() ? "" : ": " + it->second.error));
        return;
    }
    std::size_t matched = 0;
    for (const auto& a : it->second.rec.assertions) {
        bool chosen = sel.prefixes.empty();
        for (const auto& p : sel.prefixes) chosen = chosen || starts_with(a.name, p);
        if (!chosen) continue;
        ++matched;
        if (!a.pass) {
            v.fail(sel.id + "/" + a.name + " = " + fmt(a.value) + " vs " + a.relation + " " + fmt(a.bound));
        }
    }
    if (matched == 0) v.fail(sel.id + " has no matching assertions");
}

struct Criterion {
    int number;
    std::string title;
    std::vector<Selection> selections;
    std::function<void(const std::map<std::string, Outcome>&, Verdict&)> extra;
};

}  // namespace

int main(int argc, char** argv) {
    const fs::path config_dir = argc > 1 ? fs::path(argv[1]) : fs::path(ZVLAB_CONFIG_DIR);
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "zvlab_acceptance";

    std::map<std::string, Outcome> first;
    set_threads("1");
    for (const auto& run : kRuns) {
        Outcome o = execute(run, config_dir, work / "threads1" / run.id);
        std::cout << "ran " << run.id << (o.ok ? "" : " (error: " + o.error + ")");
        if (o.ok) std::cout << " in " << fmt(o.rec.wall_seconds) << " s";
        std::cout << std::endl;
        first.emplace(run.id, std::move(o));
    }

    const std::vector<Criterion> criteria = {
        {1,
         "BEL vs closed form (OU), single-threaded recipe runtime < 60 s",
         {{"bel-ou", {"bel-closed-form"}}},
         [](const auto& r, Verdict& v) {
             const auto it = r.find("bel-ou");
             if (it == r.end() || !it->second.ok) return;
             // The whole recipe (BEL, FD oracle and pathwise runs) must fit the budget.
             const double wall = it->second.rec.wall_seconds;
             if (wall >= 60.0) {
                 v.fail("bel-check took " + fmt(wall) + " s");
             } else {
                 v.note("bel-check " + fmt(wall) + " s");
             }
         }},
        {2, "BEL vs finite-difference oracle, mollified sign drift", {{"bel-sign", {"bel-vs-fd"}}}, {}},
        {3,
         "BEL weight invariance",
         {{"bel-ou", {"weight-invariance-"}}, {"bel-sign", {"weight-invariance-"}}},
         {}},
        {4,
         "Girsanov identity",
         {{"girsanov-constant", {"weighted-closed-form"}}, {"girsanov-sign", {"weighted-vs-direct"}}},
         {}},
        {5, "Doleans-Dade weight moments", {{"girsanov-constant", {"weight-mean"}}}, {}},
        {6, "Zvonkin PDE closed form and refinement", {{"pde-constant", {}}}, {}},
        {7,
         "Diffeomorphism diagnostics",
         {{"transform-sign", {"sup-grad-u", "inverse-jacobian", "roundtrip", "injective"}}},
         {}},
        {8, "Transform equivalence (two-sample KS)", {{"transform-sign", {"ks-statistic", "excluded-fraction"}}}, {}},
        {9, "Holder scan of the Malliavin derivative", {{"holder-sign", {}}}, {}},
        {10, "Exponential-moment boundedness", {{"expmoment-sign", {}}}, {}},
        {11,
         "Kolmogorov representation",
         {{"kolmogorov-zero", {}}, {"kolmogorov-ou", {}}, {"kolmogorov-sign", {}}},
         {}},
        {12, "Fourth-moment scaling", {{"fourth-zero", {}}, {"fourth-constant", {}}, {"fourth-sign", {}}}, {}},
        {13, "Lamperti transform, geometric case", {{"lamperti-gbm", {}}}, {}},
    };

    int failures = 0;
    std::vector<std::string> lines;
    for (const auto& c : criteria) {
        Verdict v;
        for (const auto& sel : c.selections) check_selection(first, sel, v);
        if (c.extra) c.extra(first, v);
        if (!v.pass) ++failures;
        lines.push_back("criterion " + std::to_string(c.number) + " " + (v.pass ? "PASS" : "FAIL") + " " + c.title +
                        (v.detail.empty() ? "" : " (" + v.detail + ")"));
    }

    // Criterion 14: rerun everything with another worker count.
    {
        Verdict v;
        set_threads("3");
        for (const auto& run : kRuns) {
            const fs::path a = work / "threads1" / run.id;
            const fs::path b = work / "threads3" / run.id;
            Outcome o = execute(run, config_dir, b);
            if (!o.ok || !first.at(run.id).ok) {
                v.fail(run.id + " did not run");
                continue;
            }
            std::size_t files = 0;
            for (const auto& f : o.rec.outputs) {
                ++files;
                if (slurp(a / f.name) != slurp(b / f.name)) v.fail(run.id + "/" + f.name + " differs");
            }
            if (files != first.at(run.id).rec.outputs.size()) v.fail(run.id + " produced a different file set");
        }
        if (!v.pass) ++failures;
        lines.push_back(std::string("criterion 14 ") + (v.pass ? "PASS" : "FAIL") +
                        " Determinism across ZVLAB_THREADS=1 and 3" + (v.detail.empty() ? "" : " (" + v.detail + ")"));
    }

    std::cout << '\n';
    for (const auto& l : lines) std::cout << l << '\n';
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
