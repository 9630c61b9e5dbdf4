// zvlab <recipe> --config <file> [--key value ...] --out <dir>

#include "zvlab/config.hpp"
#include "zvlab/recipes.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// Remaining arguments must come in "--key value" pairs.
void apply_overrides(const std::vector<std::string>& extras, zvlab::Config& config) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
            throw zvlab::UsageError("unexpected argument '" + arg + "'");
        }
        std::string key = arg.substr(2), value;
        if (auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.erase(eq);
        } else {
            if (i + 1 >= extras.size()) throw zvlab::UsageError("missing value for --" + key);
            value = extras[++i];
        }
        config.set(key, value);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments for SDEs with singular drift"};
    app.allow_extras();
    std::string recipe, config_path, out_dir;
    bool show_keys = false;
    app.add_option("recipe", recipe, "Experiment recipe");
    app.add_option("--config", config_path, "Flat key = value config file");
    app.add_option("--out", out_dir, "Output directory for CSV files");
    app.add_flag("--show-keys", show_keys, "Print the recipe's keys with their defaults and exit");
    app.footer("Any other --key value pair overrides the config file (last write wins).\n"
               "ZVLAB_THREADS caps the worker count; results do not depend on it.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (recipe.empty()) {
            std::string list;
            for (const auto& n : zvlab::recipe_names()) list += "\n  " + n;
            throw zvlab::UsageError("no recipe given; available recipes:" + list);
        }
        if (show_keys) {
            for (const auto& [k, v] : zvlab::recipe_defaults(recipe)) std::cout << k << " = " << v << '\n';
            return 0;
        }
        zvlab::Config config;
        if (!config_path.empty()) config = zvlab::Config::parse_file(config_path);
        apply_overrides(app.remaining(), config);
        config.set("experiment", recipe);
        if (!out_dir.empty()) config.set("out", out_dir);
        if (!config.has("out") || config.text("out").empty()) throw zvlab::UsageError("--out <dir> is required");

        const zvlab::RunRecord rec = zvlab::run_experiment(config);
        std::cout << zvlab::record_summary(rec);
        return rec.passed() ? 0 : 1;
    } catch (const zvlab::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
