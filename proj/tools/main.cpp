#include "experiments.hpp"

#include "microlocal/parallel.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace ex = microlocal::experiments;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    unsigned jobs = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool png = false;
    std::string experiment;
};

nlohmann::json load_config(const std::string& path, std::string& text) {
    std::ifstream in(path);
    if (!in) throw ex::SchemaError("config", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ex::SchemaError("config", std::string("not valid JSON: ") + e.what());
    }
}

int run_group(const std::string& group, const Options& opt) {
    std::string text;
    nlohmann::json user;
    if (!opt.config_path.empty()) user = load_config(opt.config_path, text);
    if (!user.is_null() && !user.is_object()) throw ex::SchemaError("config", "expected object");

    std::string named = opt.experiment;
    if (named.empty() && user.is_object() && user.contains("experiment")) {
        if (!user["experiment"].is_string()) throw ex::SchemaError("experiment", "expected string");
        named = user["experiment"].get<std::string>();
    }
    std::vector<const ex::ExperimentInfo*> todo;
    if (!named.empty()) {
        const auto& info = ex::find_experiment(named);
        if (group != "all" && info.group != group) {
            throw ex::UsageError("experiment '" + named + "' belongs to '" + info.group + "', not '" + group + "'");
        }
        todo.push_back(&info);
    } else {
        todo = ex::experiments_in_group(group);
    }

    int failed = 0;
    for (const auto* info : todo) {
        // A config naming one experiment only configures that experiment.
        nlohmann::json mine = user;
        const bool targeted = user.is_object() && user.contains("experiment");
        if (targeted && user["experiment"] != info->name) mine = nullptr;
        if (!targeted && todo.size() > 1 && user.is_object() && user.contains("params")) {
            throw ex::SchemaError("params", "a config with params must name its experiment when running a group");
        }
        ex::ExperimentConfig cfg = ex::resolve_config(info->name, mine, 1);
        if (opt.seed_given) cfg.seed = opt.seed;
        cfg.out_dir = opt.out_dir;
        cfg.png = opt.png;
        cfg.source_text = mine.is_null() ? std::string{} : text;

        std::clog << "[run] " << info->name << " (criterion " << info->criterion << ")\n";
        const ex::ExperimentResult r = ex::run_experiment(cfg);
        ex::write_outputs(cfg, r);
        std::cout << info->name << ": " << (r.passed() ? "PASS" : "FAIL") << "\n";
        for (const auto& f : r.failures) std::cout << "  failure: " << f << "\n";
        if (opt.out_dir.empty()) std::cout << ex::make_envelope(cfg, r).dump(2) << "\n";
        if (!r.passed()) ++failed;
    }
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Microlocal analysis experiments"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "JSON config file");
    app.add_option("--out", opt.out_dir, "Output directory for envelopes, CSVs and PNGs");
    app.add_option("--jobs", opt.jobs, "Worker cap (0 = hardware concurrency)");
    auto* seed = app.add_option("--seed", opt.seed, "Random seed");
    app.add_flag("--png", opt.png, "Also write PNG figures");
    bool list = false;
    app.add_flag("--list", list, "List experiments and exit");

    std::vector<std::string> groups = ex::group_names();
    groups.push_back("all");
    for (const auto& g : groups) {
        auto* sub = app.add_subcommand(g, g == "all" ? "Run every experiment" : "Run " + g + " experiments");
        sub->add_option("experiment", opt.experiment, "Experiment name; default runs the whole group");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (list) {
        for (const auto& e : ex::registry()) {
            std::cout << e.criterion << "\t" << e.group << "\t" << e.name << "\t" << e.title << "\n";
        }
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }
    opt.seed_given = seed->count() > 0;
    microlocal::set_max_jobs(opt.jobs);
    try {
        return run_group(app.get_subcommands().front()->get_name(), opt);
    } catch (const ex::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const ex::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
