#include "doctest.h"

#include "experiments.hpp"

#include <set>

namespace ex = microlocal::experiments;
using nlohmann::json;

TEST_CASE("registry covers sixteen criteria once each") {
    const auto& reg = ex::registry();
    CHECK(reg.size() == 16);
    std::set<int> criteria;
    for (const auto& e : reg) criteria.insert(e.criterion);
    CHECK(criteria.size() == 16);
    CHECK(ex::experiments_in_group("all").size() == 16);
    CHECK(ex::experiments_in_group("fbi").size() == 3);
}

TEST_CASE("unknown experiments are usage errors") {
    CHECK_THROWS_AS(ex::find_experiment("no-such-thing"), ex::UsageError);
    CHECK_THROWS_AS(ex::experiments_in_group("nope"), ex::UsageError);
}

TEST_CASE("config defaults and overrides") {
    const ex::ExperimentConfig d = ex::resolve_config("spectral-counterexample", nullptr, 7);
    CHECK(d.seed == 7);
    CHECK(d.params.at("k_max") == 24);
    const ex::ExperimentConfig o =
        ex::resolve_config("spectral-counterexample", json{{"params", {{"k_max", 16}}}, {"seed", 3}}, 7);
    CHECK(o.params.at("k_max") == 16);
    CHECK(o.seed == 3);
}

TEST_CASE("config round trip") {
    ex::ExperimentConfig c = ex::resolve_config("fbi-isometry", json{{"params", {{"mixtures", 4}}}}, 11);
    const ex::ExperimentConfig back = ex::ExperimentConfig::from_json(c.to_json());
    CHECK(back.experiment == c.experiment);
    CHECK(back.seed == c.seed);
    CHECK(back.params == c.params);
}

TEST_CASE("schema errors name the offending field") {
    auto field_of = [](const json& user) {
        try {
            ex::resolve_config("spectral-counterexample", user, 1);
        } catch (const ex::SchemaError& e) {
            return e.field;
        }
        return std::string("none");
    };
    CHECK(field_of(json{{"params", {{"bogus", 1}}}}) == "params.bogus");
    CHECK(field_of(json{{"params", {{"k_max", "ten"}}}}) == "params.k_max");
    CHECK(field_of(json{{"params", {{"k_max", 2.5}}}}) == "params.k_max");
    CHECK(field_of(json{{"seed", "x"}}) == "seed");
}

TEST_CASE("envelopes are deterministic for a fixed seed") {
    const ex::ExperimentConfig c = ex::resolve_config("spectral-counterexample", json{{"params", {{"k_max", 12}}}}, 5);
    const json a = ex::make_envelope(c, ex::run_experiment(c));
    const json b = ex::make_envelope(c, ex::run_experiment(c));
    CHECK(a.dump() == b.dump());
    CHECK(a.at("experiment") == "spectral-counterexample");
    CHECK(a.contains("status"));
    CHECK(a.at("seeds").at("seed") == 5);
}
