#pragma once

#include "json.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace microlocal::experiments {

using nlohmann::json;

// Malformed configuration. The message starts with the offending field path.
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field(field) {}
    std::string field;
};

// Unknown experiment or group name.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/*
 * One run. params holds the experiment defaults overlaid with the user
 * config; the raw config text is kept verbatim for the envelope.
 */
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    json params = json::object();
    std::string out_dir;
    bool png = false;
    std::string source_text;

    json to_json() const;
    static ExperimentConfig from_json(const json& j);
};

struct Table {
    std::vector<std::string> columns;
    json rows = json::array();

    void add(json row) { rows.push_back(std::move(row)); }
};

struct ExperimentResult {
    std::string experiment;
    json inputs = json::object();
    json tolerances = json::object();
    json metrics = json::object();
    json verdicts = json::object();
    // A deque keeps references from table() valid while more tables are added.
    std::deque<std::pair<std::string, Table>> tables;
    std::vector<std::string> failures;
    // Files written next to the envelope, relative to out_dir.
    std::vector<std::string> artifacts;

    bool passed() const { return failures.empty(); }
    Table& table(const std::string& name, std::vector<std::string> columns);
    // Records a named assertion; a false condition adds message to failures.
    bool check(const std::string& name, bool ok, const std::string& message);
};

struct ExperimentInfo {
    std::string name;
    std::string group;
    int criterion = 0;
    std::string title;
    json defaults;
    std::function<void(const ExperimentConfig&, ExperimentResult&)> run;
};

const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& name);
std::vector<std::string> group_names();
std::vector<const ExperimentInfo*> experiments_in_group(const std::string& group);

/*
 * Builds a config from a user JSON document. Keys absent from the document
 * take their defaults; unknown keys and type mismatches raise SchemaError.
 */
ExperimentConfig resolve_config(const std::string& experiment, const json& user, std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& config);

// Deterministic result envelope; no timings or host data.
json make_envelope(const ExperimentConfig& config, const ExperimentResult& result);

// Writes <name>.json and one CSV per table into config.out_dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace microlocal::experiments
