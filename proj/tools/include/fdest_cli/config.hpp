#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fdest/exo_system.hpp"
#include "fdest/plant_model.hpp"
#include "fdest/reactor.hpp"

namespace fdest::cli {

using json = nlohmann::json;

/// Schema violation or unreadable config; the message carries file:line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line of every JSON pointer in a document, taken from the raw text.
class SourceMap {
public:
    static SourceMap index(std::string_view text);
    /// Line of `pointer`, falling back to its nearest recorded ancestor.
    int line(std::string pointer) const;

private:
    std::map<std::string, int> lines_;
};

/// Schema-checked view of one JSON node.
class Node {
public:
    Node(const json& value, std::string pointer, const SourceMap& map, const std::string& source);

    const json& value() const { return *value_; }
    const std::string& pointer() const { return pointer_; }

    bool has(std::string_view key) const;
    Node at(std::string_view key) const;
    std::optional<Node> find(std::string_view key) const;
    Node at(std::size_t index) const;
    std::size_t size() const;

    /// Rejects keys outside `allowed`.
    void only(std::initializer_list<std::string_view> allowed) const;
    void expect_object() const;

    double number() const;
    double positive() const;
    std::int64_t integer() const;
    std::uint64_t unsigned_integer() const;
    bool boolean() const;
    std::string string() const;
    std::vector<double> numbers() const;
    Vector vector() const;
    /// Row-major nested arrays; an empty array gives a 0-column matrix with `rows` rows.
    Matrix matrix(Eigen::Index rows = 0) const;

    [[noreturn]] void fail(const std::string& message) const;

private:
    const json* value_;
    std::string pointer_;
    const SourceMap* map_;
    const std::string* source_;
};

struct ExoSpec {
    ExoSystem exo = ExoSystem::make_step();
    double onset_time = 0.0;
    Vector xo0;
};

struct BuiltinSpec {
    std::string name = "pyridine_cstr";
    int observer = 1;
    bool paper_literal = false;
    double alpha = 0.01;
    reactor::SteadyStateSource steady = reactor::SteadyStateSource::Paper;
};

struct PlantSpec {
    bool builtin = false;
    LinearPlant linear;
    std::optional<OperatingBox> box;
    BuiltinSpec reactor;
};

struct DesignSpec {
    int s = 1;
    std::optional<std::vector<double>> alpha;
    std::size_t candidate_budget = 10000;
};

struct CheckSpec {
    std::size_t samples = 200;
    double tol = 1e-6;
    double fault_scale = 1.0;
    int max_order = 2;
};

struct DisturbanceSpec {
    std::size_t channel = 0;
    std::string kind = "constant";
    double value = 0.0;
    std::vector<double> times;
    std::vector<double> values;
};

struct SimulationSpec {
    double t_end = 10.0;
    double dt = 0.01;
    int substeps = 1;
    std::optional<Vector> x0;
    std::optional<Vector> init_error;
    std::vector<DisturbanceSpec> disturbances;
};

struct ScenarioConfig {
    int schema = 1;
    std::string name;
    PlantSpec plant;
    std::optional<ExoSpec> exo;
    DesignSpec design;
    CheckSpec check;
    SimulationSpec simulation;
    std::uint64_t seed = 0;
    std::optional<std::string> output;
    json raw;
};

ScenarioConfig parse_config(std::string_view text, const std::string& source = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace fdest::cli
