#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fdest/condition_checker.hpp"
#include "fdest/exo_system.hpp"
#include "fdest/reactor.hpp"
#include "fdest/simulation.hpp"
#include "fdest/synthesis.hpp"

namespace fdest::cli {

using json = nlohmann::json;

json to_json(const Matrix& m);
json to_json(const RowVector& v);
json to_json(const Vector& v);
json to_json(const Spectrum& s);
json to_json(const CheckReport& r);
json to_json(const RampConstraintCheck& r);

struct Design {
    ParitySolution solution;
    ResidualGenerator generator;
    ExoKind exo_kind = ExoKind::Step;
    std::vector<std::string> notes;
};

json design_document(const Design& d);
/// Parses a design document; the generator is rebuilt from (v, alpha) and
/// must match the stored matrices exactly.
Design design_from_json(const json& doc, const std::string& source = "<design>", std::string_view text = {});
Design load_design(const std::filesystem::path& path);

/// Pretty JSON with a trailing newline.
std::string dump(const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fdest::cli
