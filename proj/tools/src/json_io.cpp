#include "fdest_cli/json_io.hpp"

#include <fstream>
#include <sstream>

#include "fdest_cli/config.hpp"

namespace fdest::cli {

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const RowVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json to_json(const Vector& v) { return to_json(RowVector(v.transpose())); }

json to_json(const Spectrum& s) {
    json ev = json::array();
    for (const auto& l : s.eigenvalues) ev.push_back({l.real(), l.imag()});
    return {{"eigenvalues", ev}, {"hurwitz", s.hurwitz}, {"stability_margin", s.stability_margin}};
}

json to_json(const CheckReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"label", row.label}, {"max_residual", row.max_residual}, {"argmax_index", row.argmax_index}});
    }
    return {{"condition", r.condition},
            {"samples", r.samples},
            {"max_residual", r.max_residual},
            {"argmax_index", r.argmax_index},
            {"argmax_point", to_json(r.argmax_point)},
            {"tolerance", r.tolerance},
            {"noise_floor", r.noise_floor},
            {"output_scale", r.output_scale},
            {"passed", r.passed},
            {"rows", rows},
            {"notes", r.notes}};
}

json to_json(const RampConstraintCheck& r) {
    return {{"reciprocal_sum", r.reciprocal_sum},
            {"ratio", r.ratio},
            {"relative_error", r.relative_error},
            {"satisfied", r.satisfied}};
}

json design_document(const Design& d) {
    const ParitySolution& s = d.solution;
    json v = json::array();
    for (const auto& row : s.v) v.push_back(to_json(row));
    json doc = {{"schema", 1},
                {"kind", "fdest-design"},
                {"exo", std::string(to_string(d.exo_kind))},
                {"s", s.s},
                {"mode", s.mode == AlphaMode::Fixed ? "fixed" : "free"},
                {"path", s.path},
                {"v", v},
                {"alpha", s.alpha},
                {"equation_residual", s.equation_residual},
                {"candidates_tried", s.candidates_tried},
                {"spectrum", to_json(s.spectrum)},
                {"generator",
                 {{"A", to_json(d.generator.A)},
                  {"B", to_json(d.generator.B)},
                  {"C", to_json(d.generator.C)},
                  {"D", to_json(d.generator.D)}}},
                {"notes", d.notes}};
    if (d.exo_kind == ExoKind::Ramp) doc["ramp_constraint"] = to_json(check_ramp_constraint(s.alpha));
    return doc;
}

namespace {

Matrix matrix_from(const Node& n, Eigen::Index rows) { return n.matrix(rows); }

}  // namespace

Design design_from_json(const json& doc, const std::string& source, std::string_view text) {
    const std::string fallback = text.empty() ? doc.dump(2) : std::string();
    const SourceMap map = SourceMap::index(text.empty() ? std::string_view(fallback) : text);
    const Node root{doc, "", map, source};
    root.only({"schema", "kind", "exo", "s", "mode", "path", "v", "alpha", "equation_residual", "candidates_tried",
               "spectrum", "generator", "notes", "ramp_constraint"});
    if (root.at("schema").integer() != 1) root.at("schema").fail("unsupported schema version (expected 1)");
    if (root.at("kind").string() != "fdest-design") root.at("kind").fail("not a design document");
    Design d;
    d.exo_kind = exo_kind_from_string(root.at("exo").string());
    ParitySolution& s = d.solution;
    s.s = static_cast<int>(root.at("s").integer());
    if (s.s < 1) root.at("s").fail("s must be >= 1");
    const std::string mode = root.at("mode").string();
    if (mode != "fixed" && mode != "free") root.at("mode").fail("mode must be fixed or free");
    s.mode = mode == "fixed" ? AlphaMode::Fixed : AlphaMode::Free;
    s.path = root.at("path").string();
    const Node v = root.at("v");
    if (v.size() != static_cast<std::size_t>(s.s) + 1) v.fail("v needs s + 1 rows");
    for (std::size_t j = 0; j < v.size(); ++j) {
        const Vector row = v.at(j).vector();
        if (j > 0 && row.size() != s.v.front().size()) v.at(j).fail("parity rows differ in length");
        s.v.push_back(row.transpose());
    }
    s.alpha = root.at("alpha").numbers();
    if (static_cast<int>(s.alpha.size()) != s.s) root.at("alpha").fail("alpha needs s entries");
    s.equation_residual = root.at("equation_residual").number();
    s.candidates_tried = root.at("candidates_tried").unsigned_integer();
    s.spectrum = companion_eigenvalues(s.alpha);
    if (!s.spectrum.hurwitz) root.at("alpha").fail("alpha is not Hurwitz");
    if (auto n = root.find("notes")) {
        for (std::size_t i = 0; i < n->size(); ++i) d.notes.push_back(n->at(i).string());
    }
    d.generator = build_observer(s);
    const Node g = root.at("generator");
    g.only({"A", "B", "C", "D"});
    const auto p = static_cast<Eigen::Index>(s.v.front().size());
    const bool same = matrix_from(g.at("A"), s.s) == d.generator.A && matrix_from(g.at("B"), s.s) == d.generator.B &&
                      matrix_from(g.at("C"), 1) == d.generator.C && matrix_from(g.at("D"), 1) == d.generator.D &&
                      d.generator.B.cols() == p;
    if (!same) g.fail("generator matrices do not match the parity vectors");
    return d;
}

Design load_design(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open design file");
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.view());
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        if (auto q = msg.find("] "); q != std::string::npos) msg = msg.substr(q + 2);
        throw ConfigError(path.string() + ": " + msg);
    }
    const std::string text = ss.str();
    return design_from_json(doc, path.string(), text);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fdest::cli
