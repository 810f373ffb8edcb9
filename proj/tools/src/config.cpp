#include "fdest_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fdest::cli {

namespace {

std::string escape_token(std::string_view key) {
    std::string out;
    for (char c : key) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

struct Frame {
    bool object = false;
    std::string base;
    std::string key;
    std::size_t index = 0;
    bool expecting_key = false;
};

}  // namespace

SourceMap SourceMap::index(std::string_view text) {
    SourceMap map;
    std::vector<Frame> stack;
    int line = 1;
    map.lines_[""] = 1;

    auto current = [&stack]() -> std::string {
        if (stack.empty()) return "";
        const Frame& f = stack.back();
        return f.base + "/" + (f.object ? escape_token(f.key) : std::to_string(f.index));
    };
    auto value_start = [&]() {
        if (!stack.empty() && !stack.back().object) map.lines_.emplace(current(), line);
    };

    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        switch (c) {
            case '\n':
                ++line;
                ++i;
                break;
            case '{':
            case '[': {
                value_start();
                Frame f;
                f.object = c == '{';
                f.base = current();
                f.expecting_key = f.object;
                stack.push_back(std::move(f));
                ++i;
                break;
            }
            case '}':
            case ']':
                if (!stack.empty()) stack.pop_back();
                ++i;
                break;
            case ',':
                if (!stack.empty()) {
                    if (stack.back().object) {
                        stack.back().expecting_key = true;
                    } else {
                        ++stack.back().index;
                    }
                }
                ++i;
                break;
            case '"': {
                const int start_line = line;
                std::string s;
                ++i;
                while (i < text.size() && text[i] != '"') {
                    if (text[i] == '\\' && i + 1 < text.size()) {
                        s += text[i + 1];
                        i += 2;
                        continue;
                    }
                    if (text[i] == '\n') ++line;
                    s += text[i++];
                }
                ++i;
                if (!stack.empty() && stack.back().object && stack.back().expecting_key) {
                    stack.back().key = s;
                    stack.back().expecting_key = false;
                    map.lines_.emplace(current(), start_line);
                } else {
                    const int saved = line;
                    line = start_line;
                    value_start();
                    line = saved;
                }
                break;
            }
            default:
                if (c == '-' || (c >= '0' && c <= '9') || c == 't' || c == 'f' || c == 'n') {
                    value_start();
                    while (i < text.size() && text[i] != ',' && text[i] != '}' && text[i] != ']' && text[i] != '\n' &&
                           text[i] != ' ' && text[i] != '\t' && text[i] != '\r') {
                        ++i;
                    }
                } else {
                    ++i;
                }
        }
    }
    return map;
}

int SourceMap::line(std::string pointer) const {
    while (true) {
        if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
        if (pointer.empty()) return 1;
        pointer.erase(pointer.rfind('/'));
    }
}

Node::Node(const json& value, std::string pointer, const SourceMap& map, const std::string& source)
    : value_(&value), pointer_(std::move(pointer)), map_(&map), source_(&source) {}

void Node::fail(const std::string& message) const {
    std::ostringstream os;
    os << *source_ << ':' << map_->line(pointer_) << ": " << (pointer_.empty() ? "/" : pointer_) << ": " << message;
    throw ConfigError(os.str());
}

void Node::expect_object() const {
    if (!value_->is_object()) fail("expected an object");
}

bool Node::has(std::string_view key) const { return value_->is_object() && value_->contains(key); }

Node Node::at(std::string_view key) const {
    expect_object();
    if (!value_->contains(key)) fail("missing required key \"" + std::string(key) + "\"");
    return {(*value_)[std::string(key)], pointer_ + "/" + escape_token(key), *map_, *source_};
}

std::optional<Node> Node::find(std::string_view key) const {
    expect_object();
    if (!value_->contains(key)) return std::nullopt;
    return at(key);
}

Node Node::at(std::size_t index) const {
    if (!value_->is_array()) fail("expected an array");
    if (index >= value_->size()) fail("index out of range");
    return {(*value_)[index], pointer_ + "/" + std::to_string(index), *map_, *source_};
}

std::size_t Node::size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
}

void Node::only(std::initializer_list<std::string_view> allowed) const {
    expect_object();
    for (const auto& [key, _] : value_->items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) {
            Node child{(*value_)[key], pointer_ + "/" + escape_token(key), *map_, *source_};
            child.fail("unknown key \"" + key + "\"");
        }
    }
}

double Node::number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
}

double Node::positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("expected a positive number");
    return v;
}

std::int64_t Node::integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<std::int64_t>();
}

std::uint64_t Node::unsigned_integer() const {
    if (!value_->is_number_integer() || value_->get<std::int64_t>() < 0) {
        if (!value_->is_number_unsigned()) fail("expected a non-negative integer");
    }
    return value_->get<std::uint64_t>();
}

bool Node::boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
}

std::string Node::string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
}

std::vector<double> Node::numbers() const {
    if (!value_->is_array()) fail("expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < value_->size(); ++i) out.push_back(at(i).number());
    return out;
}

Vector Node::vector() const {
    const auto v = numbers();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix Node::matrix(Eigen::Index rows) const {
    if (!value_->is_array()) fail("expected a matrix (array of rows)");
    if (value_->empty()) return Matrix(rows, 0);
    const auto r = static_cast<Eigen::Index>(value_->size());
    Matrix m;
    for (Eigen::Index i = 0; i < r; ++i) {
        const Node row = at(static_cast<std::size_t>(i));
        const auto vals = row.numbers();
        if (i == 0) {
            m.resize(r, static_cast<Eigen::Index>(vals.size()));
        } else if (static_cast<Eigen::Index>(vals.size()) != m.cols()) {
            row.fail("ragged matrix: row lengths differ");
        }
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = vals[static_cast<std::size_t>(j)];
    }
    return m;
}

namespace {

ExoSpec parse_exo(const Node& n) {
    n.only({"kind", "omega", "onset_time", "x_o0"});
    ExoSpec spec;
    const Node kind = n.at("kind");
    const std::string k = kind.string();
    if (k == "step") {
        spec.exo = ExoSystem::make_step();
    } else if (k == "ramp") {
        spec.exo = ExoSystem::make_ramp();
    } else if (k == "sine") {
        spec.exo = ExoSystem::make_sine(n.at("omega").positive());
    } else {
        kind.fail("exo kind must be step, ramp or sine");
    }
    if (k != "sine" && n.has("omega")) n.at("omega").fail("omega applies to sine exo-systems only");
    if (auto t = n.find("onset_time")) {
        spec.onset_time = t->number();
        if (spec.onset_time < 0.0) t->fail("onset_time must be >= 0");
    }
    if (auto x = n.find("x_o0")) {
        spec.xo0 = x->vector();
        if (spec.xo0.size() != spec.exo.order()) {
            x->fail("x_o0 needs " + std::to_string(spec.exo.order()) + " entries");
        }
    } else {
        spec.xo0 = Vector::Zero(spec.exo.order());
    }
    return spec;
}

PlantSpec parse_plant(const Node& n) {
    PlantSpec spec;
    const Node type = n.at("type");
    const std::string t = type.string();
    if (t == "builtin") {
        n.only({"type", "name", "observer", "paper_literal", "alpha", "steady_state"});
        spec.builtin = true;
        const Node name = n.at("name");
        spec.reactor.name = name.string();
        if (spec.reactor.name != "pyridine_cstr") name.fail("unknown builtin model \"" + spec.reactor.name + "\"");
        if (auto o = n.find("observer")) {
            spec.reactor.observer = static_cast<int>(o->integer());
            if (spec.reactor.observer != 1 && spec.reactor.observer != 2) o->fail("observer must be 1 or 2");
        }
        if (auto p = n.find("paper_literal")) spec.reactor.paper_literal = p->boolean();
        if (auto a = n.find("alpha")) spec.reactor.alpha = a->positive();
        if (auto s = n.find("steady_state")) {
            const std::string v = s->string();
            if (v == "paper") {
                spec.reactor.steady = reactor::SteadyStateSource::Paper;
            } else if (v == "computed") {
                spec.reactor.steady = reactor::SteadyStateSource::Computed;
            } else {
                s->fail("steady_state must be \"paper\" or \"computed\"");
            }
        }
        return spec;
    }
    if (t != "linear") type.fail("plant type must be \"linear\" or \"builtin\"");
    n.only({"type", "F", "G", "E", "H", "J", "K", "box"});
    LinearPlant& pl = spec.linear;
    const Node fn = n.at("F");
    pl.F = fn.matrix();
    if (pl.F.rows() == 0 || pl.F.rows() != pl.F.cols()) fn.fail("F must be a non-empty square matrix");
    const Node hn = n.at("H");
    pl.H = hn.matrix();
    if (pl.H.rows() == 0 || pl.H.cols() != pl.F.rows()) hn.fail("H must have one column per state");
    const Eigen::Index nx = pl.F.rows();
    const Eigen::Index ny = pl.H.rows();
    pl.G = n.has("G") ? n.at("G").matrix(nx) : Matrix::Zero(nx, 1);
    pl.J = n.has("J") ? n.at("J").matrix(ny) : Matrix::Zero(ny, 1);
    pl.E = n.has("E") ? n.at("E").matrix(nx) : Matrix(nx, 0);
    pl.K = n.has("K") ? n.at("K").matrix(ny) : Matrix::Zero(ny, pl.E.cols());
    auto check_shape = [&n](const char* key, const Matrix& m, Eigen::Index r, Eigen::Index c) {
        if (m.rows() != r || m.cols() != c) {
            std::ostringstream os;
            os << key << " must be " << r << "x" << c << ", got " << m.rows() << "x" << m.cols();
            (n.has(key) ? n.at(key) : n).fail(os.str());
        }
    };
    check_shape("G", pl.G, nx, 1);
    check_shape("J", pl.J, ny, 1);
    check_shape("K", pl.K, ny, pl.E.cols());
    if (pl.E.rows() != nx) n.at("E").fail("E must have one row per state");
    if (auto b = n.find("box")) {
        b->only({"lower", "upper"});
        OperatingBox box{b->at("lower").vector(), b->at("upper").vector()};
        if (box.lower.size() != nx || box.upper.size() != nx) b->fail("box bounds need one entry per state");
        if ((box.upper.array() <= box.lower.array()).any()) b->fail("box needs lower < upper in every state");
        spec.box = box;
    }
    return spec;
}

DesignSpec parse_design(const Node& n) {
    n.only({"s", "alpha", "candidate_budget"});
    DesignSpec d;
    if (auto s = n.find("s")) {
        d.s = static_cast<int>(s->integer());
        if (d.s < 1) s->fail("observer order s must be >= 1");
    }
    if (auto a = n.find("alpha")) {
        if (a->value().is_null() || (a->value().is_string() && a->value() == "free")) {
            d.alpha.reset();
        } else {
            d.alpha = a->numbers();
            if (static_cast<int>(d.alpha->size()) != d.s) a->fail("alpha needs s entries");
        }
    }
    if (auto b = n.find("candidate_budget")) {
        d.candidate_budget = b->unsigned_integer();
        if (d.candidate_budget == 0) b->fail("candidate_budget must be positive");
    }
    return d;
}

CheckSpec parse_check(const Node& n) {
    n.only({"samples", "tol", "fault_scale", "max_order"});
    CheckSpec c;
    if (auto s = n.find("samples")) {
        c.samples = s->unsigned_integer();
        if (c.samples == 0) s->fail("samples must be positive");
    }
    if (auto t = n.find("tol")) c.tol = t->positive();
    if (auto f = n.find("fault_scale")) c.fault_scale = f->positive();
    if (auto m = n.find("max_order")) {
        c.max_order = static_cast<int>(m->integer());
        if (c.max_order < 1) m->fail("max_order must be >= 1");
    }
    return c;
}

SimulationSpec parse_simulation(const Node& n) {
    n.only({"t_end", "dt", "substeps", "x0", "init_error", "disturbances"});
    SimulationSpec s;
    if (auto t = n.find("t_end")) {
        s.t_end = t->number();
        if (s.t_end < 0.0) t->fail("t_end must be >= 0");
    }
    if (auto d = n.find("dt")) s.dt = d->positive();
    if (auto m = n.find("substeps")) {
        s.substeps = static_cast<int>(m->integer());
        if (s.substeps < 1) m->fail("substeps must be >= 1");
    }
    if (auto x = n.find("x0")) s.x0 = x->vector();
    if (auto e = n.find("init_error")) s.init_error = e->vector();
    if (auto ds = n.find("disturbances")) {
        for (std::size_t i = 0; i < ds->size(); ++i) {
            const Node d = ds->at(i);
            d.only({"channel", "kind", "value", "times", "values"});
            DisturbanceSpec spec;
            spec.channel = d.at("channel").unsigned_integer();
            spec.kind = d.has("kind") ? d.at("kind").string() : "constant";
            if (spec.kind == "constant") {
                spec.value = d.at("value").number();
            } else if (spec.kind == "piecewise") {
                spec.times = d.at("times").numbers();
                spec.values = d.at("values").numbers();
                if (spec.times.size() != spec.values.size() || spec.times.empty()) {
                    d.fail("piecewise disturbance needs equally long, non-empty times and values");
                }
            } else {
                d.at("kind").fail("disturbance kind must be constant or piecewise");
            }
            s.disturbances.push_back(std::move(spec));
        }
    }
    return s;
}

}  // namespace

ScenarioConfig parse_config(std::string_view text, const std::string& source) {
    ScenarioConfig cfg;
    try {
        cfg.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports "parse error at line L, column C: ..." inside what().
        std::string msg = e.what();
        if (auto p = msg.find("] "); p != std::string::npos) msg = msg.substr(p + 2);
        throw ConfigError(source + ": " + msg);
    }
    const SourceMap map = SourceMap::index(text);
    const Node root{cfg.raw, "", map, source};
    root.expect_object();
    root.only({"schema", "name", "plant", "exo", "design", "check", "simulation", "seed", "output"});
    const Node schema = root.at("schema");
    cfg.schema = static_cast<int>(schema.integer());
    if (cfg.schema != 1) schema.fail("unsupported schema version (expected 1)");
    if (auto n = root.find("name")) cfg.name = n->string();
    cfg.plant = parse_plant(root.at("plant"));
    if (auto e = root.find("exo")) cfg.exo = parse_exo(*e);
    if (!cfg.plant.builtin && !cfg.exo) root.fail("missing required key \"exo\" for a linear plant");
    if (cfg.plant.builtin && cfg.exo) {
        const ExoKind want = cfg.plant.reactor.observer == 1 ? ExoKind::Ramp : ExoKind::Step;
        if (cfg.exo->exo.kind() != want) {
            root.at("exo").at("kind").fail("the builtin observer " + std::to_string(cfg.plant.reactor.observer) +
                                           " uses a " + std::string(to_string(want)) + " exo-system");
        }
    }
    if (auto d = root.find("design")) cfg.design = parse_design(*d);
    if (cfg.plant.builtin && cfg.design.s != 1) root.at("design").at("s").fail("the builtin observers have order 1");
    if (auto c = root.find("check")) cfg.check = parse_check(*c);
    if (auto s = root.find("simulation")) cfg.simulation = parse_simulation(*s);
    if (auto s = root.find("seed")) cfg.seed = s->unsigned_integer();
    if (auto o = root.find("output")) cfg.output = o->string();

    if (!cfg.plant.builtin) {
        const Eigen::Index nx = cfg.plant.linear.F.rows();
        if (cfg.simulation.x0 && cfg.simulation.x0->size() != nx) {
            root.at("simulation").at("x0").fail("x0 needs one entry per state");
        }
        for (std::size_t i = 0; i < cfg.simulation.disturbances.size(); ++i) {
            if (static_cast<Eigen::Index>(cfg.simulation.disturbances[i].channel) >= cfg.plant.linear.E.cols()) {
                root.at("simulation").at("disturbances").at(i).at("channel").fail("no such disturbance channel");
            }
        }
    } else {
        if (cfg.simulation.x0 && cfg.simulation.x0->size() != 4) {
            root.at("simulation").at("x0").fail("the reactor has four states");
        }
        for (std::size_t i = 0; i < cfg.simulation.disturbances.size(); ++i) {
            if (cfg.simulation.disturbances[i].channel != 0) {
                root.at("simulation").at("disturbances").at(i).at("channel").fail("the reactor has one disturbance (0)");
            }
        }
    }
    if (cfg.simulation.init_error && cfg.simulation.init_error->size() != cfg.design.s) {
        root.at("simulation").at("init_error").fail("init_error needs s entries");
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

}  // namespace fdest::cli
