#pragma once

// Strict JSON (de)serialization of ModelSpec. Unknown keys, missing required
// keys and type mismatches raise E_CONFIG naming the field path. Regimes are
// a count; per-regime parameters are lists with one entry per regime.

#include "rsctl/error.hpp"
#include "rsctl/model.hpp"

#include "json.hpp"

#include <set>
#include <string>
#include <vector>

namespace rsctl {

using Json = nlohmann::json;

namespace json_io {

/// Object reader that remembers which keys were read; finish() rejects the rest.
class Object {
public:
    Object(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
        require(j.is_object(), ErrorCode::Config, "expected an object at `" + (path_.empty() ? "<root>" : path_) + "`");
    }

    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_->contains(key); }

    const Json* get(const std::string& key) {
        seen_.insert(key);
        const auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    const Json& need(const std::string& key) {
        const Json* v = get(key);
        require(v != nullptr, ErrorCode::Config, "missing field `" + path(key) + "`");
        return *v;
    }

    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            require(seen_.count(it.key()) > 0, ErrorCode::Config, "unknown field `" + path(it.key()) + "`");
    }

private:
    const Json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline double to_double(const Json& j, const std::string& path) {
    require(j.is_number(), ErrorCode::Config, "expected a number at `" + path + "`");
    return j.get<double>();
}

inline long to_int(const Json& j, const std::string& path) {
    require(j.is_number_integer(), ErrorCode::Config, "expected an integer at `" + path + "`");
    return j.get<long>();
}

inline std::uint64_t to_uint64(const Json& j, const std::string& path) {
    require(j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0), ErrorCode::Config,
            "expected a nonnegative integer at `" + path + "`");
    return j.get<std::uint64_t>();
}

inline bool to_bool(const Json& j, const std::string& path) {
    require(j.is_boolean(), ErrorCode::Config, "expected true/false at `" + path + "`");
    return j.get<bool>();
}

inline std::string to_string(const Json& j, const std::string& path) {
    require(j.is_string(), ErrorCode::Config, "expected a string at `" + path + "`");
    return j.get<std::string>();
}

inline std::vector<double> to_doubles(const Json& j, const std::string& path) {
    require(j.is_array(), ErrorCode::Config, "expected a list of numbers at `" + path + "`");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(to_double(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

inline Vector to_vector(const Json& j, const std::string& path) {
    const auto v = to_doubles(j, path);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix to_matrix(const Json& j, const std::string& path) {
    require(j.is_array() && !j.empty(), ErrorCode::Config, "expected a non-empty list of rows at `" + path + "`");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Matrix m;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = to_doubles(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
        if (r == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
        require(static_cast<Eigen::Index>(row.size()) == m.cols(), ErrorCode::Config,
                "ragged matrix at `" + path + "`");
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

inline RegimeMatrices to_matrices(const Json& j, const std::string& path) {
    require(j.is_array(), ErrorCode::Config, "expected one matrix per regime at `" + path + "`");
    RegimeMatrices out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(to_matrix(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

inline RegimeVectors to_vectors(const Json& j, const std::string& path) {
    require(j.is_array(), ErrorCode::Config, "expected one vector per regime at `" + path + "`");
    RegimeVectors out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(to_vector(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

inline std::vector<std::vector<double>> to_tables(const Json& j, const std::string& path) {
    require(j.is_array(), ErrorCode::Config, "expected one table per regime at `" + path + "`");
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(to_doubles(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

inline Json from_vector(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

inline Json from_matrix(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(std::move(row));
    }
    return a;
}

inline Json from_matrices(const RegimeMatrices& ms) {
    Json a = Json::array();
    for (const auto& m : ms) a.push_back(from_matrix(m));
    return a;
}

inline Json from_vectors(const RegimeVectors& vs) {
    Json a = Json::array();
    for (const auto& v : vs) a.push_back(from_vector(v));
    return a;
}

inline FamilyKind family_from(const std::string& s, const std::string& path) {
    if (s == "lq") return FamilyKind::Lq;
    if (s == "saturated-affine") return FamilyKind::SaturatedAffine;
    if (s == "constant") return FamilyKind::Constant;
    if (s == "tabulated") return FamilyKind::Tabulated;
    throw Error(ErrorCode::Config, "unknown coefficient family '" + s + "' at `" + path + "`");
}

inline DriftFamily read_drift(Object o) {
    DriftFamily f;
    f.kind = family_from(to_string(o.need("kind"), o.path("kind")), o.path("kind"));
    if (const Json* v = o.get("A")) f.A = to_matrices(*v, o.path("A"));
    if (const Json* v = o.get("B")) f.B = to_matrices(*v, o.path("B"));
    if (const Json* v = o.get("offset")) f.offset = to_vectors(*v, o.path("offset"));
    if (const Json* v = o.get("scale")) f.scale = to_double(*v, o.path("scale"));
    if (const Json* v = o.get("nodes")) f.nodes = to_doubles(*v, o.path("nodes"));
    if (const Json* v = o.get("table")) f.table = to_tables(*v, o.path("table"));
    if (f.kind == FamilyKind::Lq || f.kind == FamilyKind::SaturatedAffine) o.need("A");
    if (f.kind == FamilyKind::Constant) o.need("offset");
    if (f.kind == FamilyKind::Tabulated) {
        o.need("nodes");
        o.need("table");
    }
    o.finish();
    return f;
}

inline DiffusionFamily read_diffusion(Object o) {
    DiffusionFamily f;
    f.kind = family_from(to_string(o.need("kind"), o.path("kind")), o.path("kind"));
    if (const Json* v = o.get("C")) f.C = to_matrices(*v, o.path("C"));
    if (const Json* v = o.get("S")) f.S = to_matrices(*v, o.path("S"));
    if (const Json* v = o.get("scale")) f.scale = to_double(*v, o.path("scale"));
    if (const Json* v = o.get("nodes")) f.nodes = to_doubles(*v, o.path("nodes"));
    if (const Json* v = o.get("table")) f.table = to_tables(*v, o.path("table"));
    if (f.kind != FamilyKind::Tabulated) o.need("C");
    if (f.kind == FamilyKind::SaturatedAffine) o.need("S");
    if (f.kind == FamilyKind::Tabulated) {
        o.need("nodes");
        o.need("table");
    }
    o.finish();
    return f;
}

inline GeneratorSpec read_generator(Object o) {
    GeneratorSpec g;
    const std::string kind = to_string(o.need("kind"), o.path("kind"));
    if (kind == "constant") {
        g.kind = GeneratorKind::Constant;
        g.rates = to_matrix(o.need("rates"), o.path("rates"));
    } else if (kind == "state-action-dependent") {
        g.kind = GeneratorKind::StateActionDependent;
        g.low = to_matrix(o.need("low"), o.path("low"));
        g.high = to_matrix(o.need("high"), o.path("high"));
        if (const Json* v = o.get("state_weight")) g.state_weight = to_vector(*v, o.path("state_weight"));
        if (const Json* v = o.get("action_weight")) g.action_weight = to_vector(*v, o.path("action_weight"));
    } else {
        throw Error(ErrorCode::Config, "unknown generator kind '" + kind + "' at `" + o.path("kind") + "`");
    }
    // Default bound: largest off-diagonal rate that can occur.
    double bound = 0.0;
    const Matrix& hi = g.kind == GeneratorKind::Constant ? g.rates : g.high;
    const Matrix& lo = g.kind == GeneratorKind::Constant ? g.rates : g.low;
    for (Eigen::Index i = 0; i < hi.rows(); ++i)
        for (Eigen::Index j = 0; j < hi.cols(); ++j)
            if (i != j) bound = std::max({bound, std::abs(hi(i, j)), std::abs(lo(i, j))});
    g.bound = bound;
    if (const Json* v = o.get("bound")) g.bound = to_double(*v, o.path("bound"));
    o.finish();
    return g;
}

inline RunningCost read_running(Object o) {
    RunningCost c;
    const std::string kind = to_string(o.need("kind"), o.path("kind"));
    if (kind == "constant") c.kind = RunningCostKind::Constant;
    else if (kind == "quadratic") c.kind = RunningCostKind::Quadratic;
    else if (kind == "clamped-quadratic") c.kind = RunningCostKind::ClampedQuadratic;
    else throw Error(ErrorCode::Config, "unknown running cost kind '" + kind + "' at `" + o.path("kind") + "`");
    if (const Json* v = o.get("offset")) c.offset = to_doubles(*v, o.path("offset"));
    if (c.kind != RunningCostKind::Constant) {
        if (const Json* v = o.get("Q")) c.Q = to_matrices(*v, o.path("Q"));
        if (const Json* v = o.get("R")) c.R = to_matrices(*v, o.path("R"));
    }
    if (c.kind == RunningCostKind::ClampedQuadratic) c.cap = to_double(o.need("cap"), o.path("cap"));
    o.finish();
    return c;
}

inline TerminalCost read_terminal(Object o) {
    TerminalCost c;
    const std::string kind = to_string(o.need("kind"), o.path("kind"));
    if (kind == "constant") c.kind = TerminalKind::Constant;
    else if (kind == "quadratic") c.kind = TerminalKind::Quadratic;
    else if (kind == "bump") c.kind = TerminalKind::Bump;
    else throw Error(ErrorCode::Config, "unknown terminal cost kind '" + kind + "' at `" + o.path("kind") + "`");
    if (const Json* v = o.get("offset")) c.offset = to_doubles(*v, o.path("offset"));
    if (c.kind == TerminalKind::Quadratic) c.P = to_matrices(o.need("P"), o.path("P"));
    if (c.kind == TerminalKind::Bump) {
        c.height = to_double(o.need("height"), o.path("height"));
        if (const Json* v = o.get("width")) c.width = to_double(*v, o.path("width"));
        if (const Json* v = o.get("center")) c.center = to_vector(*v, o.path("center"));
    }
    o.finish();
    return c;
}

inline ExitDomain read_domain(Object o) {
    ExitDomain d;
    const std::string kind = to_string(o.need("kind"), o.path("kind"));
    if (kind == "interval") {
        d.kind = ExitDomain::Kind::Interval;
        d.lower = to_double(o.need("lower"), o.path("lower"));
        d.upper = to_double(o.need("upper"), o.path("upper"));
        require(d.lower < d.upper, ErrorCode::Config, "empty interval at `" + o.path("lower") + "`");
    } else if (kind == "ball") {
        d.kind = ExitDomain::Kind::Ball;
        d.radius = to_double(o.need("radius"), o.path("radius"));
        require(d.radius > 0.0, ErrorCode::Config, "radius must be positive at `" + o.path("radius") + "`");
    } else {
        throw Error(ErrorCode::Config, "unknown domain kind '" + kind + "' at `" + o.path("kind") + "`");
    }
    o.finish();
    return d;
}

inline CostSpec read_costs(Object o) {
    CostSpec c;
    c.running = read_running(Object(o.need("running"), o.path("running")));
    if (const Json* v = o.get("terminal")) c.terminal = read_terminal(Object(*v, o.path("terminal")));
    if (const Json* v = o.get("exit")) c.exit = read_terminal(Object(*v, o.path("exit")));
    if (const Json* v = o.get("exit_discount")) {
        Object b(*v, o.path("exit_discount"));
        if (const Json* w = b.get("offset")) c.exit_discount.offset = to_doubles(*w, b.path("offset"));
        if (const Json* w = b.get("action_weight")) c.exit_discount.action_weight = to_doubles(*w, b.path("action_weight"));
        b.finish();
    }
    if (const Json* v = o.get("discount")) c.discount = to_double(*v, o.path("discount"));
    if (const Json* v = o.get("horizon")) c.horizon = to_double(*v, o.path("horizon"));
    if (const Json* v = o.get("domain")) c.domain = read_domain(Object(*v, o.path("domain")));
    require(c.discount > 0.0, ErrorCode::Config, "`" + o.path("discount") + "` must be positive");
    require(c.horizon > 0.0, ErrorCode::Config, "`" + o.path("horizon") + "` must be positive");
    o.finish();
    return c;
}

}  // namespace json_io

/// Reads a model document; `path` prefixes field names in error messages.
inline ModelSpec model_from_json(const Json& j, const std::string& path = "") {
    using namespace json_io;
    Object o(j, path);
    ModelSpec m;
    m.dim = static_cast<int>(to_int(o.need("dim"), o.path("dim")));
    m.regimes.count = static_cast<int>(to_int(o.need("regimes"), o.path("regimes")));
    require(m.dim >= 1, ErrorCode::Config, "`" + o.path("dim") + "` must be >= 1");
    require(m.regimes.count >= 1, ErrorCode::Config, "`" + o.path("regimes") + "` must be >= 1");
    {
        const Json& a = o.need("actions");
        require(a.is_array() && !a.empty(), ErrorCode::Config, "`" + o.path("actions") + "` must be a non-empty list");
        std::vector<Vector> acts;
        for (std::size_t k = 0; k < a.size(); ++k)
            acts.push_back(to_vector(a[k], o.path("actions") + "[" + std::to_string(k) + "]"));
        for (const auto& v : acts)
            require(v.size() == acts.front().size(), ErrorCode::Config, "actions must share one dimension");
        m.actions = ActionGrid(std::move(acts));
    }
    m.drift = read_drift(Object(o.need("drift"), o.path("drift")));
    m.diffusion = read_diffusion(Object(o.need("diffusion"), o.path("diffusion")));
    m.generator = read_generator(Object(o.need("generator"), o.path("generator")));
    m.costs = read_costs(Object(o.need("costs"), o.path("costs")));
    if (const Json* v = o.get("noise")) {
        Object n(*v, o.path("noise"));
        NoiseOverlay ov;
        ov.drift_shift = to_vectors(n.need("drift_shift"), n.path("drift_shift"));
        ov.diffusion_factor = to_matrices(n.need("diffusion_factor"), n.path("diffusion_factor"));
        n.finish();
        m.noise = std::move(ov);
    }
    o.finish();
    m.check_shapes();
    return m;
}

inline Json model_to_json(const ModelSpec& m) {
    using namespace json_io;
    Json j;
    j["dim"] = m.dim;
    j["regimes"] = m.regimes.count;
    Json acts = Json::array();
    for (const auto& a : m.actions.actions()) acts.push_back(from_vector(a));
    j["actions"] = acts;

    Json d;
    d["kind"] = family_name(m.drift.kind);
    if (!m.drift.A.empty()) d["A"] = from_matrices(m.drift.A);
    if (!m.drift.B.empty()) d["B"] = from_matrices(m.drift.B);
    if (!m.drift.offset.empty()) d["offset"] = from_vectors(m.drift.offset);
    d["scale"] = m.drift.scale;
    if (!m.drift.nodes.empty()) {
        d["nodes"] = m.drift.nodes;
        d["table"] = m.drift.table;
    }
    j["drift"] = d;

    Json s;
    s["kind"] = family_name(m.diffusion.kind);
    if (!m.diffusion.C.empty()) s["C"] = from_matrices(m.diffusion.C);
    if (!m.diffusion.S.empty()) s["S"] = from_matrices(m.diffusion.S);
    s["scale"] = m.diffusion.scale;
    if (!m.diffusion.nodes.empty()) {
        s["nodes"] = m.diffusion.nodes;
        s["table"] = m.diffusion.table;
    }
    j["diffusion"] = s;

    Json g;
    if (m.generator.is_constant()) {
        g["kind"] = "constant";
        g["rates"] = from_matrix(m.generator.rates);
    } else {
        g["kind"] = "state-action-dependent";
        g["low"] = from_matrix(m.generator.low);
        g["high"] = from_matrix(m.generator.high);
        if (m.generator.state_weight.size()) g["state_weight"] = from_vector(m.generator.state_weight);
        if (m.generator.action_weight.size()) g["action_weight"] = from_vector(m.generator.action_weight);
    }
    g["bound"] = m.generator.bound;
    j["generator"] = g;

    const auto& c = m.costs;
    Json rc;
    switch (c.running.kind) {
        case RunningCostKind::Constant: rc["kind"] = "constant"; break;
        case RunningCostKind::Quadratic: rc["kind"] = "quadratic"; break;
        case RunningCostKind::ClampedQuadratic: rc["kind"] = "clamped-quadratic"; rc["cap"] = c.running.cap; break;
    }
    if (!c.running.offset.empty()) rc["offset"] = c.running.offset;
    if (c.running.kind != RunningCostKind::Constant) {
        if (!c.running.Q.empty()) rc["Q"] = from_matrices(c.running.Q);
        if (!c.running.R.empty()) rc["R"] = from_matrices(c.running.R);
    }
    const auto terminal = [](const TerminalCost& t) {
        Json o;
        switch (t.kind) {
            case TerminalKind::Constant: o["kind"] = "constant"; break;
            case TerminalKind::Quadratic: o["kind"] = "quadratic"; o["P"] = from_matrices(t.P); break;
            case TerminalKind::Bump:
                o["kind"] = "bump";
                o["height"] = t.height;
                o["width"] = t.width;
                if (t.center.size()) o["center"] = from_vector(t.center);
                break;
        }
        if (!t.offset.empty()) o["offset"] = t.offset;
        return o;
    };
    Json cj;
    cj["running"] = rc;
    cj["terminal"] = terminal(c.terminal);
    cj["exit"] = terminal(c.exit);
    Json b = Json::object();
    if (!c.exit_discount.offset.empty()) b["offset"] = c.exit_discount.offset;
    if (!c.exit_discount.action_weight.empty()) b["action_weight"] = c.exit_discount.action_weight;
    cj["exit_discount"] = b;
    cj["discount"] = c.discount;
    cj["horizon"] = c.horizon;
    Json dom;
    if (c.domain.kind == ExitDomain::Kind::Interval) {
        dom["kind"] = "interval";
        dom["lower"] = c.domain.lower;
        dom["upper"] = c.domain.upper;
    } else {
        dom["kind"] = "ball";
        dom["radius"] = c.domain.radius;
    }
    cj["domain"] = dom;
    j["costs"] = cj;

    if (m.noise) {
        Json n;
        n["drift_shift"] = from_vectors(m.noise->drift_shift);
        n["diffusion_factor"] = from_matrices(m.noise->diffusion_factor);
        j["noise"] = n;
    }
    return j;
}

/// Field-by-field equality through the canonical JSON form (exact doubles).
inline bool identical(const ModelSpec& a, const ModelSpec& b) { return model_to_json(a) == model_to_json(b); }

}  // namespace rsctl
