#pragma once

#include <string>

#include <json.hpp>

#include "maglev/lpv.hpp"

namespace maglev {

namespace detail {

using ojson = nlohmann::ordered_json;

template <typename Matrix>
ojson matrix_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ojson row = ojson::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

template <typename Matrix>
Matrix matrix_from_json(const ojson& j, const std::string& where) {
    Matrix m;
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m.rows()) {
        throw ShapeMismatch(where + ": wrong row count");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const ojson& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols()) {
            throw ShapeMismatch(where + ": wrong column count");
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

template <int R, int C>
ojson family_json(const AffineMatrixFamily<R, C>& f) {
    ojson terms = ojson::array();
    for (const auto& t : f.terms) terms.push_back({{"index", t.index}, {"matrix", matrix_json(t.matrix)}});
    return {{"rows", R}, {"cols", C}, {"base", matrix_json(f.base)}, {"terms", terms}};
}

template <int R, int C>
AffineMatrixFamily<R, C> family_from_json(const ojson& j, const std::string& where) {
    if (j.at("rows").get<int>() != R || j.at("cols").get<int>() != C) throw ShapeMismatch(where + ": wrong shape");
    AffineMatrixFamily<R, C> f;
    f.base = matrix_from_json<typename AffineMatrixFamily<R, C>::Matrix>(j.at("base"), where + ".base");
    for (const auto& t : j.at("terms")) {
        f.terms.push_back({t.at("index").get<int>(),
                           matrix_from_json<typename AffineMatrixFamily<R, C>::Matrix>(t.at("matrix"), where)});
    }
    return f;
}

inline ojson strategy_json(const SchedulingStrategy& s) {
    ojson features = ojson::array();
    for (const auto& f : s.features()) {
        const char* kind = f.kind == SchedulingFeature::Kind::trig        ? "trig"
                           : f.kind == SchedulingFeature::Kind::trig_rate ? "trig-rate"
                                                                          : "coordinate";
        const auto& g = f.monomial;
        features.push_back({{"name", f.name()},
                            {"kind", kind},
                            {"monomial", {g.sin_chi, g.cos_chi, g.sin_psi, g.cos_psi}},
                            {"index", f.index}});
    }
    return {{"name", s.name()}, {"features", features}};
}

inline SchedulingStrategy strategy_from_json(const ojson& j) {
    std::vector<SchedulingFeature> features;
    for (const auto& f : j.at("features")) {
        SchedulingFeature sf;
        const std::string kind = f.at("kind").get<std::string>();
        if (kind == "trig") {
            sf.kind = SchedulingFeature::Kind::trig;
        } else if (kind == "trig-rate") {
            sf.kind = SchedulingFeature::Kind::trig_rate;
        } else if (kind == "coordinate") {
            sf.kind = SchedulingFeature::Kind::coordinate;
        } else {
            throw ConfigError("unknown scheduling feature kind '" + kind + "'");
        }
        const auto& m = f.at("monomial");
        sf.monomial = {m.at(0).get<int>(), m.at(1).get<int>(), m.at(2).get<int>(), m.at(3).get<int>()};
        sf.index = f.at("index").get<int>();
        features.push_back(sf);
    }
    return SchedulingStrategy(j.at("name").get<std::string>(), std::move(features));
}

inline ojson params_json(const PlantParams& p) {
    return {{"m", p.m},
            {"I_chi", p.I_chi},
            {"I_psi", p.I_psi},
            {"I_zeta", p.I_zeta},
            {"c", {p.c(0), p.c(1), p.c(2), p.c(3), p.c(4), p.c(5)}}};
}

inline PlantParams params_from_json(const ojson& j) {
    PlantParams p;
    p.m = j.at("m").get<double>();
    p.I_chi = j.at("I_chi").get<double>();
    p.I_psi = j.at("I_psi").get<double>();
    p.I_zeta = j.at("I_zeta").get<double>();
    for (int i = 0; i < 6; ++i) p.c(i) = j.at("c").at(static_cast<std::size_t>(i)).get<double>();
    return p;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const DescriptorLpvModel& m) {
    using namespace detail;
    return {{"model", "global-descriptor"}, {"params", params_json(m.params)}, {"strategy", strategy_json(m.strategy)},
            {"E", family_json(m.E)},         {"A", family_json(m.A)},           {"B", family_json(m.B)},
            {"C", family_json(m.C)}};
}

inline nlohmann::ordered_json model_to_json(const LocalLpvModel& m) {
    using namespace detail;
    return {{"model", "local"},
            {"params", params_json(m.params)},
            {"strategy", strategy_json(m.strategy)},
            {"A", matrix_json(m.A)},
            {"B", family_json(m.B)},
            {"C", matrix_json(m.C)}};
}

inline DescriptorLpvModel descriptor_from_json(const nlohmann::ordered_json& j) {
    using namespace detail;
    if (j.at("model").get<std::string>() != "global-descriptor") throw ConfigError("not a global descriptor model");
    DescriptorLpvModel m;
    m.params = params_from_json(j.at("params"));
    m.strategy = strategy_from_json(j.at("strategy"));
    m.E = family_from_json<12, 12>(j.at("E"), "E");
    m.A = family_from_json<12, 12>(j.at("A"), "A");
    m.B = family_from_json<12, 6>(j.at("B"), "B");
    m.C = family_from_json<6, 12>(j.at("C"), "C");
    return m;
}

inline LocalLpvModel local_from_json(const nlohmann::ordered_json& j) {
    using namespace detail;
    if (j.at("model").get<std::string>() != "local") throw ConfigError("not a local model");
    LocalLpvModel m;
    m.params = params_from_json(j.at("params"));
    m.strategy = strategy_from_json(j.at("strategy"));
    m.A = matrix_from_json<Mat12>(j.at("A"), "A");
    m.B = family_from_json<12, 6>(j.at("B"), "B");
    m.C = matrix_from_json<Mat6x12>(j.at("C"), "C");
    return m;
}

}  // namespace maglev
