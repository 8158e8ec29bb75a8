#pragma once

// JSON encoding of every domain type plus the lattice, labelling, ground-truth, report
// and job-config file formats. Readers validate the schema and report the offending
// field as a JSON pointer.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "asylat/errors.hpp"
#include "asylat/forward_synth.hpp"
#include "asylat/labelling_engine.hpp"
#include "asylat/lattice_model.hpp"
#include "asylat/recovery.hpp"

namespace asylat::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Schema helpers

inline const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "/" + key, "missing field");
    return *it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline const json& array(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path, "expected an array");
    return j;
}

inline Vec2 point(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [x, y]");
    return {number(j[0], path + "/0"), number(j[1], path + "/1")};
}

inline Label label(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected [k1, k2]");
    return {integer(j[0], path + "/0"), integer(j[1], path + "/1")};
}

inline std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path, "expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
    return j.get<bool>();
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
    array(j, path);
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "/" + std::to_string(i)));
    return out;
}

/// Rethrows constructor invariant violations as schema errors at `path`.
template <class F>
auto checked(const std::string& path, F&& make) -> decltype(make()) {
    try {
        return make();
    } catch (const InvalidArgument& e) {
        throw SchemaError(path, e.what());
    }
}

inline json to_json(Vec2 p) { return json::array({p.x, p.y}); }
inline json to_json(Label k) { return json::array({k.k1, k.k2}); }
inline json to_json(const Mat2& m) { return json::array({json::array({m.a, m.b}), json::array({m.c, m.d})}); }
inline json to_json(const IntMat2& m) {
    return json::array({json::array({m.a, m.b}), json::array({m.c, m.d})});
}

inline Mat2 mat2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected a 2x2 matrix");
    const Vec2 r0 = point(j[0], path + "/0"), r1 = point(j[1], path + "/1");
    return {r0.x, r0.y, r1.x, r1.y};
}

inline IntMat2 int_mat2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(path, "expected a 2x2 integer matrix");
    const Label r0 = label(j[0], path + "/0"), r1 = label(j[1], path + "/1");
    return {r0.k1, r0.k2, r1.k1, r1.k2};
}

inline json rect_to_json(const Rect& r) { return json{{"min", to_json(r.min)}, {"max", to_json(r.max)}}; }
inline Rect rect_from_json(const json& j, const std::string& path) {
    return {point(field(j, "min", path), path + "/min"), point(field(j, "max", path), path + "/max")};
}

// ---------------------------------------------------------------------------
// Domain types

inline json to_json(const Region& r) {
    return json{{"min", to_json(r.bounds().min)},
                {"max", to_json(r.bounds().max)},
                {"inner_margin", r.inner_margin()}};
}

inline Region region_from_json(const json& j, const std::string& path) {
    const Rect b = rect_from_json(j, path);
    if (!j.contains("inner_margin")) return checked(path, [&] { return Region::with_default_margin(b); });
    const double m = number(j["inner_margin"], path + "/inner_margin");
    return checked(path, [&] { return Region(b, m); });
}

inline json to_json(const PolyMap2& p) {
    return json{{"degree", p.degree()},
                {"center", to_json(p.center())},
                {"scale", to_json(p.scale())},
                {"x", p.coeffs_x()},
                {"y", p.coeffs_y()}};
}

inline PolyMap2 poly_from_json(const json& j, const std::string& path) {
    const auto deg = integer(field(j, "degree", path), path + "/degree");
    const Vec2 c = j.contains("center") ? point(j["center"], path + "/center") : Vec2{};
    const Vec2 s = j.contains("scale") ? point(j["scale"], path + "/scale") : Vec2{1.0, 1.0};
    auto cx = numbers(field(j, "x", path), path + "/x");
    auto cy = numbers(field(j, "y", path), path + "/y");
    return checked(path, [&] { return PolyMap2(static_cast<int>(deg), c, s, cx, cy); });
}

inline json to_json(const ChartJet& c) {
    json terms = json::array();
    for (const auto& t : c.terms()) terms.push_back(to_json(t));
    return json{{"domain", rect_to_json(c.domain())}, {"terms", terms}};
}

/// Either explicit terms, or {"model": name, "strength": s, "domain": {...}}.
inline ChartJet chart_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    const Rect dom = j.contains("domain") ? rect_from_json(j["domain"], path + "/domain")
                                          : Rect{{0.0, 0.0}, {1.0, 1.0}};
    if (j.contains("model")) {
        const std::string name = text(j["model"], path + "/model");
        ModelKind kind;
        try {
            kind = model_from_name(name);
        } catch (const UnsupportedModel& e) {
            throw SchemaError(path + "/model", e.what());
        }
        const double s = j.contains("strength") ? number(j["strength"], path + "/strength") : 0.0;
        return checked(path, [&] { return model_system(kind, s, dom); });
    }
    const json& terms = array(field(j, "terms", path), path + "/terms");
    std::vector<PolyMap2> ts;
    for (std::size_t i = 0; i < terms.size(); ++i)
        ts.push_back(poly_from_json(terms[i], path + "/terms/" + std::to_string(i)));
    return checked(path, [&] { return ChartJet(dom, std::move(ts)); });
}

inline json to_json(const NoiseModel& n) {
    return json{{"order", n.order}, {"amplitude", n.amplitude}, {"seed", n.seed}};
}

inline NoiseModel noise_from_json(const json& j, const std::string& path) {
    NoiseModel n;
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    if (j.contains("order")) n.order = static_cast<int>(integer(j["order"], path + "/order"));
    if (j.contains("amplitude")) n.amplitude = number(j["amplitude"], path + "/amplitude");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw SchemaError(path + "/seed", "expected an integer");
        n.seed = j["seed"].get<std::uint64_t>();
    }
    checked(path, [&] {
        n.validate();
        return 0;
    });
    return n;
}

// ---------------------------------------------------------------------------
// Lattice file

inline json slice_to_json(const LatticeSample& s) {
    json pts = json::array();
    for (const Vec2& p : s.points()) pts.push_back(to_json(p));
    return json{{"hbar", s.hbar()}, {"points", pts}};
}

inline json to_json(const AsymptoticLattice& l) {
    json slices = json::array();
    for (const auto& s : l.samples()) slices.push_back(slice_to_json(s));
    return json{{"region", to_json(l.region())}, {"slices", slices}};
}

inline std::vector<Vec2> points_from_json(const json& j, const std::string& path) {
    array(j, path);
    std::vector<Vec2> pts;
    pts.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) pts.push_back(point(j[i], path + "/" + std::to_string(i)));
    return pts;
}

inline AsymptoticLattice lattice_from_json(const json& j) {
    const Region region = region_from_json(field(j, "region", ""), "/region");
    const json& slices = array(field(j, "slices", ""), "/slices");
    if (slices.empty()) throw SchemaError("/slices", "at least one slice required");
    std::vector<LatticeSample> samples;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const std::string p = "/slices/" + std::to_string(i);
        const double h = number(field(slices[i], "hbar", p), p + "/hbar");
        auto pts = points_from_json(field(slices[i], "points", p), p + "/points");
        samples.push_back(checked(p, [&] { return LatticeSample(h, std::move(pts)); }));
    }
    return checked("/slices", [&] { return AsymptoticLattice(region, std::move(samples)); });
}

// ---------------------------------------------------------------------------
// Labelling file

inline json to_json(const LabelMap& m) {
    json entries = json::array();
    for (const auto& e : m.entries()) entries.push_back(json{{"point", to_json(e.point)}, {"k", to_json(e.k)}});
    return json{{"hbar", m.hbar()}, {"entries", entries}};
}

inline LabelMap label_map_from_json(const json& j, const std::string& path) {
    const double h = number(field(j, "hbar", path), path + "/hbar");
    const json& es = array(field(j, "entries", path), path + "/entries");
    std::vector<LabelEntry> entries;
    entries.reserve(es.size());
    for (std::size_t i = 0; i < es.size(); ++i) {
        const std::string p = path + "/entries/" + std::to_string(i);
        entries.push_back({point(field(es[i], "point", p), p + "/point"), label(field(es[i], "k", p), p + "/k")});
    }
    return checked(path, [&] { return LabelMap(h, std::move(entries)); });
}

struct LabellingFile {
    LinearLabelling labelling;
    OriginMode origin = OriginMode::per_slice;
};

inline json to_json(const LinearLabelling& l, OriginMode origin = OriginMode::per_slice) {
    json slices = json::array();
    for (std::size_t i = 0; i < l.maps.size(); ++i) {
        json s = to_json(l.maps[i]);
        if (i < l.steps.size()) {
            const SequenceStep& st = l.steps[i];
            s["correction"] = to_json(st.correction);
            s["frame_drift"] = st.frame_drift;
            s["origin_aligned"] = st.origin_aligned;
            s["origin_offset"] = to_json(st.origin_offset);
        }
        slices.push_back(std::move(s));
    }
    return json{{"origin", std::string(to_string(origin))},
                {"convention", to_json(l.convention)},
                {"slices", slices},
                {"warnings", l.warnings}};
}

inline LabellingFile labelling_from_json(const json& j) {
    LabellingFile out;
    if (!j.is_object()) throw SchemaError("", "expected an object");
    if (j.contains("origin")) {
        const std::string o = text(j["origin"], "/origin");
        if (o == "absolute")
            out.origin = OriginMode::absolute;
        else if (o == "per_slice")
            out.origin = OriginMode::per_slice;
        else
            throw SchemaError("/origin", "expected \"absolute\" or \"per_slice\"");
    }
    if (j.contains("convention")) out.labelling.convention = int_mat2(j["convention"], "/convention");
    const json& slices = array(field(j, "slices", ""), "/slices");
    if (slices.empty()) throw SchemaError("/slices", "at least one slice required");
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const std::string p = "/slices/" + std::to_string(i);
        out.labelling.maps.push_back(label_map_from_json(slices[i], p));
        SequenceStep st;
        const json& s = slices[i];
        if (s.contains("correction")) st.correction = int_mat2(s["correction"], p + "/correction");
        if (s.contains("frame_drift")) st.frame_drift = number(s["frame_drift"], p + "/frame_drift");
        if (s.contains("origin_aligned")) st.origin_aligned = boolean(s["origin_aligned"], p + "/origin_aligned");
        if (s.contains("origin_offset")) st.origin_offset = label(s["origin_offset"], p + "/origin_offset");
        out.labelling.steps.push_back(st);
    }
    if (j.contains("warnings")) {
        const json& w = array(j["warnings"], "/warnings");
        for (std::size_t i = 0; i < w.size(); ++i)
            out.labelling.warnings.push_back(text(w[i], "/warnings/" + std::to_string(i)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground-truth file: a lattice file whose slices also carry "labels", plus the chart.

inline json to_json(const AsymptoticLattice& l, const GroundTruth& t) {
    json j = to_json(l);
    for (std::size_t i = 0; i < t.slices.size(); ++i) {
        json labels = json::array();
        for (const auto& e : t.slices[i].entries) labels.push_back(to_json(e.k));
        j["slices"][i]["labels"] = labels;
        j["slices"][i]["dropped"] = t.slices[i].dropped;
    }
    j["chart"] = to_json(t.chart);
    return j;
}

struct TruthFile {
    AsymptoticLattice lattice;
    GroundTruth truth;
};

inline TruthFile truth_from_json(const json& j) {
    AsymptoticLattice lattice = lattice_from_json(j);
    GroundTruth truth{chart_from_json(field(j, "chart", ""), "/chart"), {}};
    const json& slices = j["slices"];
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const std::string p = "/slices/" + std::to_string(i);
        const json& labels = array(field(slices[i], "labels", p), p + "/labels");
        const auto pts = lattice[i].points();
        if (labels.size() != pts.size())
            throw SchemaError(p + "/labels", "must be parallel to points");
        GroundTruthSlice gs;
        gs.hbar = lattice[i].hbar();
        for (std::size_t k = 0; k < labels.size(); ++k)
            gs.entries.push_back({pts[k], label(labels[k], p + "/labels/" + std::to_string(k))});
        if (slices[i].contains("dropped"))
            gs.dropped = static_cast<std::size_t>(integer(slices[i]["dropped"], p + "/dropped"));
        checked(p + "/labels", [&] { return LabelMap(gs.hbar, gs.entries); });
        truth.slices.push_back(std::move(gs));
    }
    return {std::move(lattice), std::move(truth)};
}

/// The true labels of a ground-truth file viewed as a labelling with absolute origin.
inline LinearLabelling truth_labelling(const GroundTruth& t) {
    LinearLabelling l;
    for (const auto& s : t.slices) {
        l.maps.push_back(s.label_map());
        l.steps.push_back({});
    }
    return l;
}

// ---------------------------------------------------------------------------
// Report file

inline json to_json(const RecoveryReport& r) {
    json offsets = json::array();
    for (const Vec2& o : r.slice_offsets) offsets.push_back(to_json(o));
    json residuals = json::array();
    for (const auto& s : r.residuals)
        residuals.push_back(json{{"hbar", s.hbar}, {"count", s.count}, {"max", s.max}, {"rms", s.rms}});
    json jac = json::array();
    for (const auto& e : r.jacobian_field)
        jac.push_back(json{{"point", to_json(e.point)},
                           {"preimage", to_json(e.preimage)},
                           {"jacobian", to_json(e.jacobian)},
                           {"extrapolated", e.extrapolated}});
    json rot = json::array();
    for (const auto& e : r.rotation)
        rot.push_back(json{{"point", to_json(e.point)}, {"rho", e.rho}, {"radius", e.radius}});
    return json{{"origin", std::string(to_string(r.origin))},
                {"fitted_chart", to_json(r.fitted_chart)},
                {"slice_offsets", offsets},
                {"residuals", residuals},
                {"jacobian_field", jac},
                {"rotation", rot},
                {"g0_covariance", r.g0_covariance},
                {"residual_variance", to_json(r.residual_variance)},
                {"jacobian_consistent", r.jacobian_consistent},
                {"warnings", r.warnings}};
}

inline RecoveryReport report_from_json(const json& j) {
    const std::string o = text(field(j, "origin", ""), "/origin");
    if (o != "per_slice" && o != "absolute") throw SchemaError("/origin", "expected \"absolute\" or \"per_slice\"");
    RecoveryReport r{chart_from_json(field(j, "fitted_chart", ""), "/fitted_chart"),
                     o == "per_slice" ? OriginMode::per_slice : OriginMode::absolute,
                     {}, {}, {}, {}, {}, {}, true, {}};
    r.slice_offsets = points_from_json(field(j, "slice_offsets", ""), "/slice_offsets");
    const json& res = array(field(j, "residuals", ""), "/residuals");
    for (std::size_t i = 0; i < res.size(); ++i) {
        const std::string p = "/residuals/" + std::to_string(i);
        r.residuals.push_back({number(field(res[i], "hbar", p), p + "/hbar"),
                               static_cast<std::size_t>(integer(field(res[i], "count", p), p + "/count")),
                               number(field(res[i], "max", p), p + "/max"),
                               number(field(res[i], "rms", p), p + "/rms")});
    }
    const json& jac = array(field(j, "jacobian_field", ""), "/jacobian_field");
    for (std::size_t i = 0; i < jac.size(); ++i) {
        const std::string p = "/jacobian_field/" + std::to_string(i);
        r.jacobian_field.push_back({point(field(jac[i], "point", p), p + "/point"),
                                    point(field(jac[i], "preimage", p), p + "/preimage"),
                                    mat2(field(jac[i], "jacobian", p), p + "/jacobian"),
                                    boolean(field(jac[i], "extrapolated", p), p + "/extrapolated")});
    }
    const json& rot = array(field(j, "rotation", ""), "/rotation");
    for (std::size_t i = 0; i < rot.size(); ++i) {
        const std::string p = "/rotation/" + std::to_string(i);
        r.rotation.push_back({point(field(rot[i], "point", p), p + "/point"),
                              number(field(rot[i], "rho", p), p + "/rho"),
                              number(field(rot[i], "radius", p), p + "/radius")});
    }
    r.g0_covariance = numbers(field(j, "g0_covariance", ""), "/g0_covariance");
    r.residual_variance = point(field(j, "residual_variance", ""), "/residual_variance");
    r.jacobian_consistent = boolean(field(j, "jacobian_consistent", ""), "/jacobian_consistent");
    const json& w = array(field(j, "warnings", ""), "/warnings");
    for (std::size_t i = 0; i < w.size(); ++i) r.warnings.push_back(text(w[i], "/warnings/" + std::to_string(i)));
    return r;
}

// ---------------------------------------------------------------------------
// Generate job config

struct GenerateConfig {
    ChartJet chart;
    Region region;
    std::vector<double> hbars;
    NoiseModel noise = NoiseModel::none();
};

inline json to_json(const GenerateConfig& c) {
    return json{{"chart", to_json(c.chart)},
                {"region", to_json(c.region)},
                {"hbars", c.hbars},
                {"noise", to_json(c.noise)}};
}

inline GenerateConfig generate_config_from_json(const json& j) {
    GenerateConfig c{chart_from_json(field(j, "chart", ""), "/chart"),
                     region_from_json(field(j, "region", ""), "/region"),
                     numbers(field(j, "hbars", ""), "/hbars"),
                     NoiseModel::none()};
    if (c.hbars.empty()) throw SchemaError("/hbars", "at least one hbar required");
    for (std::size_t i = 0; i < c.hbars.size(); ++i) {
        if (!(c.hbars[i] > 0.0)) throw SchemaError("/hbars/" + std::to_string(i), "hbar must be positive");
        if (i > 0 && !(c.hbars[i] < c.hbars[i - 1]))
            throw SchemaError("/hbars/" + std::to_string(i), "hbars must be strictly decreasing");
    }
    if (j.contains("noise")) c.noise = noise_from_json(j["noise"], "/noise");
    return c;
}

// ---------------------------------------------------------------------------
// Files

/// Parses a JSON document; syntax errors become SchemaError naming the byte offset.
inline json parse_text(const std::string& content, const std::string& source) {
    try {
        return json::parse(content);
    } catch (const json::parse_error& e) {
        throw SchemaError(source, "malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

inline json read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

inline std::string dump(const json& j) { return j.dump(1) + "\n"; }

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError(path, "cannot open file for writing");
    out << content;
    if (!out) throw SchemaError(path, "write failed");
}

/// Points-only CSV table: slice,hbar,x,y with 17 significant digits.
inline std::string lattice_csv(const AsymptoticLattice& l) {
    std::ostringstream os;
    os.precision(17);
    os << "slice,hbar,x,y\n";
    for (std::size_t i = 0; i < l.size(); ++i)
        for (const Vec2& p : l[i].points()) os << i << ',' << l[i].hbar() << ',' << p.x << ',' << p.y << '\n';
    return os.str();
}

}  // namespace asylat::io
