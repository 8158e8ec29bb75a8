#pragma once

// Subcommand driver for the asylat binary. Kept in a header so tests can run
// commands in-process against temporary files.
//
// Exit codes: 0 success, 1 verify found a non-equivalent slice, 2 input/schema error,
// 3 labelling failure, 4 recovery failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "asylat/errors.hpp"
#include "asylat/forward_synth.hpp"
#include "asylat/json_io.hpp"
#include "asylat/labelling_engine.hpp"
#include "asylat/recovery.hpp"
#include "asylat/svg.hpp"
#include "asylat/verify.hpp"

namespace asylat::cli {

enum ExitCode : int {
    ok = 0,
    not_equivalent = 1,
    input_error = 2,
    labelling_failure = 3,
    recovery_failure = 4,
};

inline Vec2 parse_pair(const std::string& s, const std::string& flag) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw SchemaError(flag, "expected X,Y");
    try {
        std::size_t used = 0;
        const double x = std::stod(s.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("x");
        const std::string ys = s.substr(comma + 1);
        const double y = std::stod(ys, &used);
        if (used != ys.size()) throw std::invalid_argument("y");
        return {x, y};
    } catch (const std::exception&) {
        throw SchemaError(flag, "expected X,Y, got '" + s + "'");
    }
}

inline std::string default_truth_path(const std::string& out) {
    const std::string suffix = ".json";
    if (out.size() > suffix.size() && out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
        return out.substr(0, out.size() - suffix.size()) + ".truth.json";
    return out + ".truth.json";
}

inline std::string format_matrix(const IntMat2& m) {
    std::ostringstream os;
    os << "[[" << m.a << "," << m.b << "],[" << m.c << "," << m.d << "]]";
    return os.str();
}

struct GenerateArgs {
    std::string config, out, truth, csv;
    std::optional<std::uint64_t> seed;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    io::GenerateConfig cfg = io::generate_config_from_json(io::read_file(a.config));
    if (a.seed) cfg.noise.seed = *a.seed;
    auto [lattice, truth] = generate(cfg.chart, cfg.region, cfg.hbars, cfg.noise);
    io::write_file(a.out, io::dump(io::to_json(lattice)));
    const std::string truth_path = a.truth.empty() ? default_truth_path(a.out) : a.truth;
    io::write_file(truth_path, io::dump(io::to_json(lattice, truth)));
    if (!a.csv.empty()) io::write_file(a.csv, io::lattice_csv(lattice));
    for (std::size_t i = 0; i < lattice.size(); ++i)
        out << "slice " << i << " hbar=" << lattice[i].hbar() << " points=" << lattice[i].size()
            << " dropped=" << truth.slices[i].dropped << "\n";
    out << "wrote " << a.out << " and " << truth_path << "\n";
    return ok;
}

struct LabelArgs {
    std::string lattice, out, anchor, index = "grid";
    double density_ratio = 0.5;
    std::optional<int> max_rows, max_cols;
};

inline int cmd_label(const LabelArgs& a, std::ostream& out) {
    const AsymptoticLattice lattice = io::lattice_from_json(io::read_file(a.lattice));
    LabellingConfig cfg;
    if (!a.anchor.empty()) cfg.anchor = parse_pair(a.anchor, "--anchor");
    if (a.index == "kd")
        cfg.neighbor_index = NeighborIndexKind::kd;
    else if (a.index != "grid")
        throw SchemaError("--index", "expected grid or kd");
    cfg.max_rows = a.max_rows;
    cfg.max_cols = a.max_cols;
    SequenceConfig scfg;
    scfg.density_ratio = a.density_ratio;
    if (!(a.density_ratio > 0.0 && a.density_ratio <= 1.0))
        throw SchemaError("--density-ratio", "must lie in (0, 1]");
    const LinearLabelling l = label_sequence(lattice, cfg, scfg);
    io::write_file(a.out, io::dump(io::to_json(l, OriginMode::per_slice)));
    for (std::size_t i = 0; i < l.maps.size(); ++i) {
        const SequenceStep& st = l.steps[i];
        out << "slice " << i << " hbar=" << l.maps[i].hbar() << " labelled=" << l.maps[i].size()
            << " correction=" << format_matrix(st.correction) << " drift=" << st.frame_drift;
        if (st.origin_aligned)
            out << " origin_offset=(" << st.origin_offset.k1 << "," << st.origin_offset.k2 << ")";
        out << "\n";
    }
    for (const auto& w : l.warnings) out << "warning: " << w << "\n";
    return ok;
}

struct RecoverArgs {
    std::string lattice, labelling, out, origin;
    int degree = 1;
    int jet_order = 0;
    std::vector<std::string> at;
};

inline int cmd_recover(const RecoverArgs& a, std::ostream& out) {
    const AsymptoticLattice lattice = io::lattice_from_json(io::read_file(a.lattice));
    const io::json lj = io::read_file(a.labelling);
    LinearLabelling labelling;
    OriginMode origin = OriginMode::per_slice;
    if (lj.is_object() && lj.contains("chart")) {
        labelling = io::truth_labelling(io::truth_from_json(lj).truth);
        origin = OriginMode::absolute;
    } else {
        auto f = io::labelling_from_json(lj);
        labelling = std::move(f.labelling);
        origin = f.origin;
    }
    if (a.origin == "absolute")
        origin = OriginMode::absolute;
    else if (a.origin == "per_slice")
        origin = OriginMode::per_slice;
    else if (!a.origin.empty())
        throw SchemaError("--origin", "expected absolute or per_slice");
    if (labelling.maps.size() != lattice.size())
        throw SchemaError(a.labelling, "slice count differs from the lattice file");
    for (std::size_t i = 0; i < lattice.size(); ++i)
        if (labelling.maps[i].hbar() != lattice[i].hbar())
            throw SchemaError(a.labelling + "/slices/" + std::to_string(i) + "/hbar",
                              "does not match the lattice file");

    RecoveryReport report = fit_chart(labelling, lattice, {a.degree, a.jet_order, origin});
    for (const std::string& s : a.at) {
        const Vec2 p = parse_pair(s, "--at");
        const std::array<Vec2, 1> pts{p};
        report.jacobian_field.push_back(jacobian_field(report, pts).front());
        try {
            const auto est = rotation_number(report, p);
            report.rotation.push_back({p, est.rho, est.radius});
            out << "rho(" << p.x << "," << p.y << ") = " << est.rho << " +- " << est.radius << "\n";
        } catch (const PoleError& e) {
            report.warnings.push_back(std::string("at (") + std::to_string(p.x) + "," + std::to_string(p.y) +
                                      "): " + e.what());
            out << "rho(" << p.x << "," << p.y << ") diverges\n";
        }
    }
    io::write_file(a.out, io::dump(io::to_json(report)));
    for (const auto& r : report.residuals)
        out << "hbar=" << r.hbar << " points=" << r.count << " residual max=" << r.max << " rms=" << r.rms << "\n";
    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
    return ok;
}

struct VerifyArgs {
    std::string labelling, truth;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    const auto lf = io::labelling_from_json(io::read_file(a.labelling));
    const auto tf = io::truth_from_json(io::read_file(a.truth));
    const auto& maps = lf.labelling.maps;
    if (maps.size() != tf.truth.slices.size())
        throw SchemaError(a.labelling, "slice count differs from the ground-truth file");
    bool all = true;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        out << "slice " << i << " hbar=" << maps[i].hbar() << ": ";
        try {
            const auto r = verify_against_truth(maps[i], tf.truth.slices[i]);
            if (r.equivalent) {
                out << "equivalent M=" << format_matrix(r.witness->matrix) << " t=(" << r.witness->shift.k1
                    << "," << r.witness->shift.k2 << ")\n";
            } else {
                all = false;
                out << (r.reflected ? "NOT equivalent (reflected match)\n" : "NOT equivalent\n");
            }
        } catch (const StructuralMismatch& e) {
            all = false;
            out << "NOT equivalent (" << e.what() << ")\n";
        }
    }
    return all ? ok : not_equivalent;
}

struct PlotArgs {
    std::string lattice, labels, out;
    std::size_t slice = 0;
};

inline int cmd_plot(const PlotArgs& a, std::ostream& out) {
    const AsymptoticLattice lattice = io::lattice_from_json(io::read_file(a.lattice));
    if (a.slice >= lattice.size()) throw SchemaError("--slice", "slice index out of range");
    std::optional<LinearLabelling> labels;
    if (!a.labels.empty()) {
        labels = io::labelling_from_json(io::read_file(a.labels)).labelling;
        if (a.slice >= labels->maps.size() || labels->maps[a.slice].hbar() != lattice[a.slice].hbar())
            throw SchemaError(a.labels, "labelling does not match the plotted slice");
    }
    const std::string svg = render_svg(lattice[a.slice], lattice.region(),
                                       labels ? &labels->maps[a.slice] : nullptr);
    io::write_file(a.out, svg);
    out << "wrote " << a.out << "\n";
    return ok;
}

/// Runs the command line; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Asymptotic lattice toolkit: generate, label, recover, verify, plot"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Synthesize a lattice and its ground truth from a JSON config");
    g->add_option("--config", gen.config, "Job config (chart, region, hbars, noise)")->required();
    g->add_option("--out", gen.out, "Lattice file to write")->required();
    g->add_option("--truth", gen.truth, "Ground-truth file (default: <out>.truth.json)");
    g->add_option("--csv", gen.csv, "Also write a points-only CSV table");
    g->add_option("--seed", gen.seed, "Override the noise seed");

    LabelArgs lab;
    auto* l = app.add_subcommand("label", "Label every slice and make the sequence coherent");
    l->add_option("lattice", lab.lattice, "Lattice file")->required();
    l->add_option("--out", lab.out, "Labelling file to write")->required();
    l->add_option("--anchor", lab.anchor, "Anchor point X,Y (default: centre of the working region)");
    l->add_option("--density-ratio", lab.density_ratio, "Minimum hbar ratio between consecutive slices");
    l->add_option("--index", lab.index, "Spatial index: grid or kd");
    l->add_option("--max-rows", lab.max_rows, "Cap on |k2|");
    l->add_option("--max-cols", lab.max_cols, "Cap on |k1|");

    RecoverArgs rec;
    auto* r = app.add_subcommand("recover", "Fit the chart jet and rotation numbers");
    r->add_option("lattice", rec.lattice, "Lattice file")->required();
    r->add_option("labelling", rec.labelling, "Labelling file or ground-truth file")->required();
    r->add_option("--out", rec.out, "Report file to write")->required();
    r->add_option("--degree", rec.degree, "Total polynomial degree of the fitted terms");
    r->add_option("--jet-order", rec.jet_order, "Highest hbar order fitted (0 or 1)");
    r->add_option("--origin", rec.origin, "absolute or per_slice (default: from the labelling file)");
    r->add_option("--at", rec.at, "Extra spectral point X,Y for a rotation number (repeatable)");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "Compare a labelling with ground truth slice by slice");
    v->add_option("labelling", ver.labelling, "Labelling file")->required();
    v->add_option("truth", ver.truth, "Ground-truth file")->required();

    PlotArgs plt;
    auto* p = app.add_subcommand("plot", "Write an SVG scatter plot of one slice");
    p->add_option("lattice", plt.lattice, "Lattice file")->required();
    p->add_option("--labels", plt.labels, "Labelling file");
    p->add_option("--slice", plt.slice, "Slice index");
    p->add_option("--out", plt.out, "SVG file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }

    try {
        if (*g) return cmd_generate(gen, out);
        if (*l) return cmd_label(lab, out);
        if (*r) return cmd_recover(rec, out);
        if (*v) return cmd_verify(ver, out);
        if (*p) return cmd_plot(plt, out);
    } catch (const SequenceBreak& e) {
        err << "labelling failed: " << e.what() << "\n";
        return labelling_failure;
    } catch (const InsufficientData& e) {
        err << "labelling failed: " << e.what() << "\n";
        return labelling_failure;
    } catch (const FitFailure& e) {
        err << "recovery failed: " << e.what() << "\n";
        return recovery_failure;
    } catch (const Error& e) {
        err << "input error: " << e.what() << "\n";
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return input_error;
    }
    return input_error;
}

}  // namespace asylat::cli
