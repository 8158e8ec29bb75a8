#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "asylat/lattice_model.hpp"

namespace asylat {

struct SvgOptions {
    double size = 640.0;
    double padding = 32.0;
    double radius = 2.5;
    bool annotate = true;  // write (k1,k2) next to labelled points
};

namespace detail {

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace detail

/// Scatter plot of one slice. With a label map, points carry their (k1,k2) label and the
/// basis vectors l10 - l00 and l01 - l00 are drawn from l00. Output depends only on inputs.
inline std::string render_svg(const LatticeSample& slice, const Region& region,
                              const LabelMap* labels = nullptr, const SvgOptions& opt = {}) {
    using detail::fmt3;
    const Rect b = region.bounds();
    const double span = std::max(b.width(), b.height());
    const double scale = (opt.size - 2 * opt.padding) / span;
    auto sx = [&](double x) { return opt.padding + (x - b.min.x) * scale; };
    auto sy = [&](double y) { return opt.size - opt.padding - (y - b.min.y) * scale; };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt3(opt.size) + "\" height=\"" +
           fmt3(opt.size) + "\" viewBox=\"0 0 " + fmt3(opt.size) + " " + fmt3(opt.size) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + fmt3(opt.size) + "\" height=\"" + fmt3(opt.size) +
           "\" fill=\"white\"/>\n";
    out += "<title>hbar " + fmt3(slice.hbar()) + "</title>\n";
    out += "<rect class=\"bounds\" x=\"" + fmt3(sx(b.min.x)) + "\" y=\"" + fmt3(sy(b.max.y)) +
           "\" width=\"" + fmt3(b.width() * scale) + "\" height=\"" + fmt3(b.height() * scale) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    const Rect w = region.working();
    out += "<rect class=\"working\" x=\"" + fmt3(sx(w.min.x)) + "\" y=\"" + fmt3(sy(w.max.y)) +
           "\" width=\"" + fmt3(w.width() * scale) + "\" height=\"" + fmt3(w.height() * scale) +
           "\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

    out += "<g class=\"points\" fill=\"#1f4e79\">\n";
    for (const Vec2& p : slice.points())
        out += "<circle cx=\"" + fmt3(sx(p.x)) + "\" cy=\"" + fmt3(sy(p.y)) + "\" r=\"" + fmt3(opt.radius) +
               "\"/>\n";
    out += "</g>\n";

    if (labels) {
        if (opt.annotate) {
            out += "<g class=\"labels\" font-family=\"monospace\" font-size=\"7\" fill=\"#333\">\n";
            for (const auto& e : labels->entries())
                out += "<text x=\"" + fmt3(sx(e.point.x) + opt.radius + 1) + "\" y=\"" +
                       fmt3(sy(e.point.y) - opt.radius - 1) + "\">(" + std::to_string(e.k.k1) + "," +
                       std::to_string(e.k.k2) + ")</text>\n";
            out += "</g>\n";
        }
        const auto p00 = labels->at({0, 0});
        const auto p10 = labels->at({1, 0});
        const auto p01 = labels->at({0, 1});
        if (p00) {
            auto arrow = [&](Vec2 to, const char* cls, const char* color) {
                out += "<line class=\"" + std::string(cls) + "\" x1=\"" + fmt3(sx(p00->x)) + "\" y1=\"" +
                       fmt3(sy(p00->y)) + "\" x2=\"" + fmt3(sx(to.x)) + "\" y2=\"" + fmt3(sy(to.y)) +
                       "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
            };
            if (p10) arrow(*p10, "basis-k1", "#c0392b");
            if (p01) arrow(*p01, "basis-k2", "#27ae60");
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace asylat
