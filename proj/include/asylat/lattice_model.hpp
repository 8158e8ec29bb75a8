#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/geometry.hpp"
#include "asylat/polynomial.hpp"
#include "asylat/spatial_index.hpp"

namespace asylat {

/// Default minimum separation below which two points count as duplicates.
inline constexpr double default_min_separation = 1e-12;

/// The spectral region B and the margin that carves out the working region B0.
class Region {
public:
    Region(Rect bounds, double inner_margin) : bounds_(bounds), inner_margin_(inner_margin) {
        if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0))
            throw InvalidArgument("region must have positive width and height");
        if (!(inner_margin >= 0.0))
            throw InvalidArgument("inner_margin must be nonnegative");
        if (!(inner_margin < 0.5 * std::min(bounds.width(), bounds.height())))
            throw InvalidArgument("inner_margin leaves an empty working region");
    }

    /// Region with the default margin of 10% of the smaller side.
    static Region with_default_margin(Rect bounds) {
        return Region(bounds, 0.1 * std::min(bounds.width(), bounds.height()));
    }

    const Rect& bounds() const { return bounds_; }
    double inner_margin() const { return inner_margin_; }
    Rect working() const { return bounds_.shrunk(inner_margin_); }

    bool contains(Vec2 p) const { return bounds_.contains(p); }
    bool in_working(Vec2 p) const { return working().contains(p); }

    friend bool operator==(const Region&, const Region&) = default;

private:
    Rect bounds_;
    double inner_margin_;
};

/// Smallest distance between two distinct points of `pts` (infinity for fewer than two).
inline double min_pairwise_gap(std::span<const Vec2> pts) {
    if (pts.size() < 2) return std::numeric_limits<double>::infinity();
    GridIndex index(pts);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto j = index.nearest(pts[i], [i](std::size_t k) { return k != i; });
        if (j) best = std::min(best, distance(pts[i], pts[*j]));
    }
    return best;
}

/// One hbar-slice: a finite set of distinct points.
class LatticeSample {
public:
    LatticeSample(double hbar, std::vector<Vec2> points,
                  double min_separation = default_min_separation)
        : hbar_(hbar), points_(std::move(points)) {
        if (!(hbar > 0.0) || !std::isfinite(hbar))
            throw InvalidArgument("hbar must be positive and finite");
        for (const Vec2& p : points_)
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw InvalidArgument("non-finite point in slice");
        if (min_pairwise_gap(points_) <= min_separation)
            throw InvalidArgument("slice at hbar=" + std::to_string(hbar) +
                                  " contains duplicate points");
    }

    double hbar() const { return hbar_; }
    std::span<const Vec2> points() const { return points_; }
    std::size_t size() const { return points_.size(); }

    friend bool operator==(const LatticeSample&, const LatticeSample&) = default;

private:
    double hbar_;
    std::vector<Vec2> points_;
};

/// A strictly decreasing hbar-sequence of slices over a common region.
class AsymptoticLattice {
public:
    AsymptoticLattice(Region region, std::vector<LatticeSample> samples)
        : region_(region), samples_(std::move(samples)) {
        if (samples_.empty()) throw InvalidArgument("asymptotic lattice needs at least one slice");
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (i > 0 && !(samples_[i].hbar() < samples_[i - 1].hbar()))
                throw InvalidArgument("slices must have strictly decreasing hbar");
            for (const Vec2& p : samples_[i].points())
                if (!region_.contains(p))
                    throw InvalidArgument("point outside region bounds in slice hbar=" +
                                          std::to_string(samples_[i].hbar()));
        }
    }

    const Region& region() const { return region_; }
    std::span<const LatticeSample> samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    const LatticeSample& operator[](std::size_t i) const { return samples_[i]; }

    /// The admissible hbar-set actually used, in slice order.
    std::vector<double> hbar_set() const {
        std::vector<double> out;
        for (const auto& s : samples_) out.push_back(s.hbar());
        return out;
    }

    friend bool operator==(const AsymptoticLattice&, const AsymptoticLattice&) = default;

private:
    Region region_;
    std::vector<LatticeSample> samples_;
};

struct LabelEntry {
    Vec2 point;
    Label k;
    friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Assignment of distinct integer labels to the points of one slice.
///
/// Orientation (det(l10 - l00, l01 - l00) > 0) is a property of engine output, checked by
/// `orientation_det`; ground-truth maps of orientation-reversing charts legitimately violate it.
class LabelMap {
public:
    LabelMap(double hbar, std::vector<LabelEntry> entries) : hbar_(hbar), entries_(std::move(entries)) {
        if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto [it, inserted] = by_label_.emplace(entries_[i].k, i);
            if (!inserted)
                throw InvalidArgument("label (" + std::to_string(entries_[i].k.k1) + "," +
                                      std::to_string(entries_[i].k.k2) + ") assigned twice");
        }
    }

    double hbar() const { return hbar_; }
    std::span<const LabelEntry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    std::optional<Vec2> at(Label k) const {
        const auto it = by_label_.find(k);
        if (it == by_label_.end()) return std::nullopt;
        return entries_[it->second].point;
    }

    /// The point labelled (0,0), if any.
    std::optional<Vec2> basepoint() const { return at({0, 0}); }

    /// Determinant of frame(): det(l10 - l00, l01 - l00) in the usual case.
    std::optional<double> orientation_det() const {
        const auto f = frame();
        if (!f) return std::nullopt;
        return f->det();
    }

    /// Columns l_{k+(1,0)} - l_k and l_{k+(0,1)} - l_k for k = (0,0). When that triple is
    /// incomplete, k is the label closest to the origin (L1 norm, then lex) that has one.
    std::optional<Mat2> frame() const {
        auto triple = [&](Label k) -> std::optional<Mat2> {
            const auto p = at(k), px = at(k + Label{1, 0}), py = at(k + Label{0, 1});
            if (!p || !px || !py) return std::nullopt;
            return Mat2::from_columns(*px - *p, *py - *p);
        };
        if (auto f = triple({0, 0})) return f;
        std::optional<Label> best;
        auto l1 = [](Label k) { return std::abs(k.k1) + std::abs(k.k2); };
        for (const auto& e : entries_) {
            if (best && (l1(e.k) > l1(*best) || (l1(e.k) == l1(*best) && !(e.k < *best)))) continue;
            if (triple(e.k)) best = e.k;
        }
        if (!best) return std::nullopt;
        return triple(*best);
    }

    /// Relabels every entry by k -> M k + t.
    LabelMap transformed(const Witness& w) const {
        std::vector<LabelEntry> out(entries_.begin(), entries_.end());
        for (auto& e : out) e.k = w.apply(e.k);
        return LabelMap(hbar_, std::move(out));
    }

    friend bool operator==(const LabelMap& a, const LabelMap& b) {
        return a.hbar_ == b.hbar_ && a.entries_ == b.entries_;
    }

private:
    double hbar_;
    std::vector<LabelEntry> entries_;
    std::map<Label, std::size_t> by_label_;
};

/// How a slice of a linear labelling was matched to its predecessor.
struct SequenceStep {
    IntMat2 correction;        // applied to the candidate labels of this slice
    double frame_drift = 0.0;  // lattice-unit deviation from the previous rescaled frame
    bool origin_aligned = false;
    Label origin_offset;  // label of this slice's basepoint in the previous slice's frame
    friend bool operator==(const SequenceStep&, const SequenceStep&) = default;
};

/// Coherent label maps across an hbar-sequence; labels are meaningful modulo origin.
///
/// Final labels are convention * correction_j * (candidate labels of slice j).
struct LinearLabelling {
    std::vector<LabelMap> maps;
    std::vector<SequenceStep> steps;  // parallel to maps; steps[0] is the identity
    IntMat2 convention;               // common basis change applied after correction
    std::vector<std::string> warnings;

    friend bool operator==(const LinearLabelling&, const LinearLabelling&) = default;
};

/// Truncated jet G_hbar = G_0 + hbar G_1 + ... + hbar^J G_J on a rectangle U.
class ChartJet {
public:
    ChartJet(Rect domain, std::vector<PolyMap2> terms, int check_grid = 21)
        : domain_(domain), terms_(std::move(terms)) {
        if (terms_.empty()) throw InvalidArgument("chart jet needs at least the G0 term");
        if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
            throw InvalidArgument("chart domain must have positive area");
        int sign = 0;
        for (int i = 0; i < check_grid; ++i) {
            for (int j = 0; j < check_grid; ++j) {
                const Vec2 p{domain.min.x + domain.width() * i / (check_grid - 1),
                             domain.min.y + domain.height() * j / (check_grid - 1)};
                const double dt = terms_[0].jacobian(p).det();
                const int s = dt > 0 ? 1 : (dt < 0 ? -1 : 0);
                if (s == 0 || (sign != 0 && s != sign))
                    throw InvalidArgument("G0 Jacobian vanishes on the chart domain");
                sign = s;
            }
        }
    }

    const Rect& domain() const { return domain_; }
    int order() const { return static_cast<int>(terms_.size()) - 1; }
    std::span<const PolyMap2> terms() const { return terms_; }
    const PolyMap2& term(int i) const { return terms_.at(static_cast<std::size_t>(i)); }

    /// G_hbar(x) = sum_i hbar^i G_i(x).
    Vec2 operator()(double hbar, Vec2 x) const {
        Vec2 r;
        double h = 1.0;
        for (const auto& g : terms_) {
            r = r + h * g(x);
            h *= hbar;
        }
        return r;
    }

    Mat2 jacobian0(Vec2 x) const { return terms_[0].jacobian(x); }

    friend bool operator==(const ChartJet&, const ChartJet&) = default;

private:
    Rect domain_;
    std::vector<PolyMap2> terms_;
};

// ---------------------------------------------------------------------------
// Label-map equivalence

namespace detail {

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) { return std::gcd(a, b); }

/// Unimodular matrix with first column (p, q), det +1. Requires gcd(p, q) = 1.
inline IntMat2 complete_primitive(Label u) {
    // Extended Euclid: p*s - q*r = 1.
    std::int64_t old_r = u.k1, r = u.k2, old_s = 1, s = 0, old_t = 0, t = 1;
    while (r != 0) {
        const std::int64_t qt = old_r / r;
        std::tie(old_r, r) = std::make_pair(r, old_r - qt * r);
        std::tie(old_s, s) = std::make_pair(s, old_s - qt * s);
        std::tie(old_t, t) = std::make_pair(t, old_t - qt * t);
    }
    // old_s * p + old_t * q = old_r = +-1
    const std::int64_t sg = old_r;
    // Choose column (r0, s0) with p*s0 - q*r0 = 1: s0 = old_s*sg, r0 = -old_t*sg.
    return {u.k1, -old_t * sg, u.k2, old_s * sg};
}

}  // namespace detail

/// Finds (M, t) with det M = +-1 and b = M a + t for every pair, if one exists.
/// When the labels span a rank-deficient set, a det +1 completion is returned.
inline std::optional<Witness> solve_witness(std::span<const std::pair<Label, Label>> pairs) {
    if (pairs.empty()) return Witness{IntMat2::identity(), {0, 0}};
    const Label a0 = pairs[0].first, b0 = pairs[0].second;
    auto check = [&](const IntMat2& m) -> std::optional<Witness> {
        const Witness w{m, b0 - m * a0};
        for (const auto& [a, b] : pairs)
            if (w.apply(a) != b) return std::nullopt;
        return w;
    };

    std::optional<std::size_t> first;
    std::optional<std::size_t> second;
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        const Label d = pairs[i].first - a0;
        if (d == Label{0, 0}) continue;
        if (!first) {
            first = i;
            continue;
        }
        const Label f = pairs[*first].first - a0;
        if (f.k1 * d.k2 - f.k2 * d.k1 != 0) {
            second = i;
            break;
        }
    }
    if (!first) return check(IntMat2::identity());

    if (!second) {
        // Rank one: every difference is s_i * u for a primitive u.
        const Label f = pairs[*first].first - a0;
        const std::int64_t g = std::abs(detail::gcd64(f.k1, f.k2));
        const Label u{f.k1 / g, f.k2 / g};
        std::optional<Label> v;
        std::int64_t best_s = 0;
        for (const auto& [a, b] : pairs) {
            const Label da = a - a0, db = b - b0;
            const std::int64_t s = u.k1 != 0 ? da.k1 / u.k1 : da.k2 / u.k2;
            if (s == 0) continue;
            if (db.k1 % s != 0 || db.k2 % s != 0) return std::nullopt;
            if (!v || std::abs(s) < std::abs(best_s)) {
                v = Label{db.k1 / s, db.k2 / s};
                best_s = s;
            }
        }
        if (!v || std::gcd(v->k1, v->k2) != 1) return std::nullopt;
        const IntMat2 uu = detail::complete_primitive(u);
        const IntMat2 vv = detail::complete_primitive(*v);
        return check(vv * uu.unimodular_inverse());
    }

    const Label da1 = pairs[*first].first - a0, da2 = pairs[*second].first - a0;
    const Label db1 = pairs[*first].second - b0, db2 = pairs[*second].second - b0;
    // M [da1 da2] = [db1 db2]  =>  M = DB adj(DA) / det(DA).
    const std::int64_t det = da1.k1 * da2.k2 - da2.k1 * da1.k2;
    const IntMat2 adj{da2.k2, -da2.k1, -da1.k2, da1.k1};
    const IntMat2 db{db1.k1, db2.k1, db1.k2, db2.k2};
    const IntMat2 num = db * adj;
    if (num.a % det || num.b % det || num.c % det || num.d % det) return std::nullopt;
    const IntMat2 m{num.a / det, num.b / det, num.c / det, num.d / det};
    if (std::abs(m.det()) != 1) return std::nullopt;
    return check(m);
}

struct EquivalenceResult {
    bool equivalent = false;
    bool reflected = false;  // matched only by an orientation-reversing M
    std::optional<Witness> witness;
    std::size_t matched_points = 0;
};

/// Pairs (label in a, label in b) for points of `a` and `b` that coincide within `tol`.
/// Throws StructuralMismatch unless the two point sets match one to one.
inline std::vector<std::pair<Label, Label>> match_label_maps(const LabelMap& a, const LabelMap& b,
                                                             double tol) {
    if (a.hbar() != b.hbar())
        throw StructuralMismatch("label maps belong to different hbar values");
    if (a.size() != b.size())
        throw StructuralMismatch("label maps cover " + std::to_string(a.size()) + " and " +
                                 std::to_string(b.size()) + " points");
    std::vector<Vec2> bpts;
    bpts.reserve(b.size());
    for (const auto& e : b.entries()) bpts.push_back(e.point);
    GridIndex index(bpts);
    std::vector<std::pair<Label, Label>> pairs;
    pairs.reserve(a.size());
    for (const auto& e : a.entries()) {
        const auto j = index.nearest(e.point);
        if (!j || distance(e.point, bpts[*j]) > tol)
            throw StructuralMismatch("point (" + std::to_string(e.point.x) + ", " +
                                     std::to_string(e.point.y) + ") has no counterpart");
        index.remove(*j);
        pairs.emplace_back(e.k, b.entries()[*j].k);
    }
    return pairs;
}

/// Whether b = M a + t on the common point set for some M with det M = +1.
inline EquivalenceResult labelling_equivalent(const LabelMap& a, const LabelMap& b, double tol) {
    const auto pairs = match_label_maps(a, b, tol);
    EquivalenceResult r;
    r.matched_points = pairs.size();
    const auto w = solve_witness(pairs);
    if (!w) return r;
    if (w->matrix.det() == 1) {
        r.equivalent = true;
        r.witness = w;
    } else {
        r.reflected = true;
        r.witness = w;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Lattice diagnostics

struct SliceDiagnostics {
    double hbar = 0.0;
    std::size_t point_count = 0;
    std::size_t working_count = 0;  // points inside B0
    double min_gap = 0.0;
    double gap_ratio = 0.0;  // min_gap / hbar
    bool well_spaced = false;
};

inline std::vector<SliceDiagnostics> validate_lattice(const AsymptoticLattice& lattice,
                                                      double min_gap_ratio) {
    std::vector<SliceDiagnostics> out;
    for (const auto& s : lattice.samples()) {
        SliceDiagnostics d;
        d.hbar = s.hbar();
        d.point_count = s.size();
        d.working_count = static_cast<std::size_t>(std::count_if(
            s.points().begin(), s.points().end(),
            [&](Vec2 p) { return lattice.region().in_working(p); }));
        d.min_gap = min_pairwise_gap(s.points());
        d.gap_ratio = d.min_gap / s.hbar();
        d.well_spaced = d.min_gap >= min_gap_ratio * s.hbar();
        out.push_back(d);
    }
    return out;
}

}  // namespace asylat
