#pragma once

// Labelling of asymptotic lattices.
//
// label_single walks one slice outwards from the point nearest to an anchor c:
// the first row by extrapolating lambda_{k-1} + (lambda_{k-1} - lambda_{k-2}),
// then row after row, seeding each row from the column through lambda_{0,0}.
// A final k1 -> -k1 flip makes every output positively oriented.
//
// label_sequence labels every slice independently and then matches each slice to
// its predecessor by the unimodular change of basis that best aligns the two
// 1/hbar-rescaled frames.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/geometry.hpp"
#include "asylat/lattice_model.hpp"
#include "asylat/spatial_index.hpp"

namespace asylat {

enum class TieBreak { lex_smallest };

struct LabellingConfig {
    /// Anchor c; defaults to the centre of the working region.
    std::optional<Vec2> anchor;
    TieBreak tie_break = TieBreak::lex_smallest;
    /// Caps on |k2| and |k1|.
    std::optional<int> max_rows;
    std::optional<int> max_cols;
    NeighborIndexKind neighbor_index = NeighborIndexKind::grid_bucket;
    /// A claim is rejected when the candidate is farther from the extrapolated target
    /// than this fraction of the current step length.
    double rejection_fraction = 0.5;
    /// Candidates for (0,1) within this angle of the first row are skipped.
    double collinear_angle = 1e-6;
};

/// Basis convention applied to a whole linear labelling once the slices are coherent.
enum class FrameConvention {
    /// Keep the basis found on the first slice.
    as_labelled,
    /// k2 runs along the lattice direction closest to the second spectral axis (pointing
    /// up); k1 completes a positive basis and is reduced against k2 so that its component
    /// along k2 lies in (-1/2, 1/2] of the k2 length.
    action_aligned,
};

struct SequenceConfig {
    /// Minimum admissible ratio hbar_{j+1} / hbar_j.
    double density_ratio = 0.5;
    /// Shared points near the anchor required before origins are aligned.
    int overlap_min = 3;
    /// Largest accepted frame drift between consecutive slices, in lattice units.
    double coherence_tol = 0.5;
    /// Two points of consecutive slices are shared when closer than hbar^origin_order.
    int origin_order = 3;
    /// Entry bound for the unimodular correction search.
    int max_entry = 2;
    FrameConvention convention = FrameConvention::action_aligned;
};

struct SingleLabelTrace {
    LabelMap map;
    std::size_t queries = 0;  // nearest-neighbour queries issued
    bool flipped = false;     // orientation fix applied
    std::size_t unlabelled = 0;
};

namespace detail {

template <class Index>
class SliceWalker {
public:
    SliceWalker(const LatticeSample& sample, const Region& region, const LabellingConfig& cfg)
        : pts_(sample.points()), working_(region.working()), cfg_(cfg), index_(pts_) {}

    SingleLabelTrace run(Vec2 anchor, double hbar) {
        const auto i00 = index_.nearest(anchor);
        claim({0, 0}, *i00);
        const auto i10 = index_.nearest(at({0, 0}));
        if (!i10) throw InsufficientData("slice has a single point");
        claim({1, 0}, *i10);
        label_row(0);

        const Vec2 p00 = at({0, 0});
        const Vec2 row_dir = at({1, 0}) - p00;
        const double sin_eps = std::sin(cfg_.collinear_angle);
        const auto i01 = index_.nearest(p00, [&](std::size_t i) {
            const Vec2 u = pts_[i] - p00;
            return std::abs(cross(u, row_dir)) > sin_eps * norm(u) * norm(row_dir);
        });
        if (!i01) throw InsufficientData("no point off the first row");
        if (!within_caps({0, 1})) throw InsufficientData("row cap excludes the (0,1) label");
        claim({0, 1}, *i01);

        // Upward rows.
        label_row(1);
        for (std::int64_t r = 1;; ++r) {
            if (!seed_column(r + 1, r, r - 1)) break;
            label_row(r + 1);
        }
        // Downward rows.
        if (seed_column(-1, 0, 1)) {
            label_row(-1);
            for (std::int64_t r = -1;; --r) {
                if (!seed_column(r - 1, r, r + 1)) break;
                label_row(r - 1);
            }
        }

        SingleLabelTrace trace{LabelMap(hbar, {}), index_.query_count(), false, 0};
        const double det = cross(at({1, 0}) - p00, at({0, 1}) - p00);
        trace.flipped = det < 0;
        std::vector<LabelEntry> entries;
        entries.reserve(claimed_.size());
        for (const auto& [k, i] : claimed_)
            entries.push_back({pts_[i], trace.flipped ? Label{-k.k1, k.k2} : k});
        std::sort(entries.begin(), entries.end(),
                  [](const LabelEntry& a, const LabelEntry& b) { return a.k < b.k; });
        trace.map = LabelMap(hbar, std::move(entries));
        trace.unlabelled = index_.alive_count();
        return trace;
    }

private:
    Vec2 at(Label k) const { return pts_[claimed_.at(k)]; }
    bool has(Label k) const { return claimed_.count(k) != 0; }

    void claim(Label k, std::size_t i) {
        claimed_.emplace(k, i);
        index_.remove(i);
    }

    bool within_caps(Label k) const {
        if (cfg_.max_cols && std::abs(k.k1) > *cfg_.max_cols) return false;
        if (cfg_.max_rows && std::abs(k.k2) > *cfg_.max_rows) return false;
        return true;
    }

    /// Claims the point nearest to `target` as `k`, unless the target leaves B0, the pool
    /// is empty, or the nearest candidate lies beyond the rejection radius.
    bool try_claim(Label k, Vec2 target, double step_len) {
        if (!within_caps(k) || !working_.contains(target)) return false;
        const auto i = index_.nearest(target);
        if (!i) return false;
        if (distance(pts_[*i], target) > cfg_.rejection_fraction * step_len) return false;
        claim(k, *i);
        return true;
    }

    /// Extrapolates along a row from two consecutive labels until the walk stops.
    void extend(Label prev, Label cur, std::int64_t dir) {
        while (true) {
            const Vec2 step = at(cur) - at(prev);
            const Label next{cur.k1 + dir, cur.k2};
            if (!try_claim(next, at(cur) + step, norm(step))) return;
            prev = cur;
            cur = next;
        }
    }

    /// Step along row r: taken from the adjacent row nearer to k2 = 0 when available.
    Vec2 row_step(std::int64_t r) const {
        const std::int64_t toward = r > 0 ? r - 1 : r + 1;
        if (r != 0 && has({1, toward}) && has({0, toward})) return at({1, toward}) - at({0, toward});
        return at({1, 0}) - at({0, 0});
    }

    /// Labels row r in both directions, starting from lambda_{0,r}.
    void label_row(std::int64_t r) {
        const Label origin{0, r};
        if (r != 0) {
            const Vec2 d = row_step(r);
            if (try_claim({1, r}, at(origin) + d, norm(d))) extend(origin, {1, r}, +1);
        } else {
            extend(origin, {1, 0}, +1);
        }
        const Vec2 d = has({1, r}) ? at({1, r}) - at(origin) : row_step(r);
        if (try_claim({-1, r}, at(origin) - d, norm(d))) extend(origin, {-1, r}, -1);
    }

    /// Claims lambda_{0,next} near 2 lambda_{0,cur} - lambda_{0,prev}.
    bool seed_column(std::int64_t next, std::int64_t cur, std::int64_t prev) {
        if (!has({0, cur}) || !has({0, prev})) return false;
        const Vec2 step = at({0, cur}) - at({0, prev});
        return try_claim({0, next}, at({0, cur}) + step, norm(step));
    }

    std::span<const Vec2> pts_;
    Rect working_;
    const LabellingConfig& cfg_;
    Index index_;
    std::map<Label, std::size_t> claimed_;
};

}  // namespace detail

/// Labels one slice; also reports the number of nearest-neighbour queries.
inline SingleLabelTrace label_single_traced(const LatticeSample& sample, const Region& region,
                                            const LabellingConfig& cfg = {}) {
    const Rect working = region.working();
    const Vec2 anchor = cfg.anchor.value_or(working.center());
    if (!working.contains(anchor)) throw InvalidArgument("anchor lies outside the working region");
    if (!(cfg.rejection_fraction > 0.0)) throw InvalidArgument("rejection_fraction must be positive");
    const auto inside = std::count_if(sample.points().begin(), sample.points().end(),
                                      [&](Vec2 p) { return working.contains(p); });
    if (inside < 4)
        throw InsufficientData("slice at hbar=" + std::to_string(sample.hbar()) + " has " +
                               std::to_string(inside) + " points in the working region (need 4)");
    if (cfg.neighbor_index == NeighborIndexKind::kd)
        return detail::SliceWalker<KdIndex>(sample, region, cfg).run(anchor, sample.hbar());
    return detail::SliceWalker<GridIndex>(sample, region, cfg).run(anchor, sample.hbar());
}

inline LabelMap label_single(const LatticeSample& sample, const Region& region,
                             const LabellingConfig& cfg = {}) {
    return label_single_traced(sample, region, cfg).map;
}

/// Every matrix with entries in [-bound, bound] and determinant +1, in a fixed order.
inline std::vector<IntMat2> special_linear_candidates(int bound) {
    std::vector<IntMat2> out;
    for (int a = -bound; a <= bound; ++a)
        for (int b = -bound; b <= bound; ++b)
            for (int c = -bound; c <= bound; ++c)
                for (int d = -bound; d <= bound; ++d)
                    if (a * d - b * c == 1) out.push_back({a, b, c, d});
    return out;
}

/// 1/hbar-rescaled frame (l10 - l00, l01 - l00) of a label map.
inline std::optional<Mat2> rescaled_frame(const LabelMap& m) {
    auto f = m.frame();
    if (!f) return std::nullopt;
    const double s = 1.0 / m.hbar();
    return Mat2{f->a * s, f->b * s, f->c * s, f->d * s};
}

struct FrameMatch {
    IntMat2 correction;
    double drift = 0.0;
};

/// Best M (det +1, bounded entries) such that frame * M^-1 matches `reference`.
/// Drift is max |reference^-1 frame M^-1 - I|, i.e. measured in lattice units.
inline FrameMatch match_frames(const Mat2& reference, const Mat2& frame, int bound) {
    const auto ref_inv = reference.inverse();
    if (!ref_inv) throw InvalidArgument("degenerate reference frame");
    FrameMatch best{IntMat2::identity(), std::numeric_limits<double>::infinity()};
    for (const IntMat2& m : special_linear_candidates(bound)) {
        const Mat2 moved = frame * m.unimodular_inverse().to_real();
        const double drift = ((*ref_inv) * moved - Mat2::identity()).max_abs();
        if (drift < best.drift) best = {m, drift};
    }
    return best;
}

/// Relabelling k -> M k that puts `frame` (columns = lattice basis) in the
/// action-aligned convention. Searches primitive vectors with coefficients up to `bound`.
inline IntMat2 action_aligned_change(const Mat2& frame, int bound = 3) {
    std::optional<Label> best;
    double best_score = 0.0, best_len = 0.0;
    for (int p = -bound; p <= bound; ++p) {
        for (int q = -bound; q <= bound; ++q) {
            if (std::gcd(p, q) != 1) continue;
            const Vec2 v = frame * Vec2{static_cast<double>(p), static_cast<double>(q)};
            const double len = norm(v);
            const double score = std::abs(v.x) / len;
            if (!best || score < best_score || (score == best_score && len < best_len)) {
                best = Label{p, q};
                best_score = score;
                best_len = len;
            }
        }
    }
    Label vc = *best;
    if ((frame * to_vec(vc)).y < 0) vc = -vc;
    // Complete to a det +1 basis [u v] in the old label coordinates: r q - p s = 1.
    const IntMat2 c = detail::complete_primitive(vc);  // first column vc, det +1
    Label uc{-c.b, -c.d};                              // det [u v] = det [v -c1]... = +1
    const Vec2 v = frame * to_vec(vc);
    const Vec2 u = frame * to_vec(uc);
    const double mu = dot(u, v) / dot(v, v);
    const auto m = static_cast<std::int64_t>(std::ceil(mu - 0.5));
    uc = uc - Label{m * vc.k1, m * vc.k2};
    const IntMat2 basis{uc.k1, vc.k1, uc.k2, vc.k2};  // columns: new basis in old labels
    return basis.unimodular_inverse();
}

/// Inductive correction of independently labelled slices into a linear labelling.
inline LinearLabelling correct_sequence(std::vector<LabelMap> candidates, const SequenceConfig& scfg) {
    LinearLabelling out;
    if (candidates.empty()) return out;
    std::optional<Mat2> prev_frame;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        LabelMap& cand = candidates[j];
        const auto frame = rescaled_frame(cand);
        if (!frame) {
            if (j == 0) throw SequenceBreak(cand.hbar(), cand.hbar(), "first slice lacks a basis");
            throw SequenceBreak(candidates[j - 1].hbar(), cand.hbar(), "slice lacks a basis");
        }
        SequenceStep step;
        if (j == 0) {
            out.maps.push_back(std::move(cand));
            out.steps.push_back(step);
            prev_frame = frame;
            continue;
        }
        const FrameMatch fm = match_frames(*prev_frame, *frame, scfg.max_entry);
        if (!(fm.drift <= scfg.coherence_tol)) {
            std::ostringstream why;
            why << "no unimodular match within tolerance (best drift " << fm.drift << ")";
            throw SequenceBreak(candidates[j - 1].hbar(), cand.hbar(), why.str());
        }
        step.correction = fm.correction;
        step.frame_drift = fm.drift;
        prev_frame = (*frame) * fm.correction.unimodular_inverse().to_real();
        LabelMap corrected = cand.transformed({fm.correction, {0, 0}});

        // Origin alignment through points shared with the previous slice.
        const LabelMap& prev = out.maps.back();
        const double share_tol = std::pow(corrected.hbar(), scfg.origin_order);
        std::vector<Vec2> prev_pts;
        for (const auto& e : prev.entries()) prev_pts.push_back(e.point);
        GridIndex prev_index(prev_pts);
        const double ratio = prev.hbar() / corrected.hbar();
        std::optional<Label> offset;
        bool consistent = true;
        int shared = 0;
        const Vec2 base = *corrected.basepoint();
        const double near = 3.0 * std::max(norm(prev_frame->col0()), norm(prev_frame->col1())) *
                            prev.hbar();
        for (const auto& e : corrected.entries()) {
            if (distance(e.point, base) > near) continue;
            const auto i = prev_index.nearest(e.point);
            if (!i || distance(prev_pts[*i], e.point) > share_tol) continue;
            const Label kq = prev.entries()[*i].k;
            const double tx = ratio * static_cast<double>(kq.k1) - static_cast<double>(e.k.k1);
            const double ty = ratio * static_cast<double>(kq.k2) - static_cast<double>(e.k.k2);
            const Label t{std::llround(tx), std::llround(ty)};
            if (std::abs(tx - static_cast<double>(t.k1)) > 0.1 ||
                std::abs(ty - static_cast<double>(t.k2)) > 0.1 || (offset && *offset != t))
                consistent = false;
            offset = t;
            ++shared;
        }
        if (consistent && offset && shared >= scfg.overlap_min) {
            step.origin_aligned = true;
            step.origin_offset = *offset;
        }
        out.maps.push_back(std::move(corrected));
        out.steps.push_back(step);
    }
    if (scfg.convention == FrameConvention::action_aligned) {
        const IntMat2 change = action_aligned_change(*prev_frame);
        out.convention = change;
        if (!change.is_identity()) {
            for (auto& m : out.maps) m = m.transformed({change, {0, 0}});
            for (auto& st : out.steps) st.origin_offset = change * st.origin_offset;
        }
    }
    return out;
}

/// Labels every slice and makes consecutive slices coherent.
inline LinearLabelling label_sequence(const AsymptoticLattice& lattice, const LabellingConfig& cfg = {},
                                      const SequenceConfig& scfg = {}) {
    if (!(scfg.density_ratio > 0.0 && scfg.density_ratio <= 1.0))
        throw InvalidArgument("density_ratio must lie in (0, 1]");
    std::vector<std::string> warnings;
    if (lattice.size() < 2) warnings.push_back("single slice: no sequence correction performed");
    for (std::size_t j = 1; j < lattice.size(); ++j) {
        const double r = lattice[j].hbar() / lattice[j - 1].hbar();
        if (r < scfg.density_ratio) {
            std::ostringstream w;
            w << "hbar ratio " << r << " between " << lattice[j - 1].hbar() << " and "
              << lattice[j].hbar() << " is below density_ratio " << scfg.density_ratio;
            warnings.push_back(w.str());
        }
    }
    std::vector<LabelMap> candidates;
    candidates.reserve(lattice.size());
    for (const auto& s : lattice.samples()) candidates.push_back(label_single(s, lattice.region(), cfg));
    LinearLabelling out = correct_sequence(std::move(candidates), scfg);
    out.warnings.insert(out.warnings.begin(), warnings.begin(), warnings.end());
    return out;
}

}  // namespace asylat
