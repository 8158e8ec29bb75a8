#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/geometry.hpp"

namespace asylat {

enum class NeighborIndexKind { grid_bucket, kd };

inline std::string_view to_string(NeighborIndexKind k) {
    return k == NeighborIndexKind::kd ? "kd" : "grid_bucket";
}

namespace detail {

struct AcceptAll {
    constexpr bool operator()(std::size_t) const { return true; }
};

/// Running best candidate: smallest squared distance, ties by lexicographic (x, y).
struct NearestBest {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double d2 = std::numeric_limits<double>::infinity();

    bool found() const { return index != std::numeric_limits<std::size_t>::max(); }

    void offer(std::size_t i, double cand_d2, std::span<const Vec2> pts) {
        if (cand_d2 < d2 || (cand_d2 == d2 && found() && lex_less(pts[i], pts[index]))) {
            index = i;
            d2 = cand_d2;
        }
    }
};

}  // namespace detail

/// Uniform bucket grid over a fixed point set, with point removal.
///
/// Every call to nearest() counts as one query, whether or not it finds a point.
class GridIndex {
public:
    explicit GridIndex(std::span<const Vec2> points)
        : pts_(points.begin(), points.end()), alive_(points.size(), 1) {
        if (pts_.empty()) {
            nx_ = ny_ = 1;
            cell_ = 1.0;
            buckets_.resize(1);
            bucket_alive_.assign(1, 0);
            return;
        }
        Vec2 lo = pts_[0], hi = pts_[0];
        for (const Vec2& p : pts_) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
        }
        origin_ = lo;
        const double w = hi.x - lo.x, h = hi.y - lo.y;
        const double n = static_cast<double>(pts_.size());
        if (w > 0 && h > 0)
            cell_ = std::sqrt(w * h / n);
        else
            cell_ = std::max(w, h) / n;
        if (!(cell_ > 0)) cell_ = 1.0;
        nx_ = static_cast<std::int64_t>(std::floor(w / cell_)) + 1;
        ny_ = static_cast<std::int64_t>(std::floor(h / cell_)) + 1;
        buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
        bucket_alive_.assign(buckets_.size(), 0);
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            const auto c = cell_of(pts_[i]);
            const auto b = bucket(clamp_x(c.first), clamp_y(c.second));
            buckets_[b].push_back(i);
            ++bucket_alive_[b];
        }
        alive_count_ = pts_.size();
    }

    std::size_t size() const { return pts_.size(); }
    std::size_t alive_count() const { return alive_count_; }
    bool alive(std::size_t i) const { return alive_[i] != 0; }
    std::size_t query_count() const { return queries_; }
    std::span<const Vec2> points() const { return pts_; }

    void remove(std::size_t i) {
        if (!alive_[i]) return;
        alive_[i] = 0;
        --alive_count_;
        const auto c = cell_of(pts_[i]);
        --bucket_alive_[bucket(clamp_x(c.first), clamp_y(c.second))];
    }

    template <class Filter = detail::AcceptAll>
    std::optional<std::size_t> nearest(Vec2 target, Filter&& keep = {}) {
        ++queries_;
        if (alive_count_ == 0) return std::nullopt;
        const auto [tx, ty] = cell_of(target);
        const std::int64_t r_start =
            std::max<std::int64_t>({0, -tx, tx - (nx_ - 1), -ty, ty - (ny_ - 1)});
        const std::int64_t r_end =
            std::max({std::abs(tx), std::abs(tx - (nx_ - 1)), std::abs(ty), std::abs(ty - (ny_ - 1))});
        detail::NearestBest best;
        for (std::int64_t r = r_start; r <= r_end; ++r) {
            if (best.found() && r >= 1) {
                const double lb = static_cast<double>(r - 1) * cell_;
                if (lb * lb > best.d2) break;
            }
            visit_ring(tx, ty, r, [&](std::size_t b) {
                if (bucket_alive_[b] == 0) return;
                for (std::size_t i : buckets_[b]) {
                    if (!alive_[i] || !keep(i)) continue;
                    best.offer(i, norm2(pts_[i] - target), pts_);
                }
            });
        }
        if (!best.found()) return std::nullopt;
        return best.index;
    }

private:
    std::pair<std::int64_t, std::int64_t> cell_of(Vec2 p) const {
        const double fx = std::floor((p.x - origin_.x) / cell_);
        const double fy = std::floor((p.y - origin_.y) / cell_);
        constexpr double lim = 1e15;
        return {static_cast<std::int64_t>(std::clamp(fx, -lim, lim)),
                static_cast<std::int64_t>(std::clamp(fy, -lim, lim))};
    }
    std::int64_t clamp_x(std::int64_t x) const { return std::clamp<std::int64_t>(x, 0, nx_ - 1); }
    std::int64_t clamp_y(std::int64_t y) const { return std::clamp<std::int64_t>(y, 0, ny_ - 1); }
    std::size_t bucket(std::int64_t x, std::int64_t y) const {
        return static_cast<std::size_t>(y * nx_ + x);
    }

    template <class Visit>
    void visit_ring(std::int64_t tx, std::int64_t ty, std::int64_t r, Visit&& visit) const {
        const std::int64_t x0 = std::max<std::int64_t>(tx - r, 0);
        const std::int64_t x1 = std::min<std::int64_t>(tx + r, nx_ - 1);
        const std::int64_t y0 = std::max<std::int64_t>(ty - r, 0);
        const std::int64_t y1 = std::min<std::int64_t>(ty + r, ny_ - 1);
        if (x0 > x1 || y0 > y1) return;
        if (r == 0) {
            visit(bucket(tx, ty));
            return;
        }
        if (ty - r >= 0)
            for (std::int64_t x = x0; x <= x1; ++x) visit(bucket(x, ty - r));
        if (ty + r <= ny_ - 1)
            for (std::int64_t x = x0; x <= x1; ++x) visit(bucket(x, ty + r));
        const std::int64_t ys = std::max(y0, ty - r + 1), ye = std::min(y1, ty + r - 1);
        if (tx - r >= 0)
            for (std::int64_t y = ys; y <= ye; ++y) visit(bucket(tx - r, y));
        if (tx + r <= nx_ - 1)
            for (std::int64_t y = ys; y <= ye; ++y) visit(bucket(tx + r, y));
    }

    std::vector<Vec2> pts_;
    std::vector<std::uint8_t> alive_;
    std::size_t alive_count_ = 0;
    Vec2 origin_;
    double cell_ = 1.0;
    std::int64_t nx_ = 1, ny_ = 1;
    std::vector<std::vector<std::size_t>> buckets_;
    std::vector<std::size_t> bucket_alive_;
    std::size_t queries_ = 0;
};

/// Static 2-d tree with per-subtree live counts, so removed points are pruned.
class KdIndex {
public:
    explicit KdIndex(std::span<const Vec2> points)
        : pts_(points.begin(), points.end()),
          alive_(points.size(), 1),
          leaf_of_(points.size(), 0),
          perm_(points.size()) {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        alive_count_ = pts_.size();
        if (!pts_.empty()) build(0, pts_.size(), npos);
    }

    std::size_t size() const { return pts_.size(); }
    std::size_t alive_count() const { return alive_count_; }
    bool alive(std::size_t i) const { return alive_[i] != 0; }
    std::size_t query_count() const { return queries_; }
    std::span<const Vec2> points() const { return pts_; }

    void remove(std::size_t i) {
        if (!alive_[i]) return;
        alive_[i] = 0;
        --alive_count_;
        for (std::size_t n = leaf_of_[i]; n != npos; n = nodes_[n].parent) --nodes_[n].live;
    }

    template <class Filter = detail::AcceptAll>
    std::optional<std::size_t> nearest(Vec2 target, Filter&& keep = {}) {
        ++queries_;
        if (alive_count_ == 0) return std::nullopt;
        detail::NearestBest best;
        search(0, target, keep, best);
        if (!best.found()) return std::nullopt;
        return best.index;
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    static constexpr std::size_t leaf_size = 8;

    struct Node {
        Rect box;
        std::size_t begin = 0, end = 0;
        std::size_t left = npos, right = npos, parent = npos;
        std::size_t live = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end, std::size_t parent) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        Rect box{pts_[perm_[begin]], pts_[perm_[begin]]};
        for (std::size_t k = begin; k < end; ++k) {
            const Vec2 p = pts_[perm_[k]];
            box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y)};
            box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y)};
        }
        nodes_[id].box = box;
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        nodes_[id].parent = parent;
        nodes_[id].live = end - begin;
        if (end - begin <= leaf_size) {
            for (std::size_t k = begin; k < end; ++k) leaf_of_[perm_[k]] = id;
            return id;
        }
        const bool split_x = box.width() >= box.height();
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                         perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                         perm_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t i, std::size_t j) {
                             const Vec2 a = pts_[i], b = pts_[j];
                             return split_x ? (a.x < b.x || (a.x == b.x && a.y < b.y))
                                            : (a.y < b.y || (a.y == b.y && a.x < b.x));
                         });
        const std::size_t l = build(begin, mid, id);
        const std::size_t r = build(mid, end, id);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    static double box_d2(const Rect& b, Vec2 p) {
        const double dx = p.x < b.min.x ? b.min.x - p.x : (p.x > b.max.x ? p.x - b.max.x : 0.0);
        const double dy = p.y < b.min.y ? b.min.y - p.y : (p.y > b.max.y ? p.y - b.max.y : 0.0);
        return dx * dx + dy * dy;
    }

    template <class Filter>
    void search(std::size_t id, Vec2 target, Filter& keep, detail::NearestBest& best) const {
        const Node& n = nodes_[id];
        if (n.live == 0 || box_d2(n.box, target) > best.d2) return;
        if (n.left == npos) {
            for (std::size_t k = n.begin; k < n.end; ++k) {
                const std::size_t i = perm_[k];
                if (!alive_[i] || !keep(i)) continue;
                best.offer(i, norm2(pts_[i] - target), pts_);
            }
            return;
        }
        const double dl = box_d2(nodes_[n.left].box, target);
        const double dr = box_d2(nodes_[n.right].box, target);
        if (dl <= dr) {
            search(n.left, target, keep, best);
            search(n.right, target, keep, best);
        } else {
            search(n.right, target, keep, best);
            search(n.left, target, keep, best);
        }
    }

    std::vector<Vec2> pts_;
    std::vector<std::uint8_t> alive_;
    std::vector<std::size_t> leaf_of_;
    std::vector<std::size_t> perm_;
    std::vector<Node> nodes_;
    std::size_t alive_count_ = 0;
    std::size_t queries_ = 0;
};

}  // namespace asylat
