#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/lattice_model.hpp"

namespace asylat {

/// Finite surrogate for the O(hbar^inf) remainder: uniform noise in a disk of
/// radius amplitude * hbar^order.
struct NoiseModel {
    int order = 3;
    double amplitude = 1.0;
    std::uint64_t seed = 0;

    static NoiseModel none() { return {3, 0.0, 0}; }

    double radius(double hbar) const { return amplitude * std::pow(hbar, order); }

    void validate() const {
        if (order < 2) throw InvalidArgument("noise order must be >= 2");
        if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
            throw InvalidArgument("noise amplitude must be nonnegative");
    }
    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

struct GroundTruthSlice {
    double hbar = 0.0;
    std::vector<LabelEntry> entries;  // (generated point, true label)
    std::size_t dropped = 0;          // lattice points whose image left the region

    LabelMap label_map() const { return LabelMap(hbar, entries); }
    friend bool operator==(const GroundTruthSlice&, const GroundTruthSlice&) = default;
};

struct GroundTruth {
    ChartJet chart;
    std::vector<GroundTruthSlice> slices;
    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Per-slice stream derived from (seed, slice index).
inline std::mt19937_64 slice_rng(std::uint64_t seed, std::size_t slice) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(slice) + 1)));
}

/// Uniform sample in the closed disk of radius `cap`; the norm never exceeds `cap`.
inline Vec2 disk_sample(std::mt19937_64& rng, double cap) {
    const double u = unit_uniform(rng);
    const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
    if (cap == 0.0) return {};
    const double r = cap * std::sqrt(u);
    Vec2 v{r * std::cos(theta), r * std::sin(theta)};
    while (norm(v) > cap) v = (1.0 - 1e-15) * v;
    return v;
}

}  // namespace detail

/// Samples G_hbar(hbar k) + noise for every hbar k in the chart domain, keeping the
/// images that land in the region bounds.
inline std::pair<AsymptoticLattice, GroundTruth> generate(const ChartJet& chart, const Region& region,
                                                          std::span<const double> hbars,
                                                          const NoiseModel& noise) {
    noise.validate();
    if (hbars.empty()) throw InvalidArgument("hbar list is empty");
    for (std::size_t j = 1; j < hbars.size(); ++j)
        if (!(hbars[j] < hbars[j - 1])) throw InvalidArgument("hbar list must be strictly decreasing");

    const Rect& u = chart.domain();
    std::vector<LatticeSample> samples;
    GroundTruth truth{chart, {}};
    for (std::size_t j = 0; j < hbars.size(); ++j) {
        const double h = hbars[j];
        if (!(h > 0.0)) throw InvalidArgument("hbar values must be positive");
        auto rng = detail::slice_rng(noise.seed, j);
        const double cap = noise.radius(h);
        constexpr double slack = 1e-9;
        const auto k1lo = static_cast<std::int64_t>(std::ceil(u.min.x / h - slack));
        const auto k1hi = static_cast<std::int64_t>(std::floor(u.max.x / h + slack));
        const auto k2lo = static_cast<std::int64_t>(std::ceil(u.min.y / h - slack));
        const auto k2hi = static_cast<std::int64_t>(std::floor(u.max.y / h + slack));

        GroundTruthSlice gs;
        gs.hbar = h;
        std::vector<Vec2> pts;
        for (std::int64_t k1 = k1lo; k1 <= k1hi; ++k1) {
            for (std::int64_t k2 = k2lo; k2 <= k2hi; ++k2) {
                const Vec2 x{h * static_cast<double>(k1), h * static_cast<double>(k2)};
                if (!u.contains(x)) continue;
                const Vec2 p = chart(h, x) + detail::disk_sample(rng, cap);
                if (!region.contains(p)) {
                    ++gs.dropped;
                    continue;
                }
                pts.push_back(p);
                gs.entries.push_back({p, {k1, k2}});
            }
        }
        if (pts.empty()) throw DegenerateSlice(h);
        samples.emplace_back(h, std::move(pts));
        truth.slices.push_back(std::move(gs));
    }
    return {AsymptoticLattice(region, std::move(samples)), std::move(truth)};
}

enum class ModelKind { harmonic_pair, shear, polar_action };

inline std::string_view to_string(ModelKind m) {
    switch (m) {
        case ModelKind::harmonic_pair: return "harmonic_pair";
        case ModelKind::shear: return "shear";
        case ModelKind::polar_action: return "polar_action";
    }
    return "?";
}

inline ModelKind model_from_name(std::string_view name) {
    if (name == "harmonic_pair") return ModelKind::harmonic_pair;
    if (name == "shear") return ModelKind::shear;
    if (name == "polar_action") return ModelKind::polar_action;
    throw UnsupportedModel("unsupported model '" + std::string(name) + "'");
}

/// Closed-form test charts:
///   harmonic_pair:    G0 = id, G1 = (1/2, 1/2)
///   shear(s):         G0(x, y) = (x, y + s x)
///   polar_action(a):  G0(x, y) = (x, y + a x^2 / 2)
/// `strength` is s or a; ignored by harmonic_pair. G1 = 0 for the last two.
inline ChartJet model_system(ModelKind kind, double strength = 0.0,
                             Rect domain = {{0.0, 0.0}, {1.0, 1.0}}) {
    if (!std::isfinite(strength)) throw InvalidArgument("model parameter must be finite");
    switch (kind) {
        case ModelKind::harmonic_pair:
            return ChartJet(domain, {PolyMap2::affine(Mat2::identity(), {}),
                                     PolyMap2::constant({0.5, 0.5})});
        case ModelKind::shear:
            return ChartJet(domain, {PolyMap2::affine({1.0, 0.0, strength, 1.0}, {}),
                                     PolyMap2::constant({})});
        case ModelKind::polar_action: {
            PolyMap2 g0(2);
            g0.set(1, 0, {1.0, 0.0});
            g0.set(0, 1, {0.0, 1.0});
            g0.set(2, 0, {0.0, strength / 2});
            return ChartJet(domain, {g0, PolyMap2::constant({})});
        }
    }
    throw UnsupportedModel("unsupported model");
}

}  // namespace asylat
