#include <gtest/gtest.h>

#include <random>

#include "asylat/forward_synth.hpp"
#include "asylat/lattice_model.hpp"
#include "test_support.hpp"

using namespace asylat;

namespace {

LabelMap grid_map(int n, double h, Vec2 origin = {}) {
    std::vector<LabelEntry> es;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) es.push_back({{origin.x + h * i, origin.y + h * j}, {i, j}});
    return LabelMap(h, es);
}

LabelMap relabel(const LabelMap& m, const std::function<Label(Label)>& f) {
    std::vector<LabelEntry> es(m.entries().begin(), m.entries().end());
    for (auto& e : es) e.k = f(e.k);
    return LabelMap(m.hbar(), es);
}

}  // namespace

TEST(Region, DefaultMarginAndValidation) {
    const Region r = Region::with_default_margin({{0, 0}, {2, 1}});
    EXPECT_DOUBLE_EQ(r.inner_margin(), 0.1);
    EXPECT_TRUE(r.in_working({0.1, 0.1}));
    EXPECT_FALSE(r.in_working({0.05, 0.5}));
    EXPECT_THROW(Region({{0, 0}, {0, 1}}, 0.0), InvalidArgument);
    EXPECT_THROW(Region({{0, 0}, {1, 1}}, 0.5), InvalidArgument);
    EXPECT_THROW(Region({{0, 0}, {1, 1}}, -0.1), InvalidArgument);
}

TEST(LatticeSample, RejectsDuplicatesAndBadHbar) {
    EXPECT_THROW(LatticeSample(0.1, {{0, 0}, {0, 0}}), InvalidArgument);
    EXPECT_THROW(LatticeSample(0.0, {{0, 0}}), InvalidArgument);
    EXPECT_THROW(LatticeSample(0.1, {{0, std::nan("")}}), InvalidArgument);
    EXPECT_NO_THROW(LatticeSample(0.1, {{0, 0}, {0, 1e-9}}));
}

TEST(AsymptoticLattice, OrderingAndContainment) {
    const Region r = Region::with_default_margin({{0, 0}, {1, 1}});
    EXPECT_THROW(AsymptoticLattice(r, {LatticeSample(0.1, {{0.5, 0.5}}), LatticeSample(0.2, {{0.5, 0.5}})}),
                 InvalidArgument);
    EXPECT_THROW(AsymptoticLattice(r, {LatticeSample(0.1, {{1.5, 0.5}})}), InvalidArgument);
    EXPECT_THROW(AsymptoticLattice(r, {}), InvalidArgument);
    const AsymptoticLattice l(r, {LatticeSample(0.2, {{0.5, 0.5}}), LatticeSample(0.1, {{0.5, 0.5}})});
    EXPECT_EQ(l.hbar_set(), (std::vector<double>{0.2, 0.1}));
}

TEST(LabelMap, RejectsRepeatedLabels) {
    EXPECT_THROW(LabelMap(0.1, {{{0, 0}, {0, 0}}, {{1, 0}, {0, 0}}}), InvalidArgument);
}

TEST(Equivalence, PureShift) {
    const LabelMap a = grid_map(5, 0.1);
    const LabelMap b = relabel(a, [](Label k) { return k + Label{3, -2}; });
    const auto r = labelling_equivalent(a, b, 1e-9);
    ASSERT_TRUE(r.equivalent);
    EXPECT_TRUE(r.witness->matrix.is_identity());
    EXPECT_EQ(r.witness->shift, (Label{3, -2}));
}

TEST(Equivalence, Identity) {
    const LabelMap a = grid_map(5, 0.1);
    const auto r = labelling_equivalent(a, a, 1e-9);
    ASSERT_TRUE(r.equivalent);
    EXPECT_TRUE(r.witness->matrix.is_identity());
    EXPECT_EQ(r.witness->shift, (Label{0, 0}));
}

TEST(Equivalence, NegatedFirstLabelIsReflected) {
    const LabelMap a = grid_map(5, 0.1);
    const LabelMap b = relabel(a, [](Label k) { return Label{-k.k1, k.k2}; });
    const auto r = labelling_equivalent(a, b, 1e-9);
    EXPECT_FALSE(r.equivalent);
    EXPECT_TRUE(r.reflected);
    std::vector<std::pair<Label, Label>> pairs;
    for (const auto& e : a.entries()) pairs.push_back({e.k, {-e.k.k1, e.k.k2}});
    EXPECT_EQ(support::brute_witness(pairs), -1);
}

TEST(Equivalence, MismatchedPointSets) {
    const LabelMap a = grid_map(5, 0.1);
    const LabelMap b = grid_map(4, 0.1);
    EXPECT_THROW(labelling_equivalent(a, b, 1e-9), StructuralMismatch);
    const LabelMap c = grid_map(5, 0.1, {0.01, 0});
    EXPECT_THROW(labelling_equivalent(a, c, 1e-9), StructuralMismatch);
}

TEST(Equivalence, RankDeficientLabels) {
    // Points on one line: the witness is only pinned down on that line.
    std::vector<LabelEntry> ea, eb;
    for (int i = 0; i < 5; ++i) {
        ea.push_back({{0.1 * i, 0}, {i, 0}});
        eb.push_back({{0.1 * i, 0}, {2 * i + 1, i - 4}});
    }
    const auto r = labelling_equivalent(LabelMap(0.1, ea), LabelMap(0.1, eb), 1e-9);
    ASSERT_TRUE(r.equivalent);
    for (const auto& e : ea) EXPECT_EQ(r.witness->apply(e.k), (Label{2 * e.k.k1 + 1, e.k.k1 - 4}));
    EXPECT_EQ(r.witness->matrix.det(), 1);
}

TEST(Equivalence, EquivalenceRelationProperties) {
    std::mt19937_64 rng(11);
    const auto mats = [] {
        std::vector<IntMat2> out;
        for (int a = -2; a <= 2; ++a)
            for (int b = -2; b <= 2; ++b)
                for (int c = -2; c <= 2; ++c)
                    for (int d = -2; d <= 2; ++d)
                        if (a * d - b * c == 1) out.push_back({a, b, c, d});
        return out;
    }();
    for (int trial = 0; trial < 40; ++trial) {
        const LabelMap a = grid_map(4, 0.1);
        auto rnd = [&] {
            const IntMat2 m = mats[rng() % mats.size()];
            const Label t{static_cast<std::int64_t>(rng() % 11) - 5, static_cast<std::int64_t>(rng() % 11) - 5};
            return Witness{m, t};
        };
        const Witness w1 = rnd(), w2 = rnd();
        const LabelMap b = a.transformed(w1);
        const LabelMap c = b.transformed(w2);
        const auto ab = labelling_equivalent(a, b, 1e-9);
        const auto ba = labelling_equivalent(b, a, 1e-9);
        const auto bc = labelling_equivalent(b, c, 1e-9);
        const auto ac = labelling_equivalent(a, c, 1e-9);
        ASSERT_TRUE(ab.equivalent && ba.equivalent && bc.equivalent && ac.equivalent);
        EXPECT_EQ(ab.witness->matrix, w1.matrix);
        EXPECT_EQ(ab.witness->shift, w1.shift);
        // Symmetry: (M, t) -> (M^-1, -M^-1 t).
        EXPECT_EQ(ba.witness->matrix, w1.inverse().matrix);
        EXPECT_EQ(ba.witness->shift, w1.inverse().shift);
        EXPECT_TRUE(labelling_equivalent(a, a, 1e-9).equivalent);
    }
}

TEST(ValidateLattice, UnitLatticeGap) {
    const Region r = Region::with_default_margin({{0, 0}, {1, 1}});
    const auto [lat, truth] = generate(model_system(ModelKind::shear, 0.0), r, std::vector<double>{0.1},
                                       NoiseModel::none());
    const auto d = validate_lattice(lat, 0.5);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NEAR(d[0].min_gap, 0.1, 1e-12);
    EXPECT_NEAR(d[0].gap_ratio, 1.0, 1e-10);
    EXPECT_TRUE(d[0].well_spaced);
    EXPECT_GT(d[0].min_gap, 0.0);
}

TEST(ValidateLattice, PolarActionGapAgreesWithBruteForce) {
    const Region r = Region::with_default_margin({{0, 0}, {1, 1.5}});
    const auto [lat, truth] = generate(model_system(ModelKind::polar_action, 1.0), r,
                                       std::vector<double>{0.05}, NoiseModel::none());
    const auto d = validate_lattice(lat, 0.5);
    const auto pts = lat[0].points();
    double brute = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) brute = std::min(brute, distance(pts[i], pts[j]));
    EXPECT_DOUBLE_EQ(d[0].min_gap, brute);
    EXPECT_GE(d[0].min_gap, 0.045);
    EXPECT_LE(d[0].min_gap, 0.055);
}

TEST(ChartJet, RejectsSingularJacobian) {
    PolyMap2 g(2);
    g.set(1, 0, {1, 0});
    g.set(0, 2, {0, 1});  // DG0 = [[1, 0], [0, 2y]] vanishes on y = 0
    EXPECT_THROW(ChartJet({{-1, -1}, {1, 1}}, {g}), InvalidArgument);
    EXPECT_THROW(ChartJet({{0, 0}, {1, 1}}, {}), InvalidArgument);
}

TEST(LabelMap, FrameFallsBackToNearestCompleteTriple) {
    // Labels start at (2, 1), so (0,0) is absent; the triple at (2,1) is used.
    std::vector<LabelEntry> es;
    for (int i = 2; i < 5; ++i)
        for (int j = 1; j < 4; ++j) es.push_back({{0.1 * i + 0.05 * j, 0.1 * j}, {i, j}});
    const LabelMap m(0.1, es);
    ASSERT_TRUE(m.frame().has_value());
    EXPECT_NEAR(m.frame()->a, 0.1, 1e-12);
    EXPECT_NEAR(m.frame()->b, 0.05, 1e-12);
    EXPECT_NEAR(m.frame()->d, 0.1, 1e-12);
    EXPECT_NEAR(*m.orientation_det(), 0.01, 1e-12);
    EXPECT_FALSE(LabelMap(0.1, {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}}).frame().has_value());
}
