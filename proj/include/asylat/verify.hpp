#pragma once

#include <vector>

#include "asylat/forward_synth.hpp"
#include "asylat/lattice_model.hpp"

namespace asylat {

/// Compares a produced label map with the ground truth restricted to the labelled points.
/// Throws StructuralMismatch when a labelled point has no ground-truth counterpart.
inline EquivalenceResult verify_against_truth(const LabelMap& labels, const GroundTruthSlice& truth,
                                              double tol = 1e-9) {
    if (labels.hbar() != truth.hbar) throw StructuralMismatch("hbar differs from ground truth");
    std::vector<Vec2> pts;
    pts.reserve(truth.entries.size());
    for (const auto& e : truth.entries) pts.push_back(e.point);
    GridIndex index(pts);
    std::vector<LabelEntry> restricted;
    restricted.reserve(labels.size());
    for (const auto& e : labels.entries()) {
        const auto i = index.nearest(e.point);
        if (!i || distance(pts[*i], e.point) > tol)
            throw StructuralMismatch("labelled point is not part of the ground truth");
        index.remove(*i);
        restricted.push_back(truth.entries[*i]);
    }
    return labelling_equivalent(labels, LabelMap(truth.hbar, std::move(restricted)), tol);
}

}  // namespace asylat
