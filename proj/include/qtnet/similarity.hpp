#pragma once

#include "qtnet/geometry.hpp"

#include <optional>

namespace qtnet {

struct AlignmentResult {
    double s_squared = 0.0;        // min over the transform group of sum d_i^2 / N
    SymmetryTransform best_transform;
    long evaluations = 0;          // candidate (perm, rotation, mirror) tuples scored
    bool below_cutoff = false;     // meaningful only when a cutoff was supplied
};

struct SimilarityOptions {
    // When set, the search returns as soon as any candidate scores below the
    // cutoff (the link predicate only needs the threshold test), and partial
    // sums exceeding N*cutoff abandon the candidate.
    std::optional<double> cutoff;
    // Disables branch-and-bound pruning; used by the exhaustive oracle.
    bool exhaustive = false;
};

// S^2 minimized over (N-2)! intermediate relabelings x 180 rotations of
// 2 degrees about the input-output diagonal x mirror through x-y=0,
// with the distance sum running over all N sites.
AlignmentResult similarity_score(const SiteConfiguration& a, const SiteConfiguration& b,
                                 const SimilarityOptions& opts = {});

// Cheap lower bound on S^2 built from rotation/mirror-invariant per-site
// features (axial coordinate and distance to the diagonal), optimally matched
// between the two structures. Always <= similarity_score(a,b).
double axis_profile_lower_bound(const SiteConfiguration& a, const SiteConfiguration& b);

} // namespace qtnet
