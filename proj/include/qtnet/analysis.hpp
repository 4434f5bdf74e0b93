#pragma once

#include "qtnet/geometry.hpp"
#include "qtnet/network.hpp"
#include "qtnet/quantum.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qtnet {

inline constexpr double kInactiveThreshold = 0.075;
inline constexpr double kBackboneActivityFloor = 0.25;

struct RobustnessReport {
    double delta_eps_rand = 0.0; // original eps minus mean perturbed eps
    double original_eps = 0.0;
    double mean_perturbed_eps = 0.0;
    double std_error = 0.0;      // standard error of the trial mean
    int n_trials = 0;
    std::vector<double> trial_eps; // optional, kept when requested
};

struct RobustnessOptions {
    double cube_side = 0.05;     // full edge of the displacement cube, r0 units
    int n_trials = 1000;
    bool intermediates_only = false;
    bool keep_trials = false;
};

RobustnessReport random_displacement_loss(const SiteConfiguration& config,
                                          std::uint64_t rng_seed,
                                          const RobustnessOptions& opts = {});

// Site is active iff max_t p_k(t) exceeds the threshold; input/output always count.
std::vector<bool> classify_active_sites(const SiteConfiguration& config,
                                        double inactive_threshold = kInactiveThreshold);

struct PairAnalysis {
    bool found = false;
    std::vector<int> pair_indices;     // empty when criteria unmet; 2 or 4 entries (N=8)
    std::vector<int> backbone_indices; // intermediate sites outside the pair(s)
    double delta_eps_pair = 0.0;       // loss upon removing the detected pair(s)
    std::vector<double> activity_maxima;
};

// Pair = the two least-active intermediates when both fall below the inactive
// threshold and they are mutually closest among intermediates; up to two
// pairs for N = 8.
PairAnalysis detect_pair(const SiteConfiguration& config,
                         double inactive_threshold = kInactiveThreshold);

double pair_removal_loss(const SiteConfiguration& config, const std::vector<int>& pair);

struct SpectralShiftReport {
    std::vector<double> lambdas_full;     // backbone-dominant eigenvalues, pair present
    std::vector<double> lambdas_reduced;  // spectrum after pair removal
    std::vector<double> measured_shifts;  // matched differences, full minus reduced
    double v = 0.0;                       // rms backbone-pair coupling
    double delta = 0.0;                   // intra-pair coupling 1/r_P^3
    double perturbative_shift = 0.0;      // |v|^2 / delta
    double fundamental_frequency = 0.0;   // best-fit base of eigenvalue differences
    double max_harmonic_deviation = 0.0;  // worst relative deviation from integer multiples
};

SpectralShiftReport spectral_pair_shift(const SiteConfiguration& config,
                                        const std::vector<int>& pair);

struct LandscapePoint {
    double r_p = 0.0;
    double r_b = 0.0;
    double epsilon = -1.0; // negative when the grid point was skipped
    bool skipped = false;
};

struct LandscapeSurface {
    std::vector<double> r_p_grid;
    std::vector<double> r_b_grid;
    std::vector<LandscapePoint> points; // row-major over (r_p, r_b)
};

// Moves the pair over (r_P, r_B) with the backbone fixed: the pair midpoint
// slides along the perpendicular from the backbone-intermediate midpoint
// within the plane of the diagonal and the original pair position, keeping
// the original pair orientation.
LandscapeSurface pair_landscape_scan(const SiteConfiguration& config,
                                     const std::vector<int>& pair,
                                     const std::vector<double>& r_p_grid,
                                     const std::vector<double>& r_b_grid);

struct SuperpositionResult {
    int reference = 0;                       // index of the most connected member
    std::vector<SiteConfiguration> aligned;  // members in canonical orientation
};

SuperpositionResult superpose_cluster(const std::vector<SiteConfiguration>& members,
                                      const std::vector<int>& degrees,
                                      bool average_with_two = false,
                                      std::uint64_t rng_seed = 0);

struct ClassInfo {
    std::string label; // pair / inline / sparse / unclassified
    std::vector<int> clusters;
    double population = 0.0;      // fraction of assigned nodes
    double mean_delta_eps = 0.0;
    double fastest_t_star = 0.0;
    double mean_t_star = 0.0;
};

struct ClassSummary {
    std::vector<ClassInfo> classes; // ordered by ascending mean delta eps
};

// Groups clusters whose delta-eps distributions agree (mean difference below
// 0.02 and two-sample KS statistic below 0.1); classes are labeled by their
// mean loss: lowest = pair, highest = inline, remaining = sparse.
ClassSummary class_statistics(const ClusterPartition& partition,
                              const std::vector<double>& delta_eps_rand,
                              const std::vector<double>& t_star);

double ks_statistic(std::vector<double> a, std::vector<double> b);

} // namespace qtnet
