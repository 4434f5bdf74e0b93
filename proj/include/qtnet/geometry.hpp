#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace qtnet {

inline constexpr double kCoincidenceTol = 1e-6; // minimum pairwise distance, r0 units

// N labeled sites in r0 units. Site 0 is the input at (0,0,0), site N-1 the
// output at (1,1,1); intermediates are sampled inside the unit cube.
struct SiteConfiguration {
    std::vector<Eigen::Vector3d> positions;
    std::uint64_t seed = 0;          // provenance tag of the sampling stream
    bool displaced_outside = false;  // set when a displacement left the cube

    int n_sites() const { return static_cast<int>(positions.size()); }
    int input() const { return 0; }
    int output() const { return n_sites() - 1; }
};

// Element of the alignment group: relabeling of the intermediate sites,
// rotation about the input-output diagonal on a 2-degree grid, and an
// optional reflection through the x-y=0 plane. Input/output are fixed points.
struct SymmetryTransform {
    std::vector<int> permutation; // maps new intermediate slot -> old slot
    int rotation_step = 0;        // angle = 2 * rotation_step degrees, step in [0,180)
    bool mirror = false;

    static SymmetryTransform identity(int n_intermediate);
};

struct PairGeometryDescriptor {
    double r_p;  // intra-pair distance
    double r_b;  // pair midpoint to backbone-intermediate midpoint
    double d_s;  // end spacing along the backbone (input/output to nearest site)
    double d_bb; // spacing between the two intermediate backbone sites
};

SiteConfiguration sample_random_structure(int n_sites, std::uint64_t rng_seed);

double min_pairwise_distance(const SiteConfiguration& config);

// Shifts each selected site by an independent uniform draw in
// [-half_side, +half_side]^3; a "cube of side c" corresponds to half_side = c/2.
SiteConfiguration displace_sites(const SiteConfiguration& config, double half_side,
                                 const std::vector<int>& which, std::uint64_t rng_seed);

std::vector<int> all_site_indices(const SiteConfiguration& config);
std::vector<int> intermediate_site_indices(const SiteConfiguration& config);

SiteConfiguration remove_sites(const SiteConfiguration& config, const std::vector<int>& indices);

SiteConfiguration apply_transform(const SiteConfiguration& config, const SymmetryTransform& t);

// Rotation of a point about the (1,1,1) diagonal through the origin.
Eigen::Vector3d rotate_about_diagonal(const Eigen::Vector3d& p, double angle_rad);
// Reflection through the x-y=0 plane (swaps x and y).
Eigen::Vector3d mirror_xy(const Eigen::Vector3d& p);

PairGeometryDescriptor pair_geometry_descriptors(const SiteConfiguration& config,
                                                 int pair_a, int pair_b);

} // namespace qtnet
