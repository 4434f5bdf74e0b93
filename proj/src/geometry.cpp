#include "qtnet/geometry.hpp"

#include "qtnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qtnet {

SymmetryTransform SymmetryTransform::identity(int n_intermediate) {
    SymmetryTransform t;
    t.permutation.resize(n_intermediate);
    std::iota(t.permutation.begin(), t.permutation.end(), 0);
    return t;
}

double min_pairwise_distance(const SiteConfiguration& config) {
    double best = std::numeric_limits<double>::infinity();
    const int n = config.n_sites();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            best = std::min(best, (config.positions[i] - config.positions[j]).norm());
    return best;
}

SiteConfiguration sample_random_structure(int n_sites, std::uint64_t rng_seed) {
    if (n_sites < 2) throw std::invalid_argument("sample_random_structure: n_sites must be >= 2");

    CounterRng rng(rng_seed);
    SiteConfiguration config;
    config.seed = rng_seed;
    config.positions.resize(n_sites);
    config.positions[0] = Eigen::Vector3d::Zero();
    config.positions[n_sites - 1] = Eigen::Vector3d::Ones();

    int rejections = 0;
    for (;;) {
        for (int i = 1; i < n_sites - 1; ++i)
            config.positions[i] = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
        if (n_sites == 2 || min_pairwise_distance(config) > kCoincidenceTol) return config;
        if (++rejections >= 1000)
            throw std::runtime_error("sample_random_structure: 1000 consecutive coincident draws");
    }
}

std::vector<int> all_site_indices(const SiteConfiguration& config) {
    std::vector<int> idx(config.n_sites());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::vector<int> intermediate_site_indices(const SiteConfiguration& config) {
    std::vector<int> idx;
    for (int i = 1; i < config.n_sites() - 1; ++i) idx.push_back(i);
    return idx;
}

SiteConfiguration displace_sites(const SiteConfiguration& config, double half_side,
                                 const std::vector<int>& which, std::uint64_t rng_seed) {
    if (half_side < 0) throw std::invalid_argument("displace_sites: half_side must be >= 0");
    CounterRng rng(rng_seed);
    SiteConfiguration out = config;
    for (int i : which) {
        Eigen::Vector3d delta(rng.uniform(-half_side, half_side),
                              rng.uniform(-half_side, half_side),
                              rng.uniform(-half_side, half_side));
        out.positions[i] += delta;
        for (int c = 0; c < 3; ++c)
            if (out.positions[i][c] < 0.0 || out.positions[i][c] > 1.0) out.displaced_outside = true;
    }
    return out;
}

SiteConfiguration remove_sites(const SiteConfiguration& config, const std::vector<int>& indices) {
    for (int i : indices)
        if (i <= 0 || i >= config.n_sites() - 1)
            throw std::invalid_argument("remove_sites: cannot remove input/output sites");
    SiteConfiguration out;
    out.seed = config.seed;
    out.displaced_outside = config.displaced_outside;
    for (int i = 0; i < config.n_sites(); ++i)
        if (std::find(indices.begin(), indices.end(), i) == indices.end())
            out.positions.push_back(config.positions[i]);
    return out;
}

Eigen::Vector3d rotate_about_diagonal(const Eigen::Vector3d& p, double angle_rad) {
    static const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    return p * c + axis.cross(p) * s + axis * (axis.dot(p)) * (1.0 - c);
}

Eigen::Vector3d mirror_xy(const Eigen::Vector3d& p) {
    return Eigen::Vector3d(p.y(), p.x(), p.z());
}

SiteConfiguration apply_transform(const SiteConfiguration& config, const SymmetryTransform& t) {
    const int n = config.n_sites();
    if (static_cast<int>(t.permutation.size()) != n - 2)
        throw std::invalid_argument("apply_transform: permutation size mismatch");

    SiteConfiguration out = config;
    for (int slot = 0; slot < n - 2; ++slot)
        out.positions[1 + slot] = config.positions[1 + t.permutation[slot]];

    const double angle = 2.0 * t.rotation_step * M_PI / 180.0;
    for (auto& p : out.positions) {
        if (t.rotation_step != 0) p = rotate_about_diagonal(p, angle);
        if (t.mirror) p = mirror_xy(p);
    }
    return out;
}

PairGeometryDescriptor pair_geometry_descriptors(const SiteConfiguration& config,
                                                 int pair_a, int pair_b) {
    const int n = config.n_sites();
    if (n != 6) throw std::invalid_argument("pair_geometry_descriptors: requires N=6");
    for (int i : {pair_a, pair_b})
        if (i <= 0 || i >= n - 1)
            throw std::invalid_argument("pair_geometry_descriptors: pair must be intermediate sites");

    std::vector<int> backbone;
    for (int i = 1; i < n - 1; ++i)
        if (i != pair_a && i != pair_b) backbone.push_back(i);

    const Eigen::Vector3d pa = config.positions[pair_a];
    const Eigen::Vector3d pb = config.positions[pair_b];
    const Eigen::Vector3d b0 = config.positions[backbone[0]];
    const Eigen::Vector3d b1 = config.positions[backbone[1]];

    PairGeometryDescriptor d;
    d.r_p = (pa - pb).norm();
    d.r_b = (0.5 * (pa + pb) - 0.5 * (b0 + b1)).norm();

    // Order the four backbone sites (input, two intermediates, output) along
    // the diagonal; d_s is the mean end spacing, d_bb the central one.
    const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
    std::vector<Eigen::Vector3d> chain = {config.positions[0], b0, b1,
                                          config.positions[n - 1]};
    std::sort(chain.begin(), chain.end(),
              [&](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
                  return axis.dot(u) < axis.dot(v);
              });
    d.d_s = 0.5 * ((chain[1] - chain[0]).norm() + (chain[3] - chain[2]).norm());
    d.d_bb = (chain[2] - chain[1]).norm();
    return d;
}

} // namespace qtnet
