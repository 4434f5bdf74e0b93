#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtnet/geometry.hpp"
#include "qtnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace qtnet;

namespace {

std::vector<double> pairwise_distances(const SiteConfiguration& c) {
    std::vector<double> d;
    for (int i = 0; i < c.n_sites(); ++i)
        for (int j = i + 1; j < c.n_sites(); ++j)
            d.push_back((c.positions[i] - c.positions[j]).norm());
    std::sort(d.begin(), d.end());
    return d;
}

} // namespace

TEST_CASE("two-site structure is exactly the corner pair") {
    for (std::uint64_t seed : {0ull, 1ull, 999ull}) {
        auto c = sample_random_structure(2, seed);
        REQUIRE(c.n_sites() == 2);
        CHECK(c.positions[0] == Eigen::Vector3d(0, 0, 0));
        CHECK(c.positions[1] == Eigen::Vector3d(1, 1, 1));
    }
}

TEST_CASE("sampling is deterministic in the seed and respects invariants") {
    for (int n : {4, 6, 8}) {
        auto a = sample_random_structure(n, 42);
        auto b = sample_random_structure(n, 42);
        auto c = sample_random_structure(n, 43);
        REQUIRE(a.n_sites() == n);
        CHECK(a.positions[0] == Eigen::Vector3d(0, 0, 0));
        CHECK(a.positions[n - 1] == Eigen::Vector3d(1, 1, 1));
        for (int i = 0; i < n; ++i) CHECK(a.positions[i] == b.positions[i]);
        bool same = true;
        for (int i = 1; i < n - 1; ++i) same = same && a.positions[i] == c.positions[i];
        CHECK_FALSE(same);
        for (int i = 1; i < n - 1; ++i)
            for (int k = 0; k < 3; ++k) {
                CHECK(a.positions[i][k] >= 0.0);
                CHECK(a.positions[i][k] <= 1.0);
            }
        CHECK(min_pairwise_distance(a) > kCoincidenceTol);
    }
}

TEST_CASE("intermediate coordinates are uniform in the cube") {
    // mean of 4e6 uniform coordinates: sigma = (1/sqrt(12))/2000 ~ 1.4e-4
    const int n_samples = 1000000;
    double sum = 0.0;
    long count = 0;
    for (int i = 0; i < n_samples / 100; ++i) {
        auto c = sample_random_structure(6, derive_seed(5, i));
        for (int s = 1; s < 5; ++s) sum += c.positions[s].sum(), count += 3;
    }
    CHECK(std::abs(sum / count - 0.5) < 0.002);

    // empirical CDF of 1e5 coordinates vs uniform
    std::vector<double> xs;
    for (int i = 0; xs.size() < 100000; ++i) {
        auto c = sample_random_structure(6, derive_seed(17, i));
        for (int s = 1; s < 5; ++s)
            for (int k = 0; k < 3; ++k) xs.push_back(c.positions[s][k]);
    }
    xs.resize(100000);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double lo = static_cast<double>(i) / xs.size();
        double hi = static_cast<double>(i + 1) / xs.size();
        ks = std::max({ks, std::abs(xs[i] - lo), std::abs(xs[i] - hi)});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("displacement support and magnitude") {
    auto base = sample_random_structure(6, 7);
    double max_abs = 0.0, sum_abs = 0.0;
    long count = 0;
    for (int t = 0; t < 20000; ++t) {
        auto d = displace_sites(base, 0.025, all_site_indices(base), derive_seed(11, t));
        REQUIRE(d.n_sites() == 6);
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 3; ++k) {
                double delta = d.positions[i][k] - base.positions[i][k];
                max_abs = std::max(max_abs, std::abs(delta));
                sum_abs += std::abs(delta);
                ++count;
            }
    }
    CHECK(max_abs <= 0.025);
    CHECK(max_abs > 0.024); // the support edge is reached
    // E|delta| = half_side / 2 = 0.0125
    CHECK(sum_abs / count == doctest::Approx(0.0125).epsilon(0.01));
}

TEST_CASE("displacement leaves unselected sites fixed and flags cube exits") {
    auto base = sample_random_structure(6, 3);
    auto d = displace_sites(base, 0.025, intermediate_site_indices(base), 99);
    CHECK(d.positions[0] == base.positions[0]);
    CHECK(d.positions[5] == base.positions[5]);
    CHECK(d.positions[2] != base.positions[2]);

    // corner sites displaced by a full-cube draw always exit the unit cube
    auto e = displace_sites(base, 0.025, all_site_indices(base), 99);
    CHECK(e.displaced_outside);
    CHECK_FALSE(displace_sites(base, 0.0, all_site_indices(base), 99).displaced_outside);
}

TEST_CASE("remove_sites drops the requested intermediates") {
    auto base = sample_random_structure(6, 21);
    auto r = remove_sites(base, {2, 4});
    REQUIRE(r.n_sites() == 4);
    CHECK(r.positions[0] == base.positions[0]);
    CHECK(r.positions[1] == base.positions[1]);
    CHECK(r.positions[2] == base.positions[3]);
    CHECK(r.positions[3] == base.positions[5]);
    CHECK(r.positions.back() == Eigen::Vector3d(1, 1, 1));
}

TEST_CASE("transforms fix the corners and preserve the distance multiset") {
    auto base = sample_random_structure(6, 123);
    auto dist0 = pairwise_distances(base);
    SymmetryTransform t;
    t.permutation = {2, 0, 3, 1}; // new slot -> old slot, intermediate labels
    t.rotation_step = 37;
    t.mirror = true;
    auto moved = apply_transform(base, t);
    CHECK((moved.positions[0] - Eigen::Vector3d(0, 0, 0)).norm() < 1e-12);
    CHECK((moved.positions[5] - Eigen::Vector3d(1, 1, 1)).norm() < 1e-12);
    auto dist1 = pairwise_distances(moved);
    REQUIRE(dist0.size() == dist1.size());
    for (size_t i = 0; i < dist0.size(); ++i)
        CHECK(dist0[i] == doctest::Approx(dist1[i]).epsilon(1e-12));
}

TEST_CASE("identity transform is a no-op and rotations compose to a full turn") {
    auto base = sample_random_structure(6, 55);
    auto same = apply_transform(base, SymmetryTransform::identity(4));
    for (int i = 0; i < 6; ++i)
        CHECK((same.positions[i] - base.positions[i]).norm() < 1e-14);

    // four 90-degree rotations about the diagonal
    Eigen::Vector3d p(0.3, 0.8, 0.1);
    Eigen::Vector3d q = p;
    for (int k = 0; k < 4; ++k) q = rotate_about_diagonal(q, M_PI / 2);
    CHECK((q - p).norm() < 1e-12);

    // mirror is an involution and fixes the diagonal
    CHECK((mirror_xy(mirror_xy(p)) - p).norm() == 0.0);
    CHECK((mirror_xy(Eigen::Vector3d(1, 1, 1)) - Eigen::Vector3d(1, 1, 1)).norm() == 0.0);
}

TEST_CASE("rotation about the diagonal preserves corner distances") {
    CounterRng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Vector3d p(rng.uniform(), rng.uniform(), rng.uniform());
        double ang = rng.uniform(0, 2 * M_PI);
        Eigen::Vector3d q = rotate_about_diagonal(p, ang);
        CHECK(q.norm() == doctest::Approx(p.norm()).epsilon(1e-12));
        CHECK((q - Eigen::Vector3d(1, 1, 1)).norm() ==
              doctest::Approx((p - Eigen::Vector3d(1, 1, 1)).norm()).epsilon(1e-12));
    }
}

TEST_CASE("pair geometry descriptors on a hand-built chain") {
    // backbone along the diagonal at 1/3 and 2/3, pair sites off to the side
    SiteConfiguration c;
    Eigen::Vector3d u = Eigen::Vector3d(1, 1, 1) / std::sqrt(3.0);
    Eigen::Vector3d radial = Eigen::Vector3d(1, -1, 0).normalized();
    Eigen::Vector3d bb_mid = Eigen::Vector3d(0.5, 0.5, 0.5);
    c.positions.push_back(Eigen::Vector3d(0, 0, 0));
    c.positions.push_back(bb_mid - (std::sqrt(3.0) / 6) * u); // backbone 1
    c.positions.push_back(bb_mid + 0.4 * radial + 0.1 * u);   // pair a
    c.positions.push_back(bb_mid + 0.4 * radial - 0.1 * u);   // pair b
    c.positions.push_back(bb_mid + (std::sqrt(3.0) / 6) * u); // backbone 2
    c.positions.push_back(Eigen::Vector3d(1, 1, 1));

    auto g = pair_geometry_descriptors(c, 2, 3);
    CHECK(g.r_p == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(g.r_b == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(g.d_bb == doctest::Approx(std::sqrt(3.0) / 3).epsilon(1e-9));
    CHECK(g.d_s == doctest::Approx(std::sqrt(3.0) / 3).epsilon(1e-9));
}

TEST_CASE("counter rng is schedule independent") {
    CounterRng a(91), b(91);
    (void)a.next_u64();
    (void)a.next_u64();
    CHECK(counter_value(91, 2) == a.next_u64());
    CHECK(b.next_u64() == counter_value(91, 0));
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
    double u = CounterRng(4).uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}
