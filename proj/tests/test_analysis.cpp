#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtnet/analysis.hpp"
#include "qtnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace qtnet;

namespace {

// deterministic scan for efficient structures
std::vector<SiteConfiguration> find_survivors(std::uint64_t stream, int count,
                                              double threshold = 0.9) {
    std::vector<SiteConfiguration> out;
    for (std::uint64_t i = 0; static_cast<int>(out.size()) < count && i < 200000; ++i) {
        auto c = sample_random_structure(6, derive_seed(stream, i));
        if (transport_efficiency(c).epsilon_max > threshold) out.push_back(c);
    }
    return out;
}

} // namespace

TEST_CASE("zero displacement cube gives exactly zero loss") {
    auto c = sample_random_structure(6, 41);
    RobustnessOptions opts;
    opts.cube_side = 0.0;
    opts.n_trials = 10;
    auto r = random_displacement_loss(c, 7, opts);
    CHECK(r.delta_eps_rand == 0.0);
    CHECK(r.mean_perturbed_eps == doctest::Approx(r.original_eps).epsilon(1e-12));
}

TEST_CASE("displacement loss is reproducible and has a sane error bar") {
    auto survivors = find_survivors(11, 1);
    REQUIRE(survivors.size() == 1);
    RobustnessOptions opts;
    opts.n_trials = 300;
    opts.keep_trials = true;
    auto a = random_displacement_loss(survivors[0], 13, opts);
    auto b = random_displacement_loss(survivors[0], 13, opts);
    CHECK(a.delta_eps_rand == b.delta_eps_rand);
    REQUIRE(a.trial_eps.size() == 300);
    CHECK(a.n_trials == 300);
    CHECK(a.std_error > 0.0);
    CHECK(a.std_error < 0.05);
    // perturbing an efficient structure loses efficiency on average
    CHECK(a.delta_eps_rand > 0.0);
    CHECK(a.original_eps > 0.9);
    // the mean of the kept trials reproduces the summary
    double mean = 0.0;
    for (double e : a.trial_eps) mean += e;
    mean /= a.trial_eps.size();
    CHECK(a.mean_perturbed_eps == doctest::Approx(mean).epsilon(1e-12));
    CHECK(a.delta_eps_rand == doctest::Approx(a.original_eps - mean).epsilon(1e-12));
}

TEST_CASE("active site classification separates strong and weak carriers") {
    // relay chain along the diagonal carries the excitation; a remote pair
    // placed symmetrically far off the axis stays idle
    SiteConfiguration c;
    Eigen::Vector3d u = Eigen::Vector3d(1, 1, 1).normalized();
    Eigen::Vector3d v = Eigen::Vector3d(1, -1, 0).normalized();
    c.positions.push_back(Eigen::Vector3d(0, 0, 0));
    c.positions.push_back(u * (std::sqrt(3.0) / 3));
    c.positions.push_back(u * (2 * std::sqrt(3.0) / 3));
    c.positions.push_back(Eigen::Vector3d(0.5, 0.5, 0.5) + 0.9 * v + 0.05 * u);
    c.positions.push_back(Eigen::Vector3d(0.5, 0.5, 0.5) + 0.9 * v - 0.05 * u);
    c.positions.push_back(Eigen::Vector3d(1, 1, 1));

    auto active = classify_active_sites(c);
    REQUIRE(active.size() == 6);
    CHECK(active[0]);
    CHECK(active[5]); // input and output always count
    CHECK(active[1]);
    CHECK(active[2]);
    CHECK_FALSE(active[3]);
    CHECK_FALSE(active[4]);

    auto pair = detect_pair(c);
    REQUIRE(pair.found);
    CHECK(pair.pair_indices == std::vector<int>{3, 4});
    CHECK(pair.backbone_indices == std::vector<int>{1, 2});
}

TEST_CASE("all-active structures yield no pair") {
    // two relay sites on the diagonal both carry the excitation
    SiteConfiguration c;
    Eigen::Vector3d u = Eigen::Vector3d(1, 1, 1).normalized();
    c.positions.push_back(Eigen::Vector3d(0, 0, 0));
    c.positions.push_back(u * (std::sqrt(3.0) / 3));
    c.positions.push_back(u * (2 * std::sqrt(3.0) / 3));
    c.positions.push_back(Eigen::Vector3d(1, 1, 1));
    auto pair = detect_pair(c);
    CHECK_FALSE(pair.found);
    CHECK(pair.pair_indices.empty());
}

TEST_CASE("detected pairs satisfy their own definition on sampled survivors") {
    auto survivors = find_survivors(19, 40);
    REQUIRE(survivors.size() == 40);
    int fired = 0;
    for (const auto& c : survivors) {
        auto pair = detect_pair(c);
        if (!pair.found) continue;
        ++fired;
        REQUIRE(pair.pair_indices.size() == 2);
        auto maxima = max_site_excitations(c);
        for (int idx : pair.pair_indices) CHECK(maxima[idx] <= kInactiveThreshold);
        // mutually closest among the intermediates
        int a = pair.pair_indices[0], b = pair.pair_indices[1];
        double d_pair = (c.positions[a] - c.positions[b]).norm();
        for (int other = 1; other < 5; ++other) {
            if (other == a || other == b) continue;
            CHECK(d_pair <= (c.positions[a] - c.positions[other]).norm());
            CHECK(d_pair <= (c.positions[b] - c.positions[other]).norm());
        }
        // removal loss is consistent with a direct evaluation
        double direct = transport_efficiency(c).epsilon_max -
                        transport_efficiency(remove_sites(c, pair.pair_indices)).epsilon_max;
        CHECK(pair.delta_eps_pair == doctest::Approx(direct).epsilon(1e-9));
    }
    CHECK(fired > 0);
}

TEST_CASE("removing a far-away spectator changes nothing") {
    auto c = sample_random_structure(6, 83);
    // push site 2 far outside the cube: couplings fall off as distance cubed
    c.positions[2] = Eigen::Vector3d(60, -55, 40);
    double with = transport_efficiency(c).epsilon_max;
    double without = transport_efficiency(remove_sites(c, {2})).epsilon_max;
    CHECK(std::abs(pair_removal_loss(c, {2}) - (with - without)) < 1e-12);
    CHECK(std::abs(with - without) < 1e-3);
}

TEST_CASE("two-site spectrum splits by the coupling") {
    SiteConfiguration c;
    c.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 1)};
    auto spec = decompose(build_hamiltonian(c));
    double v = std::pow(3.0, -1.5);
    CHECK(spec.eigenvalues[0] == doctest::Approx(-v).epsilon(1e-12));
    CHECK(spec.eigenvalues[1] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("spectral shift report carries the perturbative estimate") {
    auto survivors = find_survivors(29, 30);
    int fired = 0;
    for (const auto& c : survivors) {
        auto pair = detect_pair(c);
        if (!pair.found) continue;
        ++fired;
        auto report = spectral_pair_shift(c, pair.pair_indices);
        int a = pair.pair_indices[0], b = pair.pair_indices[1];
        double r_p = (c.positions[a] - c.positions[b]).norm();
        CHECK(report.delta == doctest::Approx(1.0 / std::pow(r_p, 3)).epsilon(1e-12));
        CHECK(report.v > 0.0);
        CHECK(report.perturbative_shift ==
              doctest::Approx(report.v * report.v / report.delta).epsilon(1e-12));
        REQUIRE(!report.measured_shifts.empty());
        CHECK(report.lambdas_reduced.size() == 4);
        CHECK(report.fundamental_frequency > 0.0);
    }
    CHECK(fired > 0);
}

TEST_CASE("landscape scan recovers the pair-free limit at large separation") {
    auto survivors = find_survivors(37, 30);
    int fired = 0;
    for (const auto& c : survivors) {
        auto pair = detect_pair(c);
        if (!pair.found) continue;
        ++fired;
        auto surface = pair_landscape_scan(c, pair.pair_indices, {0.1, 0.2}, {0.3, 80.0});
        REQUIRE(surface.points.size() == 4);
        double eps_reduced =
            transport_efficiency(remove_sites(c, pair.pair_indices)).epsilon_max;
        for (const auto& p : surface.points) {
            if (p.skipped) continue;
            CHECK(p.epsilon >= 0.0);
            CHECK(p.epsilon <= 1.0 + 1e-9);
            // a pair pushed far from the backbone stops mattering
            if (p.r_b == 80.0) CHECK(std::abs(p.epsilon - eps_reduced) < 1e-3);
        }
        if (fired >= 3) break;
    }
    CHECK(fired > 0);
}

TEST_CASE("landscape grid is laid out row-major with requested coordinates") {
    auto survivors = find_survivors(43, 20);
    PairAnalysis pair;
    const SiteConfiguration* chosen = nullptr;
    for (const auto& c : survivors) {
        auto p = detect_pair(c);
        if (p.found) {
            pair = p;
            chosen = &c;
            break;
        }
    }
    REQUIRE(chosen != nullptr);
    std::vector<double> rp = {0.1, 0.2, 0.3};
    std::vector<double> rb = {0.2, 0.4};
    auto surface = pair_landscape_scan(*chosen, pair.pair_indices, rp, rb);
    CHECK(surface.r_p_grid == rp);
    CHECK(surface.r_b_grid == rb);
    REQUIRE(surface.points.size() == 6);
    for (size_t i = 0; i < rp.size(); ++i)
        for (size_t j = 0; j < rb.size(); ++j) {
            const auto& p = surface.points[i * rb.size() + j];
            CHECK(p.r_p == rp[i]);
            CHECK(p.r_b == rb[j]);
        }
}

TEST_CASE("superposing a cluster of copies aligns them onto the reference") {
    auto base = sample_random_structure(6, 59);
    std::vector<SiteConfiguration> members;
    std::vector<int> degrees = {5, 1, 1, 1};
    members.push_back(base);
    for (int k = 1; k < 4; ++k) {
        SymmetryTransform t;
        t.permutation = {k % 4, (k + 1) % 4, (k + 2) % 4, (k + 3) % 4};
        t.rotation_step = 40 * k;
        t.mirror = k % 2 == 1;
        members.push_back(apply_transform(base, t));
    }
    auto result = superpose_cluster(members, degrees);
    CHECK(result.reference == 0);
    REQUIRE(result.aligned.size() == 4);
    for (const auto& m : result.aligned)
        for (int i = 0; i < 6; ++i)
            CHECK((m.positions[i] - base.positions[i]).norm() < 1e-9);
}

TEST_CASE("ks statistic matches hand-computed values") {
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
    CHECK(ks_statistic({0, 0, 0}, {1, 1, 1}) == doctest::Approx(1.0));
    // {1,2} vs {1.5, 2.5}: largest CDF gap is 1/2
    CHECK(ks_statistic({1, 2}, {1.5, 2.5}) == doctest::Approx(0.5));
}

TEST_CASE("class statistics merge matching clusters and order by loss") {
    // three synthetic loss populations around 0.05, 0.051, 0.10, 0.15
    ClusterPartition partition;
    std::vector<double> loss, t_star;
    CounterRng rng(17);
    auto add_cluster = [&](int id, int count, double center) {
        for (int i = 0; i < count; ++i) {
            partition.assignment.push_back(id);
            loss.push_back(center + 0.04 * (rng.uniform() - 0.5));
            t_star.push_back(0.5 + 0.4 * rng.uniform());
        }
    };
    add_cluster(1, 400, 0.050);
    add_cluster(2, 150, 0.051); // indistinguishable from cluster 1
    add_cluster(3, 100, 0.100);
    add_cluster(4, 50, 0.150);
    partition.n_clusters = 4;
    partition.populations = {400 / 700.0, 150 / 700.0, 100 / 700.0, 50 / 700.0};

    auto summary = class_statistics(partition, loss, t_star);
    REQUIRE(summary.classes.size() == 3);
    CHECK(summary.classes[0].label == "pair");
    CHECK(summary.classes[0].clusters == std::vector<int>{1, 2});
    CHECK(summary.classes[0].population == doctest::Approx(550 / 700.0));
    CHECK(summary.classes[0].mean_delta_eps == doctest::Approx(0.0503).epsilon(0.05));
    CHECK(summary.classes[1].label == "sparse");
    CHECK(summary.classes[2].label == "inline");
    CHECK(summary.classes[2].clusters == std::vector<int>{4});
    CHECK(summary.classes[0].mean_delta_eps < summary.classes[1].mean_delta_eps);
    CHECK(summary.classes[1].mean_delta_eps < summary.classes[2].mean_delta_eps);
    for (const auto& cls : summary.classes) {
        CHECK(cls.fastest_t_star >= 0.5);
        CHECK(cls.fastest_t_star <= cls.mean_t_star);
    }
}
