#include "qtnet/analysis.hpp"

#include "qtnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace qtnet {

RobustnessReport random_displacement_loss(const SiteConfiguration& config,
                                          std::uint64_t rng_seed,
                                          const RobustnessOptions& opts) {
    RobustnessReport report;
    report.n_trials = opts.n_trials;
    report.original_eps = transport_efficiency(config).epsilon_max;

    const auto which = opts.intermediates_only ? intermediate_site_indices(config)
                                               : all_site_indices(config);
    const double half_side = 0.5 * opts.cube_side;

    double sum = 0.0, sum_sq = 0.0;
    if (opts.keep_trials) report.trial_eps.reserve(opts.n_trials);
    for (int trial = 0; trial < opts.n_trials; ++trial) {
        const auto displaced =
            displace_sites(config, half_side, which, derive_seed(rng_seed, trial));
        const double eps = transport_efficiency(displaced).epsilon_max;
        sum += eps;
        sum_sq += eps * eps;
        if (opts.keep_trials) report.trial_eps.push_back(eps);
    }
    if (opts.n_trials > 0) {
        report.mean_perturbed_eps = sum / opts.n_trials;
        report.delta_eps_rand = report.original_eps - report.mean_perturbed_eps;
        if (opts.n_trials > 1) {
            const double var =
                (sum_sq - sum * sum / opts.n_trials) / (opts.n_trials - 1);
            report.std_error = std::sqrt(std::max(0.0, var) / opts.n_trials);
        }
    }
    return report;
}

std::vector<bool> classify_active_sites(const SiteConfiguration& config,
                                        double inactive_threshold) {
    const auto maxima = max_site_excitations(config);
    std::vector<bool> active(config.n_sites());
    for (int k = 0; k < config.n_sites(); ++k) active[k] = maxima[k] > inactive_threshold;
    active[config.input()] = true;
    active[config.output()] = true;
    return active;
}

PairAnalysis detect_pair(const SiteConfiguration& config, double inactive_threshold) {
    PairAnalysis analysis;
    analysis.activity_maxima = max_site_excitations(config);

    std::vector<int> remaining = intermediate_site_indices(config);
    const int max_pairs = config.n_sites() >= 8 ? 2 : 1;

    for (int round = 0; round < max_pairs && remaining.size() >= 2; ++round) {
        std::vector<int> by_activity = remaining;
        std::sort(by_activity.begin(), by_activity.end(), [&](int a, int b) {
            return analysis.activity_maxima[a] < analysis.activity_maxima[b];
        });
        const int a = by_activity[0];
        const int b = by_activity[1];
        if (analysis.activity_maxima[a] > inactive_threshold ||
            analysis.activity_maxima[b] > inactive_threshold)
            break;

        // the candidate pair must also be mutually closest among intermediates
        double min_dist = std::numeric_limits<double>::infinity();
        int mi = -1, mj = -1;
        for (size_t i = 0; i < remaining.size(); ++i)
            for (size_t j = i + 1; j < remaining.size(); ++j) {
                const double d =
                    (config.positions[remaining[i]] - config.positions[remaining[j]]).norm();
                if (d < min_dist) {
                    min_dist = d;
                    mi = remaining[i];
                    mj = remaining[j];
                }
            }
        if (!((mi == a && mj == b) || (mi == b && mj == a))) break;

        analysis.pair_indices.push_back(std::min(a, b));
        analysis.pair_indices.push_back(std::max(a, b));
        remaining.erase(std::remove_if(remaining.begin(), remaining.end(),
                                       [&](int i) { return i == a || i == b; }),
                        remaining.end());
    }

    analysis.backbone_indices = remaining;
    analysis.found = !analysis.pair_indices.empty();
    if (analysis.found)
        analysis.delta_eps_pair = pair_removal_loss(config, analysis.pair_indices);
    return analysis;
}

double pair_removal_loss(const SiteConfiguration& config, const std::vector<int>& pair) {
    const double eps_full = transport_efficiency(config).epsilon_max;
    const double eps_reduced = transport_efficiency(remove_sites(config, pair)).epsilon_max;
    return eps_full - eps_reduced;
}

SpectralShiftReport spectral_pair_shift(const SiteConfiguration& config,
                                        const std::vector<int>& pair) {
    if (pair.size() != 2) throw std::invalid_argument("spectral_pair_shift: needs a 2-site pair");
    SpectralShiftReport report;

    const auto h = build_hamiltonian(config);
    const auto full = decompose(h);
    const int n = config.n_sites();

    std::vector<int> backbone; // includes input and output
    for (int i = 0; i < n; ++i)
        if (i != pair[0] && i != pair[1]) backbone.push_back(i);

    // backbone-dominant eigenstates by site-population overlap
    for (int i = 0; i < n; ++i) {
        double weight = 0.0;
        for (int k : backbone) weight += full.eigenvectors(k, i) * full.eigenvectors(k, i);
        if (weight >= 0.5) report.lambdas_full.push_back(full.eigenvalues[i]);
    }

    const auto reduced = decompose(build_hamiltonian(remove_sites(config, pair)));
    report.lambdas_reduced.assign(reduced.eigenvalues.data(),
                                  reduced.eigenvalues.data() + reduced.eigenvalues.size());

    std::sort(report.lambdas_full.begin(), report.lambdas_full.end());
    const size_t matched = std::min(report.lambdas_full.size(), report.lambdas_reduced.size());
    for (size_t i = 0; i < matched; ++i)
        report.measured_shifts.push_back(report.lambdas_full[i] - report.lambdas_reduced[i]);

    report.delta = h.matrix(pair[0], pair[1]);
    double sum_sq = 0.0;
    int count = 0;
    for (int p : pair)
        for (int b : backbone) {
            sum_sq += h.matrix(p, b) * h.matrix(p, b);
            ++count;
        }
    report.v = std::sqrt(sum_sq / count);
    report.perturbative_shift = report.v * report.v / report.delta;

    // Least-squares sweep for a base frequency dividing the backbone
    // eigenvalue differences into near-integer multiples.
    std::vector<double> diffs;
    for (size_t i = 0; i < report.lambdas_full.size(); ++i)
        for (size_t j = i + 1; j < report.lambdas_full.size(); ++j)
            diffs.push_back(std::abs(report.lambdas_full[j] - report.lambdas_full[i]));
    if (!diffs.empty()) {
        const double dmin = *std::min_element(diffs.begin(), diffs.end());
        const double dmax = *std::max_element(diffs.begin(), diffs.end());
        double best_cost = std::numeric_limits<double>::infinity();
        for (int step = 0; step <= 4000; ++step) {
            const double base = 0.25 * dmin + (dmax - 0.25 * dmin) * step / 4000.0;
            if (base <= 0.0) continue;
            double cost = 0.0;
            for (double d : diffs) {
                const double k = std::round(d / base);
                cost += (d - k * base) * (d - k * base);
            }
            if (cost < best_cost) {
                best_cost = cost;
                report.fundamental_frequency = base;
            }
        }
        for (double d : diffs) {
            const double k = std::round(d / report.fundamental_frequency);
            report.max_harmonic_deviation =
                std::max(report.max_harmonic_deviation,
                         std::abs(d - k * report.fundamental_frequency) /
                             report.fundamental_frequency);
        }
    }
    return report;
}

LandscapeSurface pair_landscape_scan(const SiteConfiguration& config,
                                     const std::vector<int>& pair,
                                     const std::vector<double>& r_p_grid,
                                     const std::vector<double>& r_b_grid) {
    if (pair.size() != 2) throw std::invalid_argument("pair_landscape_scan: needs a 2-site pair");
    LandscapeSurface surface;
    surface.r_p_grid = r_p_grid;
    surface.r_b_grid = r_b_grid;

    std::vector<int> backbone_intermediates;
    for (int i : intermediate_site_indices(config))
        if (i != pair[0] && i != pair[1]) backbone_intermediates.push_back(i);
    Eigen::Vector3d bb_mid = Eigen::Vector3d::Zero();
    for (int i : backbone_intermediates) bb_mid += config.positions[i];
    bb_mid /= static_cast<double>(backbone_intermediates.size());

    static const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
    const Eigen::Vector3d pair_mid =
        0.5 * (config.positions[pair[0]] + config.positions[pair[1]]);
    Eigen::Vector3d radial = pair_mid - bb_mid;
    radial -= axis.dot(radial) * axis;
    if (radial.norm() < 1e-9) radial = Eigen::Vector3d(1.0, -1.0, 0.0); // any perpendicular
    radial.normalize();
    Eigen::Vector3d pair_axis = config.positions[pair[1]] - config.positions[pair[0]];
    if (pair_axis.norm() < 1e-9) pair_axis = axis;
    pair_axis.normalize();

    for (double r_p : r_p_grid) {
        for (double r_b : r_b_grid) {
            LandscapePoint point;
            point.r_p = r_p;
            point.r_b = r_b;
            SiteConfiguration scan = config;
            const Eigen::Vector3d mid = bb_mid + r_b * radial;
            scan.positions[pair[0]] = mid - 0.5 * r_p * pair_axis;
            scan.positions[pair[1]] = mid + 0.5 * r_p * pair_axis;
            if (min_pairwise_distance(scan) <= kCoincidenceTol) {
                point.skipped = true;
            } else {
                point.epsilon = transport_efficiency(scan).epsilon_max;
            }
            surface.points.push_back(point);
        }
    }
    return surface;
}

SuperpositionResult superpose_cluster(const std::vector<SiteConfiguration>& members,
                                      const std::vector<int>& degrees,
                                      bool average_with_two, std::uint64_t rng_seed) {
    if (members.empty()) throw std::invalid_argument("superpose_cluster: empty cluster");
    SuperpositionResult result;
    result.reference = 0;
    for (size_t i = 1; i < degrees.size() && i < members.size(); ++i)
        if (degrees[i] > degrees[result.reference]) result.reference = static_cast<int>(i);

    result.aligned.reserve(members.size());
    for (size_t i = 0; i < members.size(); ++i) {
        if (static_cast<int>(i) == result.reference) {
            result.aligned.push_back(members[i]);
            continue;
        }
        const auto align = similarity_score(members[result.reference], members[i]);
        result.aligned.push_back(apply_transform(members[i], align.best_transform));
    }

    if (average_with_two && members.size() >= 3) {
        const auto snapshot = result.aligned;
        for (size_t i = 0; i < snapshot.size(); ++i) {
            CounterRng rng(derive_seed(rng_seed, i));
            size_t a, b;
            do { a = static_cast<size_t>(rng.uniform() * snapshot.size()); } while (a == i);
            do {
                b = static_cast<size_t>(rng.uniform() * snapshot.size());
            } while (b == i || b == a);
            for (int k = 0; k < result.aligned[i].n_sites(); ++k)
                result.aligned[i].positions[k] =
                    (snapshot[i].positions[k] + snapshot[a].positions[k] +
                     snapshot[b].positions[k]) /
                    3.0;
        }
    }
    return result;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 1.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double stat = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        // step past every sample at the current point before comparing CDFs,
        // otherwise ties between the samples inflate the statistic
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        const double fa = static_cast<double>(i) / a.size();
        const double fb = static_cast<double>(j) / b.size();
        stat = std::max(stat, std::abs(fa - fb));
    }
    return stat;
}

ClassSummary class_statistics(const ClusterPartition& partition,
                              const std::vector<double>& delta_eps_rand,
                              const std::vector<double>& t_star) {
    const int k = partition.n_clusters;
    std::vector<std::vector<double>> deltas(k), times(k);
    int assigned = 0;
    for (size_t i = 0; i < partition.assignment.size(); ++i) {
        const int id = partition.assignment[i];
        if (id <= 0) continue;
        deltas[id - 1].push_back(delta_eps_rand[i]);
        times[id - 1].push_back(t_star[i]);
        ++assigned;
    }

    std::vector<double> means(k, 0.0);
    for (int c = 0; c < k; ++c)
        if (!deltas[c].empty())
            means[c] = std::accumulate(deltas[c].begin(), deltas[c].end(), 0.0) /
                       deltas[c].size();

    // merge clusters with statistically indistinguishable loss distributions
    std::vector<int> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
            if (std::abs(means[a] - means[b]) < 0.02 &&
                ks_statistic(deltas[a], deltas[b]) < 0.1)
                parent[find(a)] = find(b);

    std::vector<std::vector<int>> groups;
    std::vector<int> root_to_group(k, -1);
    for (int c = 0; c < k; ++c) {
        const int r = find(c);
        if (root_to_group[r] < 0) {
            root_to_group[r] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[root_to_group[r]].push_back(c);
    }

    ClassSummary summary;
    for (const auto& g : groups) {
        ClassInfo info;
        for (int c : g) info.clusters.push_back(c + 1); // partition ids are 1-based
        std::vector<double> all_d, all_t;
        for (int c : g) {
            all_d.insert(all_d.end(), deltas[c].begin(), deltas[c].end());
            all_t.insert(all_t.end(), times[c].begin(), times[c].end());
        }
        if (all_d.empty()) continue;
        info.population = static_cast<double>(all_d.size()) / std::max(1, assigned);
        info.mean_delta_eps =
            std::accumulate(all_d.begin(), all_d.end(), 0.0) / all_d.size();
        info.fastest_t_star = *std::min_element(all_t.begin(), all_t.end());
        info.mean_t_star = std::accumulate(all_t.begin(), all_t.end(), 0.0) / all_t.size();
        summary.classes.push_back(std::move(info));
    }

    std::sort(summary.classes.begin(), summary.classes.end(),
              [](const ClassInfo& a, const ClassInfo& b) {
                  return a.mean_delta_eps < b.mean_delta_eps;
              });
    const size_t nc = summary.classes.size();
    for (size_t i = 0; i < nc; ++i) {
        if (i == 0)
            summary.classes[i].label = "pair";
        else if (i == nc - 1)
            summary.classes[i].label = "inline";
        else
            summary.classes[i].label = "sparse";
    }
    return summary;
}

} // namespace qtnet
