#include "qtnet/network.hpp"

#include "qtnet/rng.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace qtnet {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void join(int a, int b) { parent[find(a)] = find(b); }
};

using SpMat = Eigen::SparseMatrix<double>;

void normalize_columns(SpMat& m) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(m.cols());
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) sums[j] += it.value();
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it)
            it.valueRef() /= sums[j];
}

void inflate_and_prune(SpMat& m, double power, double prune_threshold) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it)
            it.valueRef() = std::pow(it.value(), power);
    // prune before normalizing so the dropped mass cannot leave column sums
    // short of one
    m.prune([prune_threshold](int, int, double v) { return std::abs(v) >= prune_threshold; });
    normalize_columns(m);
}

} // namespace

std::vector<std::vector<int>> EfficiencyNetwork::adjacency() const {
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& e : edges) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    return adj;
}

std::vector<int> EfficiencyNetwork::degrees() const {
    std::vector<int> deg(nodes.size(), 0);
    for (const auto& e : edges) {
        ++deg[e.a];
        ++deg[e.b];
    }
    return deg;
}

EfficiencyNetwork build_network(const std::vector<SiteConfiguration>& structures,
                                const std::vector<NetworkNode>& nodes, double cutoff) {
    if (structures.size() != nodes.size())
        throw std::invalid_argument("build_network: structures/nodes size mismatch");
    EfficiencyNetwork net;
    net.nodes = nodes;
    net.cutoff = cutoff;
    if (cutoff <= 0.0) return net;

    SimilarityOptions opts;
    opts.cutoff = cutoff;
    const int n = static_cast<int>(structures.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (axis_profile_lower_bound(structures[i], structures[j]) >= cutoff) continue;
            const auto align = similarity_score(structures[i], structures[j], opts);
            if (align.below_cutoff) net.edges.push_back({i, j, align.s_squared});
        }
    }
    return net;
}

ClusterPartition mcl_cluster(const EfficiencyNetwork& net, const MclOptions& opts) {
    if (opts.inflation <= 1.0) throw std::invalid_argument("mcl_cluster: inflation must be > 1");
    const int n = static_cast<int>(net.nodes.size());
    ClusterPartition part;
    part.assignment.assign(n, 0);
    if (n == 0) return part;

    // Isolated nodes have no transition column; they are singleton clusters.
    const auto deg = net.degrees();
    std::vector<int> local(n, -1);
    std::vector<int> global;
    for (int i = 0; i < n; ++i)
        if (deg[i] > 0) {
            local[i] = static_cast<int>(global.size());
            global.push_back(i);
        }
    const int m = static_cast<int>(global.size());

    UnionFind uf(n);
    part.converged = true;
    if (m > 0) {
        std::vector<Eigen::Triplet<double>> triplets;
        for (const auto& e : net.edges) {
            triplets.emplace_back(local[e.a], local[e.b], 1.0);
            triplets.emplace_back(local[e.b], local[e.a], 1.0);
        }
        if (opts.add_self_loops)
            for (int j = 0; j < m; ++j) triplets.emplace_back(j, j, 1.0);
        SpMat c(m, m);
        c.setFromTriplets(triplets.begin(), triplets.end());
        normalize_columns(c);

        auto column_sum_error = [&](const SpMat& mat) {
            double worst = 0.0;
            for (int j = 0; j < mat.outerSize(); ++j) {
                double sum = 0.0;
                for (SpMat::InnerIterator it(mat, j); it; ++it) sum += it.value();
                worst = std::max(worst, std::abs(sum - 1.0));
            }
            return worst;
        };
        part.max_column_sum_error = column_sum_error(c);

        part.converged = false;
        for (int iter = 0; iter < opts.max_iter; ++iter) {
            SpMat next = c * c; // expansion
            inflate_and_prune(next, opts.inflation, opts.prune_threshold);
            part.max_column_sum_error =
                std::max(part.max_column_sum_error, column_sum_error(next));
            const SpMat diff = next - c;
            double residual = 0.0;
            for (int j = 0; j < diff.outerSize(); ++j)
                for (SpMat::InnerIterator it(diff, j); it; ++it)
                    residual = std::max(residual, std::abs(it.value()));
            c = std::move(next);
            part.iterations = iter + 1;
            part.final_residual = residual;
            if (residual < opts.tol) {
                part.converged = true;
                break;
            }
        }

        // Attractor of each column = dominant row; near-equal maxima (within
        // 1e-6) break towards the lowest row id.
        for (int j = 0; j < m; ++j) {
            double best = -1.0;
            for (SpMat::InnerIterator it(c, j); it; ++it) best = std::max(best, it.value());
            int attractor = -1;
            int near_best = 0;
            for (SpMat::InnerIterator it(c, j); it; ++it) {
                if (it.value() > best - 1e-6) {
                    ++near_best;
                    if (attractor < 0 || static_cast<int>(it.row()) < attractor)
                        attractor = static_cast<int>(it.row());
                }
            }
            if (near_best > 1) part.degenerate_columns = true;
            if (attractor >= 0) uf.join(global[j], global[attractor]);
        }
    }

    // Group by root, rank by population.
    std::vector<std::vector<int>> groups;
    std::vector<int> root_to_group(n, -1);
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        if (root_to_group[r] < 0) {
            root_to_group[r] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[root_to_group[r]].push_back(i);
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });

    int assigned = 0;
    std::vector<int> kept_sizes;
    for (const auto& g : groups) {
        const double frac = static_cast<double>(g.size()) / n;
        if (frac < opts.noise_floor) continue;
        const int id = static_cast<int>(kept_sizes.size()) + 1;
        for (int i : g) part.assignment[i] = id;
        kept_sizes.push_back(static_cast<int>(g.size()));
        assigned += static_cast<int>(g.size());
    }
    part.n_clusters = static_cast<int>(kept_sizes.size());
    part.noise_fraction = 1.0 - static_cast<double>(assigned) / n;
    for (int s : kept_sizes)
        part.populations.push_back(assigned > 0 ? static_cast<double>(s) / assigned : 0.0);
    return part;
}

LayoutCoordinates fr_layout(const EfficiencyNetwork& net, int iterations, std::uint64_t rng_seed) {
    const int n = static_cast<int>(net.nodes.size());
    LayoutCoordinates layout;
    layout.positions.assign(n, Eigen::Vector2d::Zero());
    if (n <= 1) return layout;

    CounterRng rng(rng_seed);
    for (auto& p : layout.positions) p = Eigen::Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));

    const double k = std::sqrt(1.0 / n); // natural spring length for unit area
    std::vector<Eigen::Vector2d> disp(n);
    for (int iter = 0; iter < iterations; ++iter) {
        const double temp = 0.1 * (1.0 - static_cast<double>(iter) / iterations) + 1e-6;
        for (auto& d : disp) d.setZero();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                Eigen::Vector2d delta = layout.positions[i] - layout.positions[j];
                double dist = std::max(delta.norm(), 1e-9);
                const Eigen::Vector2d f = delta / dist * (k * k / dist); // repulsion
                disp[i] += f;
                disp[j] -= f;
            }
        }
        for (const auto& e : net.edges) {
            Eigen::Vector2d delta = layout.positions[e.a] - layout.positions[e.b];
            double dist = std::max(delta.norm(), 1e-9);
            const Eigen::Vector2d f = delta / dist * (dist * dist / k); // attraction
            disp[e.a] -= f;
            disp[e.b] += f;
        }
        for (int i = 0; i < n; ++i) {
            const double len = disp[i].norm();
            if (len > 1e-12) layout.positions[i] += disp[i] / len * std::min(len, temp);
        }
    }

    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    for (const auto& p : layout.positions) center += p;
    center /= n;
    for (auto& p : layout.positions) p -= center;
    return layout;
}

void write_edge_list(const EfficiencyNetwork& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_edge_list: cannot open " + path);
    out.precision(17);
    for (const auto& e : net.edges) out << e.a << ' ' << e.b << ' ' << e.s_squared << '\n';
}

void write_partition(const ClusterPartition& partition, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_partition: cannot open " + path);
    for (size_t i = 0; i < partition.assignment.size(); ++i)
        out << i << ' ' << partition.assignment[i] << '\n';
}

void write_layout(const LayoutCoordinates& layout, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_layout: cannot open " + path);
    out.precision(17);
    for (size_t i = 0; i < layout.positions.size(); ++i)
        out << i << ' ' << layout.positions[i].x() << ' ' << layout.positions[i].y() << '\n';
}

EfficiencyNetwork read_edge_list(const std::string& path, std::vector<NetworkNode> nodes,
                                 double cutoff) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_edge_list: cannot open " + path);
    EfficiencyNetwork net;
    net.nodes = std::move(nodes);
    net.cutoff = cutoff;
    Edge e;
    while (in >> e.a >> e.b >> e.s_squared) net.edges.push_back(e);
    return net;
}

ClusterPartition read_partition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_partition: cannot open " + path);
    ClusterPartition part;
    int node, cluster;
    while (in >> node >> cluster) {
        if (node >= static_cast<int>(part.assignment.size()))
            part.assignment.resize(node + 1, 0);
        part.assignment[node] = cluster;
        part.n_clusters = std::max(part.n_clusters, cluster);
    }
    return part;
}

} // namespace qtnet
