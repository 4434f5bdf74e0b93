#pragma once

#include "qtnet/geometry.hpp"
#include "qtnet/similarity.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qtnet {

struct NetworkNode {
    std::uint64_t seed = 0;
    double epsilon = 0.0;
};

struct Edge {
    int a = 0, b = 0;      // a < b
    double s_squared = 0.0;
};

struct EfficiencyNetwork {
    std::vector<NetworkNode> nodes;
    std::vector<Edge> edges;
    double cutoff = 0.0;

    std::vector<std::vector<int>> adjacency() const;
    std::vector<int> degrees() const;
};

struct ClusterPartition {
    // cluster id per node, dense from 1 ordered by descending population;
    // 0 marks noise (below the population floor).
    std::vector<int> assignment;
    std::vector<double> populations; // index id-1, fractions over assigned nodes
    double noise_fraction = 0.0;
    int n_clusters = 0;
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    bool degenerate_columns = false; // near-equal attractors hit the tie-break
    double max_column_sum_error = 0.0; // worst |column sum - 1| over all iterates
};

struct LayoutCoordinates {
    std::vector<Eigen::Vector2d> positions;
};

EfficiencyNetwork build_network(const std::vector<SiteConfiguration>& structures,
                                const std::vector<NetworkNode>& nodes, double cutoff);

struct MclOptions {
    double inflation = 1.4;
    int max_iter = 200;
    double tol = 1e-9;          // max elementwise change
    double prune_threshold = 1e-12;
    bool add_self_loops = false;
    double noise_floor = 0.005; // clusters below this fraction are noise
};

ClusterPartition mcl_cluster(const EfficiencyNetwork& net, const MclOptions& opts = {});

LayoutCoordinates fr_layout(const EfficiencyNetwork& net, int iterations, std::uint64_t rng_seed);

void write_edge_list(const EfficiencyNetwork& net, const std::string& path);
void write_partition(const ClusterPartition& partition, const std::string& path);
void write_layout(const LayoutCoordinates& layout, const std::string& path);

EfficiencyNetwork read_edge_list(const std::string& path, std::vector<NetworkNode> nodes,
                                 double cutoff);
ClusterPartition read_partition(const std::string& path);

} // namespace qtnet
