#pragma once

#include "qtnet/analysis.hpp"
#include "qtnet/geometry.hpp"
#include "qtnet/network.hpp"
#include "qtnet/open_system.hpp"
#include "qtnet/quantum.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace qtnet {

struct RunConfig {
    int n_sites = 6;
    std::uint64_t n_samples = 0;
    double efficiency_threshold = 0.9;
    double similarity_cutoff = 0.0125;
    double inflation = 1.4;
    double window_multiplier = 1.0;
    std::string noise_model = "coherent"; // coherent|haken_strobl|ohmic_tcl2|non_markovian
    double gamma = 0.5;                   // haken_strobl rate, 1/tau units
    double lambda_reorg = 0.0;            // 0 = calibrate from gamma target
    double omega_c = 30.0;
    double temperature = 10.0;
    double omega_channel = 150.0;
    std::uint64_t master_seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    std::uint64_t batch_size = 10000;
    int robustness_trials = 1000;
    int layout_iterations = 100;
    double noise_floor = 0.005;
    // stop after this many batches in the current invocation (0 = run to the
    // end); the run stays resumable either way
    std::uint64_t max_batches_this_run = 0;

    void validate() const;
    std::string canonical_text() const;  // serialized key=value form
    std::uint64_t hash() const;          // over result-affecting fields only
};

RunConfig load_config(const std::string& path);
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// --- persistence -----------------------------------------------------------

// Append-only binary store: per record (seed u64 LE, n_sites u8, 3N f64 LE).
class StructureStore {
public:
    explicit StructureStore(std::string path);

    void append(const SiteConfiguration& config);
    void flush();
    std::uint64_t size_bytes() const;
    std::vector<SiteConfiguration> read_all() const;
    // byte offset by seed (index built on demand by scanning the file)
    std::map<std::uint64_t, std::uint64_t> index() const;

    const std::string& path() const { return path_; }

private:
    std::string path_;
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

void export_structures_csv(const std::string& store_path, const std::string& csv_path);

struct CensusRecord {
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    double t_star = 0.0;
    double epsilon_int = 0.0;
};

void append_census_records(const std::string& path, const std::vector<CensusRecord>& records);
std::vector<CensusRecord> read_census_records(const std::string& path);
void export_census_csv(const std::string& census_path, const std::string& csv_path);

// Full-sample efficiency histogram, fixed 1e-3 bins on [0,1].
struct EfficiencyHistogram {
    static constexpr int kBins = 1000;
    std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kBins, 0);
    std::uint64_t total = 0;

    void add(double eps);
    void save(const std::string& path) const;
    static EfficiencyHistogram load(const std::string& path);
};

void write_manifest(const std::string& path, const RunConfig& config,
                    const std::string& stage, double wall_seconds,
                    const std::map<std::string, std::string>& extra = {});

// --- stages ----------------------------------------------------------------

struct CensusResult {
    std::uint64_t samples_done = 0;
    std::uint64_t survivors = 0;
    bool resumed = false;
};

// Samples config.n_samples structures (seed of sample i derived from
// (master_seed, i)), keeps those with eps > threshold, persists the full eps
// histogram, and checkpoints at batch granularity. Output bytes are identical
// for any worker count, and a killed run resumes to the same bytes.
CensusResult run_census(const RunConfig& config);

struct NetworkStageResult {
    EfficiencyNetwork network;
    ClusterPartition partition;
    LayoutCoordinates layout;
    bool empty_store = false;
};

NetworkStageResult run_network_stage(const RunConfig& config);

struct AnalysisStageResult {
    ClassSummary summary;
    int structures_analyzed = 0;
};

AnalysisStageResult run_analysis_stage(const RunConfig& config);

// Evolves every stored structure under the configured noise model and writes
// (seed, kind, parameters, eps_noisy) records.
void run_noise_stage(const RunConfig& config);

void run_landscape_stage(const RunConfig& config);

} // namespace qtnet
