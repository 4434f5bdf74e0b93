#include "qtnet/pipeline.hpp"

#include "qtnet/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace qtnet {

namespace {

constexpr const char* kCodeVersion = "0.1.0";

void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& out, double d) {
    std::uint64_t v;
    static_assert(sizeof(v) == sizeof(d));
    std::memcpy(&v, &d, 8);
    write_u64_le(out, v);
}

double read_f64_le(std::istream& in) {
    const std::uint64_t v = read_u64_le(in);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

// --- RunConfig ---------------------------------------------------------------

void RunConfig::validate() const {
    if (n_sites < 2) throw std::invalid_argument("config: n_sites must be >= 2");
    if (efficiency_threshold < 0.0 || efficiency_threshold > 1.0)
        throw std::invalid_argument("config: efficiency_threshold out of [0,1]");
    if (similarity_cutoff < 0.0) throw std::invalid_argument("config: similarity_cutoff < 0");
    if (inflation <= 1.0) throw std::invalid_argument("config: inflation must be > 1");
    if (window_multiplier <= 0.0) throw std::invalid_argument("config: window_multiplier <= 0");
    if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    if (noise_model != "coherent" && noise_model != "haken_strobl" &&
        noise_model != "ohmic_tcl2" && noise_model != "non_markovian")
        throw std::invalid_argument("config: unknown noise_model '" + noise_model + "'");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
}

std::string RunConfig::canonical_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "n_sites=" << n_sites << '\n'
        << "n_samples=" << n_samples << '\n'
        << "efficiency_threshold=" << efficiency_threshold << '\n'
        << "similarity_cutoff=" << similarity_cutoff << '\n'
        << "inflation=" << inflation << '\n'
        << "window_multiplier=" << window_multiplier << '\n'
        << "noise_model=" << noise_model << '\n'
        << "gamma=" << gamma << '\n'
        << "lambda_reorg=" << lambda_reorg << '\n'
        << "omega_c=" << omega_c << '\n'
        << "temperature=" << temperature << '\n'
        << "omega_channel=" << omega_channel << '\n'
        << "master_seed=" << master_seed << '\n'
        << "batch_size=" << batch_size << '\n'
        << "robustness_trials=" << robustness_trials << '\n'
        << "layout_iterations=" << layout_iterations << '\n'
        << "noise_floor=" << noise_floor << '\n';
    // workers and out_dir deliberately excluded: they must not affect results
    return out.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical_text()); }

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "n_sites") config.n_sites = std::stoi(value);
    else if (key == "n_samples") config.n_samples = std::stoull(value);
    else if (key == "efficiency_threshold") config.efficiency_threshold = std::stod(value);
    else if (key == "similarity_cutoff") config.similarity_cutoff = std::stod(value);
    else if (key == "inflation") config.inflation = std::stod(value);
    else if (key == "window_multiplier") config.window_multiplier = std::stod(value);
    else if (key == "noise_model") config.noise_model = value;
    else if (key == "gamma") config.gamma = std::stod(value);
    else if (key == "lambda_reorg") config.lambda_reorg = std::stod(value);
    else if (key == "omega_c") config.omega_c = std::stod(value);
    else if (key == "temperature") config.temperature = std::stod(value);
    else if (key == "omega_channel") config.omega_channel = std::stod(value);
    else if (key == "master_seed") config.master_seed = std::stoull(value);
    else if (key == "workers") config.workers = std::stoi(value);
    else if (key == "out_dir") config.out_dir = value;
    else if (key == "batch_size") config.batch_size = std::stoull(value);
    else if (key == "robustness_trials") config.robustness_trials = std::stoi(value);
    else if (key == "layout_iterations") config.layout_iterations = std::stoi(value);
    else if (key == "noise_floor") config.noise_floor = std::stod(value);
    else if (key == "max_batches_this_run") config.max_batches_this_run = std::stoull(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    RunConfig config;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) apply_override(config, key, value);
    }
    return config;
}

// --- StructureStore ----------------------------------------------------------

struct StructureStore::Impl {
    std::ofstream out;
};

StructureStore::StructureStore(std::string path)
    : path_(std::move(path)), impl_(std::make_shared<Impl>()) {}

void StructureStore::append(const SiteConfiguration& config) {
    auto& out = impl_->out;
    if (!out.is_open()) {
        out.open(path_, std::ios::binary | std::ios::app);
        if (!out) throw std::runtime_error("StructureStore: cannot open " + path_);
    }
    write_u64_le(out, config.seed);
    const unsigned char n = static_cast<unsigned char>(config.n_sites());
    out.write(reinterpret_cast<const char*>(&n), 1);
    for (const auto& p : config.positions)
        for (int c = 0; c < 3; ++c) write_f64_le(out, p[c]);
    if (!out) throw std::runtime_error("StructureStore: write failed on " + path_);
}

void StructureStore::flush() {
    if (impl_->out.is_open()) {
        impl_->out.flush();
        if (!impl_->out) throw std::runtime_error("StructureStore: flush failed on " + path_);
    }
}

std::uint64_t StructureStore::size_bytes() const {
    if (impl_->out.is_open()) impl_->out.flush();
    std::error_code ec;
    const auto size = fs::file_size(path_, ec);
    return ec ? 0 : size;
}

std::vector<SiteConfiguration> StructureStore::read_all() const {
    std::vector<SiteConfiguration> result;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return result;
    for (;;) {
        const std::uint64_t seed = read_u64_le(in);
        unsigned char n = 0;
        in.read(reinterpret_cast<char*>(&n), 1);
        if (!in) break;
        SiteConfiguration config;
        config.seed = seed;
        config.positions.resize(n);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) config.positions[i][c] = read_f64_le(in);
        if (!in) throw std::runtime_error("StructureStore: truncated record in " + path_);
        result.push_back(std::move(config));
    }
    return result;
}

std::map<std::uint64_t, std::uint64_t> StructureStore::index() const {
    std::map<std::uint64_t, std::uint64_t> idx;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return idx;
    std::uint64_t offset = 0;
    for (;;) {
        const std::uint64_t seed = read_u64_le(in);
        unsigned char n = 0;
        in.read(reinterpret_cast<char*>(&n), 1);
        if (!in) break;
        idx[seed] = offset;
        const std::uint64_t record = 8 + 1 + 24ull * n;
        in.seekg(static_cast<std::streamoff>(offset + record));
        offset += record;
    }
    return idx;
}

void export_structures_csv(const std::string& store_path, const std::string& csv_path) {
    StructureStore store(store_path);
    const auto all = store.read_all();
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("export_structures_csv: cannot open " + csv_path);
    out.precision(17);
    out << "seed,n_sites,site,x,y,z\n";
    for (const auto& config : all)
        for (int i = 0; i < config.n_sites(); ++i)
            out << config.seed << ',' << config.n_sites() << ',' << i << ','
                << config.positions[i].x() << ',' << config.positions[i].y() << ','
                << config.positions[i].z() << '\n';
}

void append_census_records(const std::string& path, const std::vector<CensusRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("append_census_records: cannot open " + path);
    for (const auto& r : records) {
        write_u64_le(out, r.seed);
        write_f64_le(out, r.epsilon);
        write_f64_le(out, r.t_star);
        write_f64_le(out, r.epsilon_int);
    }
    if (!out) throw std::runtime_error("append_census_records: write failed");
}

std::vector<CensusRecord> read_census_records(const std::string& path) {
    std::vector<CensusRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    for (;;) {
        CensusRecord r;
        r.seed = read_u64_le(in);
        r.epsilon = read_f64_le(in);
        r.t_star = read_f64_le(in);
        r.epsilon_int = read_f64_le(in);
        if (!in) break;
        records.push_back(r);
    }
    return records;
}

void export_census_csv(const std::string& census_path, const std::string& csv_path) {
    const auto records = read_census_records(census_path);
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("export_census_csv: cannot open " + csv_path);
    out.precision(17);
    out << "seed,epsilon,t_star,epsilon_int\n";
    for (const auto& r : records)
        out << r.seed << ',' << r.epsilon << ',' << r.t_star << ',' << r.epsilon_int << '\n';
}

void EfficiencyHistogram::add(double eps) {
    int bin = static_cast<int>(eps * kBins);
    bin = std::max(0, std::min(kBins - 1, bin));
    ++counts[bin];
    ++total;
}

void EfficiencyHistogram::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("EfficiencyHistogram: cannot open " + path);
    out << "total " << total << '\n';
    for (int i = 0; i < kBins; ++i)
        if (counts[i] > 0) out << i << ' ' << counts[i] << '\n';
}

EfficiencyHistogram EfficiencyHistogram::load(const std::string& path) {
    EfficiencyHistogram h;
    std::ifstream in(path);
    if (!in) return h;
    std::string word;
    in >> word >> h.total;
    int bin;
    std::uint64_t count;
    while (in >> bin >> count)
        if (bin >= 0 && bin < kBins) h.counts[bin] = count;
    return h;
}

void write_manifest(const std::string& path, const RunConfig& config, const std::string& stage,
                    double wall_seconds, const std::map<std::string, std::string>& extra) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    out << "stage=" << stage << '\n'
        << "config_hash=" << hex64(config.hash()) << '\n'
        << "code_version=" << kCodeVersion << '\n'
        << "wall_seconds=" << wall_seconds << '\n';
    for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
    out << "--- config ---\n" << config.canonical_text();
}

// --- census ------------------------------------------------------------------

namespace {

struct BatchResult {
    std::vector<SiteConfiguration> survivors;
    std::vector<CensusRecord> records;
    std::vector<std::uint64_t> histogram;
    std::uint64_t samples = 0;
};

BatchResult evaluate_batch(const RunConfig& config, std::uint64_t begin, std::uint64_t end) {
    BatchResult result;
    result.histogram.assign(EfficiencyHistogram::kBins, 0);
    TransportOptions opts;
    opts.window_multiplier = config.window_multiplier;
    opts.compute_integral = true;
    for (std::uint64_t i = begin; i < end; ++i) {
        const std::uint64_t seed = derive_seed(config.master_seed, i);
        const auto structure = sample_random_structure(config.n_sites, seed);
        const auto transport = transport_efficiency(structure, opts);
        int bin = static_cast<int>(transport.epsilon_max * EfficiencyHistogram::kBins);
        bin = std::max(0, std::min(EfficiencyHistogram::kBins - 1, bin));
        ++result.histogram[bin];
        ++result.samples;
        if (transport.epsilon_max > config.efficiency_threshold) {
            result.survivors.push_back(structure);
            result.records.push_back(
                {seed, transport.epsilon_max, transport.t_star, transport.epsilon_int});
        }
    }
    return result;
}

struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::uint64_t next_batch = 0;
    std::uint64_t structures_bytes = 0;
    std::uint64_t census_bytes = 0;
    std::uint64_t samples_done = 0;
    std::uint64_t survivors = 0;

    void save(const std::string& path) const {
        const std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp);
            out << "config_hash " << config_hash << '\n'
                << "next_batch " << next_batch << '\n'
                << "structures_bytes " << structures_bytes << '\n'
                << "census_bytes " << census_bytes << '\n'
                << "samples_done " << samples_done << '\n'
                << "survivors " << survivors << '\n';
            if (!out) throw std::runtime_error("checkpoint: write failed");
        }
        fs::rename(tmp, path);
    }

    static bool load(const std::string& path, Checkpoint& ckpt) {
        std::ifstream in(path);
        if (!in) return false;
        std::string key;
        std::uint64_t value;
        while (in >> key >> value) {
            if (key == "config_hash") ckpt.config_hash = value;
            else if (key == "next_batch") ckpt.next_batch = value;
            else if (key == "structures_bytes") ckpt.structures_bytes = value;
            else if (key == "census_bytes") ckpt.census_bytes = value;
            else if (key == "samples_done") ckpt.samples_done = value;
            else if (key == "survivors") ckpt.survivors = value;
        }
        return true;
    }
};

void truncate_to(const std::string& path, std::uint64_t bytes) {
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        if (bytes == 0) return;
        throw std::runtime_error("resume: missing file " + path);
    }
    if (fs::file_size(path) < bytes)
        throw std::runtime_error("resume: file shorter than checkpoint claims: " + path);
    fs::resize_file(path, bytes);
}

} // namespace

CensusResult run_census(const RunConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    const std::string structures_path = config.out_dir + "/structures.bin";
    const std::string census_path = config.out_dir + "/census.bin";
    const std::string histogram_path = config.out_dir + "/histogram.txt";
    const std::string ckpt_path = config.out_dir + "/census.ckpt";

    Checkpoint ckpt;
    EfficiencyHistogram histogram;
    CensusResult result;
    const std::uint64_t n_batches =
        (config.n_samples + config.batch_size - 1) / config.batch_size;

    if (Checkpoint::load(ckpt_path, ckpt)) {
        if (ckpt.config_hash != config.hash())
            throw std::runtime_error("run_census: checkpoint in " + config.out_dir +
                                     " belongs to a different configuration");
        truncate_to(structures_path, ckpt.structures_bytes);
        truncate_to(census_path, ckpt.census_bytes);
        histogram = EfficiencyHistogram::load(histogram_path);
        result.resumed = ckpt.next_batch > 0;
    } else {
        ckpt.config_hash = config.hash();
        std::error_code ec;
        fs::remove(structures_path, ec);
        fs::remove(census_path, ec);
        fs::remove(histogram_path, ec);
    }
    result.samples_done = ckpt.samples_done;
    result.survivors = ckpt.survivors;

    StructureStore store(structures_path);

    auto commit_batch = [&](std::uint64_t batch, BatchResult& batch_result) {
        for (const auto& s : batch_result.survivors) store.append(s);
        store.flush();
        append_census_records(census_path, batch_result.records);
        for (int i = 0; i < EfficiencyHistogram::kBins; ++i) {
            histogram.counts[i] += batch_result.histogram[i];
        }
        histogram.total += batch_result.samples;
        histogram.save(histogram_path);
        ckpt.next_batch = batch + 1;
        ckpt.structures_bytes = store.size_bytes();
        std::error_code ec;
        ckpt.census_bytes = fs::exists(census_path, ec) ? fs::file_size(census_path) : 0;
        ckpt.samples_done += batch_result.samples;
        ckpt.survivors += batch_result.survivors.size();
        ckpt.save(ckpt_path);
        result.samples_done = ckpt.samples_done;
        result.survivors = ckpt.survivors;
    };

    const std::uint64_t first_batch = ckpt.next_batch;
    std::uint64_t last_batch = n_batches;
    if (config.max_batches_this_run > 0)
        last_batch = std::min(last_batch, first_batch + config.max_batches_this_run);
    if (first_batch < last_batch) {
        if (config.workers <= 1) {
            for (std::uint64_t b = first_batch; b < last_batch; ++b) {
                const std::uint64_t begin = b * config.batch_size;
                const std::uint64_t end = std::min(config.n_samples, begin + config.batch_size);
                auto batch_result = evaluate_batch(config, begin, end);
                commit_batch(b, batch_result);
            }
        } else {
            // Workers claim batches; the main thread commits strictly in batch
            // order so the persisted bytes are schedule-independent.
            std::mutex mtx;
            std::condition_variable cv;
            std::map<std::uint64_t, BatchResult> ready;
            std::atomic<std::uint64_t> next_claim{first_batch};
            const int n_workers =
                static_cast<int>(std::min<std::uint64_t>(config.workers, last_batch - first_batch));
            std::vector<std::thread> pool;
            std::exception_ptr worker_error;
            for (int w = 0; w < n_workers; ++w) {
                pool.emplace_back([&] {
                    try {
                        for (;;) {
                            const std::uint64_t b = next_claim.fetch_add(1);
                            if (b >= last_batch) return;
                            const std::uint64_t begin = b * config.batch_size;
                            const std::uint64_t end =
                                std::min(config.n_samples, begin + config.batch_size);
                            auto batch_result = evaluate_batch(config, begin, end);
                            std::lock_guard lock(mtx);
                            ready.emplace(b, std::move(batch_result));
                            cv.notify_all();
                        }
                    } catch (...) {
                        std::lock_guard lock(mtx);
                        worker_error = std::current_exception();
                        cv.notify_all();
                    }
                });
            }
            for (std::uint64_t b = first_batch; b < last_batch; ++b) {
                BatchResult batch_result;
                {
                    std::unique_lock lock(mtx);
                    cv.wait(lock, [&] { return worker_error || ready.count(b) > 0; });
                    if (worker_error) break;
                    batch_result = std::move(ready.at(b));
                    ready.erase(b);
                }
                commit_batch(b, batch_result);
            }
            for (auto& t : pool) t.join();
            if (worker_error) std::rethrow_exception(worker_error);
        }
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(config.out_dir + "/manifest_sample.txt", config, "sample", wall,
                   {{"samples_done", std::to_string(result.samples_done)},
                    {"survivors", std::to_string(result.survivors)}});
    return result;
}

// --- network stage -----------------------------------------------------------

NetworkStageResult run_network_stage(const RunConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    NetworkStageResult result;

    StructureStore store(config.out_dir + "/structures.bin");
    const auto structures = store.read_all();
    const auto census = read_census_records(config.out_dir + "/census.bin");

    std::vector<NetworkNode> nodes;
    std::map<std::uint64_t, double> eps_by_seed;
    for (const auto& r : census) eps_by_seed[r.seed] = r.epsilon;
    for (const auto& s : structures) {
        const auto it = eps_by_seed.find(s.seed);
        nodes.push_back({s.seed, it == eps_by_seed.end() ? 0.0 : it->second});
    }

    if (structures.empty()) {
        std::cerr << "warning: empty structure store, writing empty network artifacts\n";
        result.empty_store = true;
        result.network.cutoff = config.similarity_cutoff;
    } else {
        result.network = build_network(structures, nodes, config.similarity_cutoff);
        MclOptions mcl;
        mcl.inflation = config.inflation;
        mcl.noise_floor = config.noise_floor;
        result.partition = mcl_cluster(result.network, mcl);
        result.layout =
            fr_layout(result.network, config.layout_iterations, config.master_seed);
    }

    write_edge_list(result.network, config.out_dir + "/edges.txt");
    write_partition(result.partition, config.out_dir + "/partition.txt");
    write_layout(result.layout, config.out_dir + "/layout.txt");

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(config.out_dir + "/manifest_network.txt", config, "network", wall,
                   {{"nodes", std::to_string(result.network.nodes.size())},
                    {"edges", std::to_string(result.network.edges.size())},
                    {"clusters", std::to_string(result.partition.n_clusters)},
                    {"mcl_converged", result.partition.converged ? "yes" : "no"},
                    {"mcl_iterations", std::to_string(result.partition.iterations)}});
    return result;
}

// --- analysis stage ------------------------------------------------------------

AnalysisStageResult run_analysis_stage(const RunConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    AnalysisStageResult result;

    StructureStore store(config.out_dir + "/structures.bin");
    const auto structures = store.read_all();
    const auto census = read_census_records(config.out_dir + "/census.bin");
    auto partition = read_partition(config.out_dir + "/partition.txt");
    partition.assignment.resize(structures.size(), 0);
    const auto network = read_edge_list(config.out_dir + "/edges.txt", {}, config.similarity_cutoff);

    std::map<std::uint64_t, const CensusRecord*> census_by_seed;
    for (const auto& r : census) census_by_seed[r.seed] = &r;

    std::vector<double> deltas(structures.size(), 0.0);
    std::vector<double> t_stars(structures.size(), 0.0);

    std::ofstream robustness(config.out_dir + "/robustness.csv");
    robustness.precision(12);
    robustness << "node,seed,cluster,eps,delta_eps_rand,std_error\n";
    std::ofstream pairs(config.out_dir + "/pairs.csv");
    pairs.precision(12);
    pairs << "node,seed,cluster,found,pair_i,pair_j,r_p,r_b,delta_eps_pair,n_active\n";

    RobustnessOptions rob_opts;
    rob_opts.n_trials = config.robustness_trials;

    for (size_t i = 0; i < structures.size(); ++i) {
        const auto& s = structures[i];
        const auto report =
            random_displacement_loss(s, derive_seed(config.master_seed, 0x524F42ull + i), rob_opts);
        deltas[i] = report.delta_eps_rand;
        const auto* rec = census_by_seed.count(s.seed) ? census_by_seed[s.seed] : nullptr;
        t_stars[i] = rec ? rec->t_star : transport_efficiency(s).t_star;
        robustness << i << ',' << s.seed << ',' << partition.assignment[i] << ','
                   << report.original_eps << ',' << report.delta_eps_rand << ','
                   << report.std_error << '\n';

        const auto pair = detect_pair(s);
        int n_active = 0;
        for (bool a : classify_active_sites(s)) n_active += a ? 1 : 0;
        if (pair.found && s.n_sites() == 6) {
            const auto desc = pair_geometry_descriptors(s, pair.pair_indices[0],
                                                        pair.pair_indices[1]);
            pairs << i << ',' << s.seed << ',' << partition.assignment[i] << ",1,"
                  << pair.pair_indices[0] << ',' << pair.pair_indices[1] << ',' << desc.r_p
                  << ',' << desc.r_b << ',' << pair.delta_eps_pair << ',' << n_active << '\n';
        } else {
            pairs << i << ',' << s.seed << ',' << partition.assignment[i]
                  << ",0,-1,-1,0,0,0," << n_active << '\n';
        }
    }
    result.structures_analyzed = static_cast<int>(structures.size());

    result.summary = class_statistics(partition, deltas, t_stars);
    {
        std::ofstream out(config.out_dir + "/classes.txt");
        out.precision(6);
        for (const auto& cls : result.summary.classes) {
            out << "class " << cls.label << "\n  clusters:";
            for (int c : cls.clusters) out << ' ' << c + 1;
            out << "\n  population " << cls.population << "\n  mean_delta_eps_rand "
                << cls.mean_delta_eps << "\n  fastest_t_star " << cls.fastest_t_star
                << "\n  mean_t_star " << cls.mean_t_star << '\n';
        }
    }

    // aligned coordinates per cluster, reference = most connected member
    if (!structures.empty() && !network.edges.empty()) {
        EfficiencyNetwork deg_net;
        deg_net.nodes.resize(structures.size());
        deg_net.edges = network.edges;
        const auto degrees = deg_net.degrees();
        for (int cluster = 1; cluster <= partition.n_clusters; ++cluster) {
            std::vector<SiteConfiguration> members;
            std::vector<int> member_degrees;
            for (size_t i = 0; i < structures.size(); ++i)
                if (partition.assignment[i] == cluster) {
                    members.push_back(structures[i]);
                    member_degrees.push_back(degrees[i]);
                }
            if (members.empty()) continue;
            const auto aligned = superpose_cluster(members, member_degrees, true,
                                                   derive_seed(config.master_seed, cluster));
            std::ofstream out(config.out_dir + "/aligned_cluster_" + std::to_string(cluster) +
                              ".csv");
            out.precision(12);
            out << "member,site,x,y,z\n";
            for (size_t m = 0; m < aligned.aligned.size(); ++m)
                for (int k = 0; k < aligned.aligned[m].n_sites(); ++k)
                    out << m << ',' << k << ',' << aligned.aligned[m].positions[k].x() << ','
                        << aligned.aligned[m].positions[k].y() << ','
                        << aligned.aligned[m].positions[k].z() << '\n';
        }
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(config.out_dir + "/manifest_analyze.txt", config, "analyze", wall,
                   {{"structures", std::to_string(result.structures_analyzed)},
                    {"classes", std::to_string(result.summary.classes.size())}});
    return result;
}

// --- noise stage ---------------------------------------------------------------

void run_noise_stage(const RunConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    StructureStore store(config.out_dir + "/structures.bin");
    const auto structures = store.read_all();
    const double tau = 0.2 * M_PI * std::pow(std::sqrt(3.0), 3) * config.window_multiplier;

    NoiseRateModel model;
    if (config.noise_model == "coherent") {
        model = coherent_model();
    } else if (config.noise_model == "haken_strobl") {
        model = haken_strobl_rate(config.gamma / tau);
    } else if (config.noise_model == "ohmic_tcl2") {
        const double omega_c = config.omega_c / tau;
        const double temperature = config.temperature / tau;
        const double lambda = config.lambda_reorg > 0.0
                                  ? config.lambda_reorg
                                  : calibrate_ohmic_lambda(config.gamma / tau, omega_c, temperature);
        model = ohmic_tcl2_rate(lambda, omega_c, temperature, uniform_grid(tau, 513));
    } else if (config.noise_model == "non_markovian") {
        model = non_markovian_rate(config.omega_channel, config.lambda_reorg > 0 ? config.lambda_reorg : 30.0,
                                   config.omega_c, config.temperature, uniform_grid(tau, 513));
    } else {
        throw std::invalid_argument("run_noise_stage: unknown noise model " + config.noise_model);
    }

    if (!model.times.empty()) {
        std::ofstream rates(config.out_dir + "/rates.csv");
        rates.precision(12);
        rates << "t_over_tau,gamma_times_tau\n";
        for (size_t i = 0; i < model.times.size(); ++i)
            rates << model.times[i] / tau << ',' << model.rates[i] * tau << '\n';
    }

    std::ofstream out(config.out_dir + "/noisy.csv");
    if (!out) throw std::runtime_error("run_noise_stage: cannot open noisy.csv");
    out.precision(12);
    out << "seed,model,eps_noisy,t_star\n";
    EvolveOptions evolve;
    evolve.window_multiplier = config.window_multiplier;
    for (const auto& s : structures) {
        const auto r = evolve_master_equation(s, model, evolve);
        out << s.seed << ',' << noise_kind_name(model.kind) << ',' << r.epsilon_max << ','
            << r.t_star << '\n';
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(config.out_dir + "/manifest_noise.txt", config, "noise", wall,
                   {{"model", config.noise_model},
                    {"structures", std::to_string(structures.size())},
                    {"omega_channel_tau", std::to_string(config.omega_channel * tau)}});
}

// --- landscape stage -------------------------------------------------------------

void run_landscape_stage(const RunConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    StructureStore store(config.out_dir + "/structures.bin");
    const auto structures = store.read_all();
    if (structures.empty()) throw std::runtime_error("run_landscape_stage: empty store");
    const auto census = read_census_records(config.out_dir + "/census.bin");
    std::map<std::uint64_t, double> eps_by_seed;
    for (const auto& r : census) eps_by_seed[r.seed] = r.epsilon;

    size_t best = 0;
    for (size_t i = 1; i < structures.size(); ++i)
        if (eps_by_seed[structures[i].seed] > eps_by_seed[structures[best].seed]) best = i;

    const auto& reference = structures[best];
    auto pair = detect_pair(reference);
    std::vector<int> pair_indices = pair.pair_indices;
    if (pair_indices.size() != 2) {
        // fall back to the two closest intermediates
        const auto inter = intermediate_site_indices(reference);
        double min_dist = std::numeric_limits<double>::infinity();
        pair_indices = {inter[0], inter[1]};
        for (size_t i = 0; i < inter.size(); ++i)
            for (size_t j = i + 1; j < inter.size(); ++j) {
                const double d =
                    (reference.positions[inter[i]] - reference.positions[inter[j]]).norm();
                if (d < min_dist) {
                    min_dist = d;
                    pair_indices = {inter[i], inter[j]};
                }
            }
    }

    std::vector<double> r_p_grid, r_b_grid;
    for (int i = 0; i < 28; ++i) r_p_grid.push_back(0.06 + i * 0.02);
    for (int i = 0; i < 28; ++i) r_b_grid.push_back(0.04 + i * 0.03);
    const auto surface = pair_landscape_scan(reference, pair_indices, r_p_grid, r_b_grid);

    std::ofstream out(config.out_dir + "/landscape.csv");
    out.precision(12);
    out << "r_p,r_b,epsilon,skipped\n";
    for (const auto& p : surface.points)
        out << p.r_p << ',' << p.r_b << ',' << p.epsilon << ',' << (p.skipped ? 1 : 0) << '\n';

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(config.out_dir + "/manifest_landscape.txt", config, "landscape", wall,
                   {{"reference_seed", std::to_string(reference.seed)},
                    {"pair_i", std::to_string(pair_indices[0])},
                    {"pair_j", std::to_string(pair_indices[1])}});
}

} // namespace qtnet
