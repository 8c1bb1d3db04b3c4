#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pipad/dtdg.hpp"
#include "pipad/kernel.hpp"
#include "pipad/overlap.hpp"
#include "pipad/reuse_cache.hpp"
#include "pipad/tuner.hpp"

namespace pipad {

enum class ModelKind { tgcn, mpnn_lstm, evolvegcn };

const char* to_string(ModelKind kind) noexcept;
ModelKind parse_model(const std::string& name);

/// Stage structure of a DGNN. GCN layers run real math; recurrent cells
/// and weight evolution are work-unit templates with timeline dependencies.
struct ModelTemplate {
    ModelKind kind = ModelKind::tgcn;
    std::uint32_t gcn_layers = 1;
    std::uint32_t hidden_dim = 16;
    double recurrent_coeff = 6.0;  // node-level cell: coeff * n * hidden
    bool weight_evolution = false; // weights advanced by a cell per snapshot
    double evolution_coeff = 6.0;  // coeff * F_in * F_out per snapshot and layer
    bool weight_reuse_allowed = true;
    double backward_multiplier = 2.0;

    static ModelTemplate make(ModelKind kind, std::uint32_t hidden_dim = 16);
    void validate() const;
};

struct ResourceModel {
    std::uint32_t host_workers = 2;
    double transfer_bandwidth = 4096.0;   // bytes per time unit
    double transfer_latency = 20.0;       // time units per transfer
    double compute_throughput = 1024.0;   // work units per time unit
    std::uint64_t device_memory = 1ull << 30;
    double kernel_launch = 4.0;           // time units per kernel
    double host_bandwidth = 65536.0;      // bytes per time unit packed by one worker
    double decide_cost = 8.0;

    void validate() const;
};

enum class ReuseMode { off, inter_frame, full };

const char* to_string(ReuseMode mode) noexcept;
ReuseMode parse_reuse(const std::string& name);

struct SimConfig {
    ModelTemplate model;
    ResourceModel resources;
    ExecConfig exec;
    std::size_t frame_size = 16;
    std::size_t stride = 1;
    std::vector<std::uint32_t> candidates = kDefaultCandidates;
    std::uint32_t preparing_epochs = 2;
    std::uint32_t training_epochs = 2;
    ReuseMode reuse = ReuseMode::full;
    bool tuner = true;
    std::uint32_t forced_s_per = 0;  // nonzero pins every frame, bypassing the tuner
    std::uint64_t seed = 0;
    bool baseline = false;           // one-snapshot, COO shipping, no reuse
    bool baseline_async = true;

    void validate() const;
};

enum class Resource { host, transfer, compute };
enum class EventKind { extract, decide, prepare, transfer, gcn, recurrent, weight_evolution };

const char* to_string(Resource r) noexcept;
const char* to_string(EventKind k) noexcept;

struct Event {
    std::size_t id = 0;
    Resource resource = Resource::host;
    std::uint32_t lane = 0;
    EventKind kind = EventKind::prepare;
    std::uint32_t epoch = 0;
    std::size_t frame = 0;
    std::size_t partition = 0;  // running partition number within the run
    std::size_t first_snapshot = 0;
    std::size_t snapshot_count = 0;
    std::uint32_t layer = 0;
    double start = 0.0;
    double end = 0.0;
    double work = 0.0;
    std::uint64_t bytes = 0;
    std::vector<std::size_t> deps;

    // transfer breakdown
    std::uint64_t adjacency_entries = 0;
    std::uint64_t feature_bytes = 0;
    std::uint64_t host_hit_bytes = 0;
    std::uint64_t plain_adjacency_bytes = 0;  // same snapshots shipped whole

    // compute waiting on the transfer's own duration
    double transfer_wait = 0.0;

    double duration() const noexcept { return end - start; }
};

struct TransferLedger {
    std::uint64_t overlap_adj = 0;
    std::uint64_t exclusive_adj = 0;
    std::uint64_t snapshot_adj = 0;
    std::uint64_t features = 0;
    std::uint64_t reuse_host_hits = 0;
    std::uint64_t layer0_adjacency = 0;  // attribution, already inside the above

    std::uint64_t adjacency() const noexcept { return overlap_adj + exclusive_adj + snapshot_adj; }
    std::uint64_t total() const noexcept { return adjacency() + features + reuse_host_hits; }
    TransferLedger& operator+=(const TransferLedger& o);
};

struct Timeline {
    std::vector<Event> events;
    std::vector<double> epoch_start;
    std::vector<double> epoch_end;
    std::vector<TransferLedger> epoch_ledger;
    std::uint32_t preparing_epochs = 0;
    std::uint32_t host_workers = 1;
    double stall_total = 0.0;

    std::vector<double> epoch_times() const;
    TransferLedger ledger() const;
};

/// Everything the preparing epochs leave behind for the partition-wise ones.
struct Preparation {
    std::vector<Frame> frames;
    std::vector<FrameObservation> observations;  // one per frame
    std::uint64_t peak_one_snapshot = 0;
    DecompositionMemo memo;
    // per frame and candidate: the partitions' shipping structures
    std::vector<std::map<std::uint32_t, std::vector<DecompositionMemo::Value>>> partitions;
    std::vector<DecompositionMemo::Value> singletons;  // per snapshot

    std::size_t prepared_sets() const;
};

struct SimResult {
    SimConfig config;
    Timeline timeline;
    Preparation preparation;
    std::vector<TunerDecision> decisions;  // per frame; empty for the baseline
    std::vector<DenseMatrix> final_hidden;  // per snapshot, last epoch
    CacheCounters cache;
    std::uint64_t cache_reallocations = 0;
    AccessStats access;                     // aggregation kernels of training epochs
    std::uint64_t max_device_bytes = 0;
};

/// Per-layer weights; EvolveGCN carries one set per snapshot.
using ModelWeights = std::vector<std::vector<GcnWeights>>;
ModelWeights make_weights(const ModelTemplate& model, std::uint32_t feature_dim,
                          std::size_t snapshots, std::uint64_t seed);

/// One-snapshot-at-a-time execution of the GCN stages with the oracle
/// aggregation and a naive GEMM.
std::vector<DenseMatrix> sequential_reference(const SnapshotSequence& seq,
                                              const ModelTemplate& model,
                                              const ModelWeights& weights);

/// Preparing epochs alone: one-snapshot training with asynchronous
/// transfer, statistics per frame, and decompositions for every candidate.
Preparation run_preparing_epochs(const SnapshotSequence& seq, const SimConfig& cfg);

/// Full run: preparing epochs, then partition-wise epochs (or the
/// one-snapshot baseline when cfg.baseline is set).
SimResult run_training(const SnapshotSequence& seq, const SimConfig& cfg,
                       const TunerProfile* profile);

/// Throws SimulationError naming the first broken dependency, overlap on a
/// serial resource, or ledger mismatch.
void check_timeline(const SimResult& result);

struct ResourceShare {
    std::map<std::string, double> busy;  // category -> fraction of the window
    double idle = 1.0;
};

struct Report {
    std::string mode;
    double window_start = 0.0;
    double window_end = 0.0;
    std::vector<double> epoch_times;
    double mean_epoch_time = 0.0;       // partition-wise epochs
    std::map<std::string, ResourceShare> resources;
    double transfer_fraction = 0.0;
    double compute_fraction = 0.0;
    double stall_total = 0.0;
    TransferLedger ledger;
    CacheCounters cache;
    AccessStats access;
};

/// Breakdown over the partition-wise epochs.
Report make_report(const SimResult& result);
std::string report_json(const Report& report, const SimResult& result);
std::string summary_csv(const Report& report);
std::string timeline_json(const SimResult& result);

}  // namespace pipad
