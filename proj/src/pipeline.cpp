#include "pipad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pipad/errors.hpp"
#include "pipad/rng.hpp"

namespace pipad {

using nlohmann::json;

const char* to_string(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::tgcn: return "tgcn";
    case ModelKind::mpnn_lstm: return "mpnn_lstm";
    case ModelKind::evolvegcn: return "evolvegcn";
    }
    return "tgcn";
}

ModelKind parse_model(const std::string& name)
{
    if (name == "tgcn") return ModelKind::tgcn;
    if (name == "mpnn_lstm") return ModelKind::mpnn_lstm;
    if (name == "evolvegcn") return ModelKind::evolvegcn;
    throw ArgumentError("unknown model '" + name + "' (tgcn, mpnn_lstm, evolvegcn)");
}

const char* to_string(ReuseMode mode) noexcept
{
    switch (mode) {
    case ReuseMode::off: return "off";
    case ReuseMode::inter_frame: return "inter_frame";
    case ReuseMode::full: return "full";
    }
    return "off";
}

ReuseMode parse_reuse(const std::string& name)
{
    if (name == "off") return ReuseMode::off;
    if (name == "inter_frame") return ReuseMode::inter_frame;
    if (name == "full") return ReuseMode::full;
    throw ArgumentError("unknown reuse mode '" + name + "' (off, inter_frame, full)");
}

const char* to_string(Resource r) noexcept
{
    switch (r) {
    case Resource::host: return "host";
    case Resource::transfer: return "transfer";
    case Resource::compute: return "compute";
    }
    return "host";
}

const char* to_string(EventKind k) noexcept
{
    switch (k) {
    case EventKind::extract: return "extract";
    case EventKind::decide: return "decide";
    case EventKind::prepare: return "prepare";
    case EventKind::transfer: return "transfer";
    case EventKind::gcn: return "gcn";
    case EventKind::recurrent: return "recurrent";
    case EventKind::weight_evolution: return "weight_evolution";
    }
    return "prepare";
}

ModelTemplate ModelTemplate::make(ModelKind kind, std::uint32_t hidden_dim)
{
    ModelTemplate m;
    m.kind = kind;
    m.hidden_dim = hidden_dim;
    switch (kind) {
    case ModelKind::tgcn:
        // GCNs inside a GRU: one graph layer, three gates along the timeline
        m.gcn_layers = 1;
        m.recurrent_coeff = 3.0;
        break;
    case ModelKind::mpnn_lstm:
        // two-layer GCN feeding two stacked LSTMs
        m.gcn_layers = 2;
        m.recurrent_coeff = 8.0;
        break;
    case ModelKind::evolvegcn:
        // the recurrence runs over the GCN weights of both layers
        m.gcn_layers = 2;
        m.weight_evolution = true;
        m.weight_reuse_allowed = false;
        m.evolution_coeff = 6.0;
        m.recurrent_coeff = 0.0;
        break;
    }
    return m;
}

void ModelTemplate::validate() const
{
    if (gcn_layers == 0) throw ConfigurationError("model needs at least one GCN layer");
    if (hidden_dim == 0) throw ConfigurationError("hidden_dim must be positive");
    if (recurrent_coeff < 0 || evolution_coeff < 0 || backward_multiplier < 0) {
        throw ConfigurationError("model cost coefficients must be non-negative");
    }
    if (weight_evolution && weight_reuse_allowed) {
        throw ConfigurationError("evolving weights cannot be shared across snapshots");
    }
}

void ResourceModel::validate() const
{
    auto positive = [](double v) { return v > 0 && !std::isnan(v); };
    if (host_workers == 0) throw ConfigurationError("host_workers must be positive");
    if (!positive(transfer_bandwidth)) throw ConfigurationError("transfer_bandwidth must be positive");
    if (!positive(compute_throughput)) throw ConfigurationError("compute_throughput must be positive");
    if (!positive(host_bandwidth)) throw ConfigurationError("host_bandwidth must be positive");
    if (device_memory == 0) throw ConfigurationError("device_memory must be positive");
    if (transfer_latency < 0 || kernel_launch < 0 || decide_cost < 0) {
        throw ConfigurationError("latencies must be non-negative");
    }
}

void SimConfig::validate() const
{
    model.validate();
    resources.validate();
    exec.validate();
    if (frame_size == 0) throw ArgumentError("frame size must be positive");
    if (stride == 0) throw ArgumentError("stride must be positive");
    if (candidates.empty()) throw ArgumentError("candidate list is empty");
    for (auto c : candidates) {
        if (c == 0) throw ArgumentError("candidates must be positive");
    }
}

TransferLedger& TransferLedger::operator+=(const TransferLedger& o)
{
    overlap_adj += o.overlap_adj;
    exclusive_adj += o.exclusive_adj;
    snapshot_adj += o.snapshot_adj;
    features += o.features;
    reuse_host_hits += o.reuse_host_hits;
    layer0_adjacency += o.layer0_adjacency;
    return *this;
}

std::vector<double> Timeline::epoch_times() const
{
    std::vector<double> out;
    for (std::size_t e = 0; e < epoch_start.size(); ++e) out.push_back(epoch_end[e] - epoch_start[e]);
    return out;
}

TransferLedger Timeline::ledger() const
{
    TransferLedger total;
    for (const auto& l : epoch_ledger) total += l;
    return total;
}

std::size_t Preparation::prepared_sets() const
{
    std::size_t n = 0;
    for (const auto& per_frame : partitions) n += per_frame.size();
    return n;
}

ModelWeights make_weights(const ModelTemplate& model, std::uint32_t feature_dim,
                          std::size_t snapshots, std::uint64_t seed)
{
    ModelWeights weights;
    const std::size_t copies = model.weight_evolution ? std::max<std::size_t>(snapshots, 1) : 1;
    for (std::uint32_t l = 0; l < model.gcn_layers; ++l) {
        const std::uint32_t in = l == 0 ? feature_dim : model.hidden_dim;
        const std::uint32_t out = model.hidden_dim;
        std::vector<GcnWeights> layer;
        for (std::size_t c = 0; c < copies; ++c) {
            Rng rng(mix_seed(seed, 0x5eed0000ull + l * 1000003ull + c));
            GcnWeights w{DenseMatrix(in, out), std::vector<float>(out)};
            // positive entries keep outputs away from zero
            for (auto& v : w.w.data()) v = (0.5f + uniform_unit(rng)) / static_cast<float>(in);
            for (auto& v : w.b) v = 0.1f * uniform_unit(rng);
            layer.push_back(std::move(w));
        }
        weights.push_back(std::move(layer));
    }
    return weights;
}

namespace {

constexpr std::uint64_t kFloatBytes = 4;

const GcnWeights& weights_for(const ModelWeights& w, std::uint32_t layer, std::size_t t)
{
    const auto& l = w.at(layer);
    return l.size() == 1 ? l[0] : l.at(t);
}

DenseMatrix naive_update(const DenseMatrix& a, const GcnWeights& w)
{
    DenseMatrix out(a.rows(), w.out_dim());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < w.out_dim(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < w.in_dim(); ++k) {
                acc += static_cast<double>(a(r, k)) * static_cast<double>(w.w(k, c));
            }
            out(r, c) = static_cast<float>(acc + static_cast<double>(w.b[c]));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Event scheduling

class Scheduler {
public:
    Scheduler(Timeline& tl, std::uint32_t host_workers) : tl_(tl), host_free_(host_workers, 0.0)
    {
        tl_.host_workers = host_workers;
    }

    void begin_epoch()
    {
        floor_ = horizon_;
        tl_.epoch_start.push_back(floor_);
        tl_.epoch_ledger.emplace_back();
        epoch_ = static_cast<std::uint32_t>(tl_.epoch_start.size() - 1);
    }

    void end_epoch() { tl_.epoch_end.push_back(std::max(horizon_, floor_)); }

    std::uint32_t epoch() const noexcept { return epoch_; }
    TransferLedger& ledger() { return tl_.epoch_ledger.back(); }

    std::size_t add(Event e, double duration, std::optional<std::size_t> transfer_dep = {})
    {
        double ready = floor_;
        double ready_other = floor_;
        for (auto d : e.deps) {
            ready = std::max(ready, tl_.events[d].end);
            if (!transfer_dep || d != *transfer_dep) ready_other = std::max(ready_other, tl_.events[d].end);
        }
        e.epoch = epoch_;
        double start = ready;
        switch (e.resource) {
        case Resource::host: {
            auto lane = std::min_element(host_free_.begin(), host_free_.end()) - host_free_.begin();
            e.lane = static_cast<std::uint32_t>(lane);
            start = std::max(ready, host_free_[lane]);
            host_free_[lane] = start + duration;
            break;
        }
        case Resource::transfer:
            start = std::max(ready, transfer_free_);
            transfer_free_ = start + duration;
            break;
        case Resource::compute:
            start = std::max(ready, compute_free_);
            if (transfer_dep) {
                const auto& t = tl_.events[*transfer_dep];
                ready_other = std::max(ready_other, compute_free_);
                e.transfer_wait = std::max(0.0, t.end - std::max(ready_other, t.start));
                tl_.stall_total += e.transfer_wait;
            }
            compute_free_ = start + duration;
            break;
        }
        e.start = start;
        e.end = start + duration;
        e.id = tl_.events.size();
        horizon_ = std::max(horizon_, e.end);
        tl_.events.push_back(std::move(e));
        return tl_.events.back().id;
    }

private:
    Timeline& tl_;
    std::vector<double> host_free_;
    double transfer_free_ = 0.0;
    double compute_free_ = 0.0;
    double floor_ = 0.0;
    double horizon_ = 0.0;
    std::uint32_t epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Partition planning: what ships, what runs, and what it costs

enum class Mode { baseline, one_snapshot, partitioned };

struct Stage {
    EventKind kind = EventKind::gcn;
    std::uint32_t layer = 0;
    double work = 0.0;
    std::uint32_t launches = 0;
};

struct PartitionPlan {
    std::vector<std::size_t> snapshots;
    std::vector<bool> cached;
    std::vector<DecompositionMemo::Value> layer0_structs;
    DecompositionMemo::Value full_struct;
    std::vector<DecompositionMemo::Value> shipped;
    TransferLedger bytes;  // categories for this partition
    std::uint64_t adjacency_entries = 0;
    std::uint64_t plain_adjacency_bytes = 0;
    std::vector<Stage> stages;
    AccessStats access;

    std::uint64_t transfer_bytes() const { return bytes.total(); }
};

class Simulation {
public:
    Simulation(const SnapshotSequence& seq, const SimConfig& cfg, const TunerProfile* profile)
        : seq_(seq), cfg_(cfg), profile_(profile), sched_(result_.timeline, cfg.resources.host_workers)
    {
        cfg_.validate();
        result_.config = cfg_;
        result_.timeline.preparing_epochs = cfg_.preparing_epochs;
        if (!seq_.empty()) {
            seq_.validate();
            n_ = seq_.node_count();
            f_ = seq_.feature_dim();
            weights_ = make_weights(cfg_.model, f_, seq_.length(), cfg_.seed);
            result_.final_hidden.assign(seq_.length(), DenseMatrix());
        }
    }

    Preparation& prepare();
    SimResult run();

private:
    // structures
    DecompositionMemo::Value structure_for(const std::vector<std::size_t>& idx);
    void ship(PartitionPlan& plan, const DecompositionMemo::Value& s) const;
    const AccessStats& counted(const OverlapDecomposition& d, std::uint32_t dim);
    const AccessStats& counted_rows(std::size_t t, std::uint32_t dim);
    double stage_duration(const Stage& s) const;

    PartitionPlan plan_partition(const std::vector<std::size_t>& idx,
                                 const DecompositionMemo::Value& full, Mode mode,
                                 const std::vector<bool>& cached);
    std::uint64_t footprint(std::size_t t) const;
    std::uint64_t entry_bytes() const { return static_cast<std::uint64_t>(n_) * f_ * kFloatBytes; }

    TunerDecision make_decision(std::size_t f);
    std::vector<bool> cache_state(const std::vector<std::size_t>& idx) const;
    void plan_device(std::size_t next, const Frame& current);

    struct Chain {
        std::optional<std::size_t> recurrent;
        std::vector<std::optional<std::size_t>> evolution;
    };
    void run_partition(PartitionPlan plan, Mode mode, std::size_t frame, Chain& chain,
                       std::optional<std::size_t> decide_event, bool record_access);
    void execute_math(const PartitionPlan& plan, Mode mode);

    void preparing_epoch(std::uint32_t e);
    void training_epoch(bool first);
    void baseline_epoch();

    const SnapshotSequence& seq_;
    SimConfig cfg_;
    const TunerProfile* profile_;
    SimResult result_;
    Scheduler sched_;
    Preparation& prep_ = result_.preparation;
    ModelWeights weights_;
    std::uint32_t n_ = 0;
    std::uint32_t f_ = 0;
    bool prepared_ = false;

    AggCache cache_;
    ReusePlanner planner_;
    std::vector<std::optional<std::size_t>> decide_events_;
    std::map<std::pair<const OverlapDecomposition*, std::uint32_t>, AccessStats> counts_;
    std::map<std::pair<std::size_t, std::uint32_t>, AccessStats> row_counts_;
    std::vector<std::size_t> last_compute_;  // last compute event per partition in the epoch
};

DecompositionMemo::Value Simulation::structure_for(const std::vector<std::size_t>& idx)
{
    return prep_.memo.get_or_compute(idx, [&] {
        std::vector<Csr> adj;
        for (auto t : idx) adj.push_back(seq_[t].adjacency);
        auto dec = decompose(adj, cfg_.exec.slice_cap, idx.front());
        if (dec.shipped_bytes() <= plain_shipped_bytes(adj, cfg_.exec.slice_cap)) return dec;
        return undecomposed(adj, cfg_.exec.slice_cap, idx.front());
    });
}

void Simulation::ship(PartitionPlan& plan, const DecompositionMemo::Value& s) const
{
    plan.shipped.push_back(s);
    const auto bytes = s->shipped_bytes();
    plan.adjacency_entries += bytes / kFloatBytes;
    std::vector<Csr> adj;
    for (std::size_t i = 0; i < s->s_per(); ++i) adj.push_back(seq_[s->first_snapshot + i].adjacency);
    plan.plain_adjacency_bytes += plain_shipped_bytes(adj, cfg_.exec.slice_cap);
    if (s->s_per() == 1 || s->a_over.nnz() == 0) {
        plan.bytes.snapshot_adj += bytes;
        return;
    }
    const auto over = storage_cost(s->a_over) * kFloatBytes;
    plan.bytes.overlap_adj += over;
    plan.bytes.exclusive_adj += bytes - over;
}

const AccessStats& Simulation::counted(const OverlapDecomposition& d, std::uint32_t dim)
{
    auto key = std::make_pair(&d, dim);
    auto it = counts_.find(key);
    if (it == counts_.end()) it = counts_.emplace(key, model_aggregation(d, dim, cfg_.exec)).first;
    return it->second;
}

const AccessStats& Simulation::counted_rows(std::size_t t, std::uint32_t dim)
{
    auto key = std::make_pair(t, dim);
    auto it = row_counts_.find(key);
    if (it == row_counts_.end()) {
        it = row_counts_.emplace(key, model_row_per_warp(seq_[t].adjacency, dim, cfg_.exec)).first;
    }
    return it->second;
}

double Simulation::stage_duration(const Stage& s) const
{
    const auto& r = cfg_.resources;
    return s.work * (1.0 + cfg_.model.backward_multiplier) / r.compute_throughput +
           s.launches * r.kernel_launch;
}

PartitionPlan Simulation::plan_partition(const std::vector<std::size_t>& idx,
                                         const DecompositionMemo::Value& full, Mode mode,
                                         const std::vector<bool>& cached)
{
    const auto& model = cfg_.model;
    const std::size_t count = idx.size();
    PartitionPlan plan;
    plan.snapshots = idx;
    plan.cached = cached;
    plan.full_struct = full;

    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < count; ++i) {
        if (!cached[i]) fresh.push_back(idx[i]);
    }

    // adjacency
    if (mode == Mode::baseline) {
        for (auto t : idx) {
            const auto entries = storage_cost(StorageFormat::coo, seq_[t].adjacency.nnz(), n_, 0);
            plan.adjacency_entries += entries;
            plan.bytes.snapshot_adj += entries * kFloatBytes;
            plan.plain_adjacency_bytes += entries * kFloatBytes;
        }
        plan.bytes.layer0_adjacency = plan.bytes.snapshot_adj;
    } else {
        if (fresh.size() == count) {
            plan.layer0_structs.push_back(full);
        } else {
            for (auto t : fresh) plan.layer0_structs.push_back(prep_.singletons[t]);
        }
        std::uint64_t layer0_bytes = 0;
        for (const auto& s : plan.layer0_structs) layer0_bytes += s->shipped_bytes();
        if (model.gcn_layers > 1) {
            ship(plan, full);
        } else {
            for (const auto& s : plan.layer0_structs) ship(plan, s);
        }
        plan.bytes.layer0_adjacency = layer0_bytes;
    }
    plan.bytes.features = fresh.size() * entry_bytes();
    for (std::size_t i = 0; i < count; ++i) {
        if (cached[i]) plan.bytes.reuse_host_hits += entry_bytes();  // until fetched
    }

    // compute stages in issue order
    const std::uint32_t hidden = model.hidden_dim;
    const bool reuse_w = model.weight_reuse_allowed;
    for (std::uint32_t l = 0; l < model.gcn_layers; ++l) {
        const std::uint32_t in = l == 0 ? f_ : hidden;
        if (model.weight_evolution) {
            plan.stages.push_back({EventKind::weight_evolution, l,
                                   model.evolution_coeff * in * hidden * static_cast<double>(count),
                                   static_cast<std::uint32_t>(count)});
        }
        Stage gcn{EventKind::gcn, l, 0.0, 0};
        if (mode == Mode::baseline) {
            for (auto t : (l == 0 ? fresh : idx)) {
                const auto& st = counted_rows(t, in);
                gcn.work += st.work_units;
                gcn.launches += 1;
                plan.access += st;
            }
        } else if (l == 0) {
            for (const auto& s : plan.layer0_structs) {
                const auto& st = counted(*s, in);
                gcn.work += st.work_units;
                gcn.launches += 1;
                plan.access += st;
            }
        } else {
            const auto& st = counted(*full, in);
            gcn.work += st.work_units;
            gcn.launches += 1;
            plan.access += st;
        }
        gcn.work += model_update(n_, count, in, hidden, cfg_.exec, reuse_w).work_units;
        gcn.launches += 1;
        plan.stages.push_back(gcn);
    }
    if (!model.weight_evolution && model.recurrent_coeff > 0) {
        plan.stages.push_back({EventKind::recurrent, 0,
                               model.recurrent_coeff * n_ * hidden * static_cast<double>(count),
                               static_cast<std::uint32_t>(count)});
    }
    return plan;
}

std::uint64_t Simulation::footprint(std::size_t t) const
{
    const auto& model = cfg_.model;
    const std::uint64_t n = n_;
    std::uint64_t bytes = storage_cost(StorageFormat::coo, seq_[t].adjacency.nnz(), n, 0) * kFloatBytes;
    bytes += n * f_ * kFloatBytes;
    for (std::uint32_t l = 0; l < model.gcn_layers; ++l) {
        const std::uint64_t in = l == 0 ? f_ : model.hidden_dim;
        // aggregation result and layer output, kept for the backward pass
        bytes += 2 * n * (in + model.hidden_dim) * kFloatBytes;
        bytes += (in + 1) * model.hidden_dim * kFloatBytes;
    }
    bytes += 4 * n * model.hidden_dim * kFloatBytes;  // recurrent state and gates
    return bytes;
}

std::vector<bool> Simulation::cache_state(const std::vector<std::size_t>& idx) const
{
    std::vector<bool> out;
    for (auto t : idx) {
        const AggCacheKey key{t, 0, 0};
        out.push_back(cfg_.reuse != ReuseMode::off && (cache_.on_host(key) || cache_.on_device(key)));
    }
    return out;
}

Preparation& Simulation::prepare()
{
    if (prepared_) return prep_;
    prepared_ = true;
    if (seq_.empty()) return prep_;

    prep_.frames = frames(seq_.length(), cfg_.frame_size, cfg_.stride);
    for (std::size_t t = 0; t < seq_.length(); ++t) prep_.singletons.push_back(structure_for({t}));
    for (std::size_t t = 0; t < seq_.length(); ++t) {
        prep_.peak_one_snapshot = std::max(prep_.peak_one_snapshot, footprint(t));
    }
    if (prep_.peak_one_snapshot > cfg_.resources.device_memory) {
        throw CapacityError("one snapshot needs " + std::to_string(prep_.peak_one_snapshot) +
                            " bytes of device memory; the device has " +
                            std::to_string(cfg_.resources.device_memory));
    }

    if (!cfg_.baseline) {
        std::vector<std::uint32_t> cands = cfg_.candidates;
        if (cfg_.forced_s_per) cands.push_back(cfg_.forced_s_per);
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

        prep_.partitions.resize(prep_.frames.size());
        for (std::size_t f = 0; f < prep_.frames.size(); ++f) {
            const auto& frame = prep_.frames[f];
            for (auto c : cands) {
                if (c > frame.size && c != cfg_.forced_s_per) continue;
                auto& list = prep_.partitions[f][c];
                for (const auto& p : partitions(frame, c)) list.push_back(structure_for(p.snapshot_indices()));
            }

            FrameObservation obs;
            obs.peak_mem_one_snapshot = prep_.peak_one_snapshot;
            obs.aggregation_bytes_per_snapshot = entry_bytes();
            obs.feature_dim = f_;
            std::vector<Csr> adj;
            for (std::size_t t = frame.start; t < frame.end(); ++t) {
                const auto plan = plan_partition({t}, prep_.singletons[t], Mode::one_snapshot, {false});
                obs.per_snapshot_bytes.push_back(plan.transfer_bytes());
                double compute = 0.0;
                for (const auto& s : plan.stages) compute += stage_duration(s);
                obs.per_snapshot_compute.push_back(compute);
                adj.push_back(seq_[t].adjacency);
            }
            if (adj.size() >= 2) obs.frame_or_stats = overlap_rate(adj, cfg_.exec.slice_cap);
            prep_.observations.push_back(std::move(obs));
        }
    }
    return prep_;
}

TunerDecision Simulation::make_decision(std::size_t f)
{
    const auto& frame = prep_.frames[f];
    TunerDecision d;
    if (cfg_.forced_s_per || !cfg_.tuner) {
        d.s_per = cfg_.forced_s_per ? cfg_.forced_s_per : 1;
        d.upper_bound = d.s_per;
    } else {
        if (!profile_) throw ConfigurationError("tuner enabled but no profile given; build one first");
        FrameObservation obs = prep_.observations[f];
        for (const auto& [c, structs] : prep_.partitions[f]) {
            const auto parts = partitions(frame, c);
            auto& bytes = obs.partition_bytes[c];
            auto& compute = obs.partition_compute[c];
            for (std::size_t j = 0; j < parts.size(); ++j) {
                const auto idx = parts[j].snapshot_indices();
                const auto plan = plan_partition(idx, structs[j], Mode::partitioned, cache_state(idx));
                bytes.push_back(plan.transfer_bytes());
                double work = 0.0;
                for (const auto& s : plan.stages) work += stage_duration(s);
                compute.push_back(work);
            }
        }
        d = decide(frame, obs, *profile_, cfg_.resources.device_memory, cfg_.candidates);
    }
    return d;
}

void Simulation::plan_device(std::size_t next, const Frame& current)
{
    const auto& frame = prep_.frames[next];
    const std::vector<FrameMemStats> stats{
        {frame.start, result_.decisions[next].s_per * prep_.peak_one_snapshot}};
    // the frame just processed left its layer-0 results on the device
    std::vector<std::size_t> resident;
    for (std::size_t t = current.start; t < current.end(); ++t) resident.push_back(t);
    const auto plan = planner_.plan_next_frame(frame, stats, cfg_.resources.device_memory, resident,
                                               entry_bytes(), 0);
    cache_.retain(plan.retention, plan.buffer_bytes);
    result_.cache_reallocations = planner_.reallocations();
}

void Simulation::execute_math(const PartitionPlan& plan, Mode mode)
{
    const auto& model = cfg_.model;
    const std::size_t count = plan.snapshots.size();

    // layer 0 aggregation: cache, structures, or the oracle for the baseline
    std::vector<std::shared_ptr<const DenseMatrix>> agg(count);
    if (mode == Mode::baseline) {
        for (std::size_t i = 0; i < count; ++i) {
            const auto t = plan.snapshots[i];
            agg[i] = std::make_shared<const DenseMatrix>(
                aggregate_reference(seq_[t].adjacency, seq_[t].features));
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            if (!plan.cached[i]) continue;
            const AggCacheKey key{plan.snapshots[i], 0, 0};
            agg[i] = cache_.fetch(key).matrix;
            if (!agg[i]) throw SimulationError("planned cache hit vanished");
        }
        for (const auto& s : plan.layer0_structs) {
            std::vector<DenseMatrix> feats;
            for (std::size_t k = 0; k < s->s_per(); ++k) feats.push_back(seq_[s->first_snapshot + k].features);
            auto out = aggregate_parallel(*s, CoalescentFeatures::coalesce(feats), cfg_.exec);
            for (std::size_t k = 0; k < s->s_per(); ++k) {
                const auto t = s->first_snapshot + k;
                const auto i = static_cast<std::size_t>(
                    std::find(plan.snapshots.begin(), plan.snapshots.end(), t) - plan.snapshots.begin());
                agg[i] = std::make_shared<const DenseMatrix>(std::move(out.outputs[k]));
                const AggCacheKey key{t, 0, 0};
                if (cfg_.reuse != ReuseMode::off && mode != Mode::baseline &&
                    (mode == Mode::partitioned || cfg_.reuse == ReuseMode::full) && !cache_.on_host(key)) {
                    cache_.record(key, agg[i], Tier::host);
                }
            }
        }
    }

    std::vector<DenseMatrix> layer_in;
    for (std::uint32_t l = 0; l < model.gcn_layers; ++l) {
        std::vector<DenseMatrix> aggregated;
        if (l == 0) {
            for (const auto& a : agg) aggregated.push_back(*a);
        } else if (mode == Mode::baseline) {
            for (std::size_t i = 0; i < count; ++i) {
                aggregated.push_back(aggregate_reference(seq_[plan.snapshots[i]].adjacency, layer_in[i]));
            }
        } else {
            auto out = aggregate_parallel(*plan.full_struct, CoalescentFeatures::coalesce(layer_in), cfg_.exec);
            aggregated = std::move(out.outputs);
        }
        std::vector<GcnWeights> w;
        if (model.weight_evolution) {
            for (auto t : plan.snapshots) w.push_back(weights_for(weights_, l, t));
        } else {
            w.push_back(weights_for(weights_, l, 0));
        }
        auto upd = update_parallel(aggregated, w, cfg_.exec, !model.weight_evolution);
        layer_in = std::move(upd.outputs);
    }
    for (std::size_t i = 0; i < count; ++i) result_.final_hidden[plan.snapshots[i]] = std::move(layer_in[i]);
}

void Simulation::run_partition(PartitionPlan plan, Mode mode, std::size_t frame, Chain& chain,
                               std::optional<std::size_t> decide_event, bool record_access)
{
    const auto& r = cfg_.resources;
    const std::size_t pnum = last_compute_.size();

    // cached results: the tier decides what the channel carries
    plan.bytes.reuse_host_hits = 0;
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < plan.snapshots.size(); ++i) {
        if (!plan.cached[i]) continue;
        const AggCacheKey key{plan.snapshots[i], 0, 0};
        if (!cache_.on_device(key)) hits += entry_bytes();
    }
    plan.bytes.reuse_host_hits = hits;

    Event base;
    base.frame = frame;
    base.partition = pnum;
    base.first_snapshot = plan.snapshots.front();
    base.snapshot_count = plan.snapshots.size();

    const std::uint64_t bytes = plan.transfer_bytes();
    Event prep = base;
    prep.resource = Resource::host;
    prep.kind = EventKind::prepare;
    prep.bytes = bytes;
    if (decide_event) prep.deps.push_back(*decide_event);
    const auto prep_id = sched_.add(prep, static_cast<double>(bytes) / r.host_bandwidth);

    Event tr = base;
    tr.resource = Resource::transfer;
    tr.kind = EventKind::transfer;
    tr.bytes = bytes;
    tr.adjacency_entries = plan.adjacency_entries;
    tr.feature_bytes = plan.bytes.features;
    tr.host_hit_bytes = plan.bytes.reuse_host_hits;
    tr.plain_adjacency_bytes = plan.plain_adjacency_bytes;
    tr.deps.push_back(prep_id);
    const bool sync = mode == Mode::baseline && !cfg_.baseline_async;
    if (sync && pnum >= 1) tr.deps.push_back(last_compute_[pnum - 1]);
    if (pnum >= 2) tr.deps.push_back(last_compute_[pnum - 2]);  // double buffering
    const double tr_time = bytes > 0 ? static_cast<double>(bytes) / r.transfer_bandwidth + r.transfer_latency : 0.0;
    const auto tr_id = sched_.add(tr, tr_time);

    auto& ledger = sched_.ledger();
    ledger += plan.bytes;

    std::optional<std::size_t> prev;
    std::optional<std::size_t> last_gcn;
    bool first = true;
    if (chain.evolution.size() < cfg_.model.gcn_layers) chain.evolution.resize(cfg_.model.gcn_layers);
    std::vector<std::optional<std::size_t>> evolution_this(cfg_.model.gcn_layers);
    for (const auto& s : plan.stages) {
        Event ev = base;
        ev.resource = Resource::compute;
        ev.kind = s.kind;
        ev.layer = s.layer;
        ev.work = s.work;
        if (first) ev.deps.push_back(tr_id);
        if (prev) ev.deps.push_back(*prev);
        if (s.kind == EventKind::weight_evolution && chain.evolution[s.layer]) {
            ev.deps.push_back(*chain.evolution[s.layer]);
        }
        if (s.kind == EventKind::gcn && evolution_this[s.layer]) ev.deps.push_back(*evolution_this[s.layer]);
        if (s.kind == EventKind::recurrent) {
            if (last_gcn) ev.deps.push_back(*last_gcn);
            if (chain.recurrent) ev.deps.push_back(*chain.recurrent);
        }
        std::sort(ev.deps.begin(), ev.deps.end());
        ev.deps.erase(std::unique(ev.deps.begin(), ev.deps.end()), ev.deps.end());
        const auto id = sched_.add(ev, stage_duration(s), first ? std::optional<std::size_t>(tr_id) : std::nullopt);
        first = false;
        prev = id;
        if (s.kind == EventKind::gcn) last_gcn = id;
        if (s.kind == EventKind::weight_evolution) evolution_this[s.layer] = id;
        if (s.kind == EventKind::recurrent) chain.recurrent = id;
    }
    for (std::uint32_t l = 0; l < cfg_.model.gcn_layers; ++l) {
        if (evolution_this[l]) chain.evolution[l] = evolution_this[l];
    }
    last_compute_.push_back(*prev);
    if (record_access) result_.access += plan.access;

    execute_math(plan, mode);
}

void Simulation::preparing_epoch(std::uint32_t e)
{
    sched_.begin_epoch();
    last_compute_.clear();
    if (e == 0) {
        std::uint64_t nnz = 0;
        for (const auto& s : seq_.snapshots) nnz += s.adjacency.nnz();
        Event ex;
        ex.resource = Resource::host;
        ex.kind = EventKind::extract;
        ex.bytes = nnz * 8 * (1 + cfg_.candidates.size());
        sched_.add(ex, static_cast<double>(ex.bytes) / cfg_.resources.host_bandwidth);
    }
    for (std::size_t f = 0; f < prep_.frames.size(); ++f) {
        Chain chain;
        const auto& frame = prep_.frames[f];
        for (std::size_t t = frame.start; t < frame.end(); ++t) {
            auto plan = plan_partition({t}, prep_.singletons[t], Mode::one_snapshot, {false});
            run_partition(std::move(plan), Mode::one_snapshot, f, chain, std::nullopt, false);
        }
    }
    sched_.end_epoch();
}

void Simulation::training_epoch(bool first)
{
    sched_.begin_epoch();
    last_compute_.clear();
    if (cfg_.reuse == ReuseMode::inter_frame) cache_ = AggCache();

    for (std::size_t f = 0; f < prep_.frames.size(); ++f) {
        const auto& frame = prep_.frames[f];
        if (first && !result_.decisions[f].s_per) {
            result_.decisions[f] = make_decision(f);
        }
        std::optional<std::size_t> decide_event;
        if (first) {
            if (!decide_events_[f]) {
                Event d;
                d.resource = Resource::host;
                d.kind = EventKind::decide;
                d.frame = f;
                d.first_snapshot = frame.start;
                d.snapshot_count = frame.size;
                decide_events_[f] = sched_.add(d, cfg_.resources.decide_cost);
            }
            decide_event = decide_events_[f];
        }

        const auto n_per = result_.decisions[f].s_per;
        const std::uint64_t used = n_per * prep_.peak_one_snapshot + cache_.device_allocated();
        result_.max_device_bytes = std::max(result_.max_device_bytes, used);
        if (used > cfg_.resources.device_memory) {
            throw SimulationError("frame " + std::to_string(f) + " with s_per=" + std::to_string(n_per) +
                                  " needs " + std::to_string(used) + " bytes of device memory");
        }

        auto it = prep_.partitions[f].find(n_per);
        if (it == prep_.partitions[f].end()) {
            throw SimulationError("no prepared partitions for s_per=" + std::to_string(n_per));
        }
        const auto parts = partitions(frame, n_per);
        Chain chain;
        for (std::size_t j = 0; j < parts.size(); ++j) {
            const auto idx = parts[j].snapshot_indices();
            auto plan = plan_partition(idx, it->second[j], Mode::partitioned, cache_state(idx));
            run_partition(std::move(plan), Mode::partitioned, f, chain, decide_event, true);
        }

        if (cfg_.reuse != ReuseMode::off) {
            std::optional<std::size_t> next;
            if (f + 1 < prep_.frames.size()) next = f + 1;
            else if (cfg_.reuse == ReuseMode::full) next = 0;
            if (next) {
                if (!result_.decisions[*next].s_per) result_.decisions[*next] = make_decision(*next);
                plan_device(*next, frame);
            }
        }
    }
    sched_.end_epoch();
}

void Simulation::baseline_epoch()
{
    sched_.begin_epoch();
    last_compute_.clear();
    for (std::size_t f = 0; f < prep_.frames.size(); ++f) {
        Chain chain;
        const auto& frame = prep_.frames[f];
        for (std::size_t t = frame.start; t < frame.end(); ++t) {
            auto plan = plan_partition({t}, prep_.singletons[t], Mode::baseline, {false});
            run_partition(std::move(plan), Mode::baseline, f, chain, std::nullopt,
                          sched_.epoch() >= cfg_.preparing_epochs);
        }
    }
    sched_.end_epoch();
}

SimResult Simulation::run()
{
    prepare();
    if (seq_.empty()) return result_;
    if (cfg_.baseline) {
        for (std::uint32_t e = 0; e < cfg_.preparing_epochs + cfg_.training_epochs; ++e) baseline_epoch();
    } else {
        for (std::uint32_t e = 0; e < cfg_.preparing_epochs; ++e) preparing_epoch(e);
        prep_.memo.freeze();
        result_.decisions.assign(prep_.frames.size(), TunerDecision{0, 0, 0, {}, {}});
        decide_events_.assign(prep_.frames.size(), std::nullopt);
        for (std::uint32_t e = 0; e < cfg_.training_epochs; ++e) training_epoch(e == 0);
    }
    result_.cache = cache_.counters();
    return result_;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::vector<DenseMatrix> sequential_reference(const SnapshotSequence& seq,
                                              const ModelTemplate& model,
                                              const ModelWeights& weights)
{
    std::vector<DenseMatrix> out;
    for (std::size_t t = 0; t < seq.length(); ++t) {
        DenseMatrix h = seq[t].features;
        for (std::uint32_t l = 0; l < model.gcn_layers; ++l) {
            h = naive_update(aggregate_reference(seq[t].adjacency, h), weights_for(weights, l, t));
        }
        out.push_back(std::move(h));
    }
    return out;
}

Preparation run_preparing_epochs(const SnapshotSequence& seq, const SimConfig& cfg)
{
    SimConfig c = cfg;
    c.training_epochs = 0;
    c.baseline = false;
    Simulation sim(seq, c, nullptr);
    return std::move(sim.run().preparation);
}

SimResult run_training(const SnapshotSequence& seq, const SimConfig& cfg, const TunerProfile* profile)
{
    Simulation sim(seq, cfg, profile);
    return sim.run();
}

void check_timeline(const SimResult& result)
{
    const auto& tl = result.timeline;
    const auto fail = [](const std::string& what) { throw SimulationError("timeline check: " + what); };

    for (const auto& e : tl.events) {
        if (e.end < e.start) fail("event " + std::to_string(e.id) + " ends before it starts");
        for (auto d : e.deps) {
            if (d >= e.id) fail("event " + std::to_string(e.id) + " depends on a later event");
            if (tl.events[d].end > e.start + 1e-9) {
                fail("event " + std::to_string(e.id) + " starts before dependency " + std::to_string(d) + " ends");
            }
        }
        if (e.kind == EventKind::recurrent || e.kind == EventKind::weight_evolution) continue;
        // cross-snapshot edges are reserved for recurrent and weight-evolution stages
        for (auto d : e.deps) {
            const auto& p = tl.events[d];
            const bool chain = p.kind == EventKind::recurrent || p.kind == EventKind::weight_evolution;
            if (chain && p.partition != e.partition && e.kind != EventKind::transfer) {
                fail("event " + std::to_string(e.id) + " carries a cross-snapshot edge");
            }
        }
    }

    // serial resources: transfer, compute, and each host lane
    std::map<std::pair<Resource, std::uint32_t>, std::vector<std::pair<double, double>>> spans;
    for (const auto& e : tl.events) spans[{e.resource, e.lane}].emplace_back(e.start, e.end);
    for (auto& [key, list] : spans) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i].first < list[i - 1].second - 1e-9) {
                fail(std::string("overlapping events on ") + to_string(key.first));
            }
        }
    }

    // ledger identity
    TransferLedger from_events;
    std::uint64_t shipped = 0;
    for (const auto& e : tl.events) {
        if (e.kind != EventKind::transfer) continue;
        if (e.bytes != e.adjacency_entries * kFloatBytes + e.feature_bytes + e.host_hit_bytes) {
            fail("transfer " + std::to_string(e.id) + " bytes do not match their breakdown");
        }
        if (!result.config.baseline && e.adjacency_entries * kFloatBytes > e.plain_adjacency_bytes) {
            fail("transfer " + std::to_string(e.id) + " ships more than the plain snapshots");
        }
        shipped += e.bytes;
        from_events.features += e.feature_bytes;
        from_events.reuse_host_hits += e.host_hit_bytes;
    }
    const auto ledger = tl.ledger();
    if (shipped != ledger.total()) fail("ledger total differs from transferred bytes");
    if (from_events.features != ledger.features || from_events.reuse_host_hits != ledger.reuse_host_hits) {
        fail("ledger categories differ from transfer breakdowns");
    }

    // epoch conservation
    for (std::size_t ep = 0; ep < tl.epoch_start.size(); ++ep) {
        std::map<Resource, double> busy;
        for (const auto& e : tl.events) {
            if (e.epoch == ep && e.resource != Resource::host) busy[e.resource] += e.duration();
        }
        const double span = tl.epoch_end[ep] - tl.epoch_start[ep];
        for (auto [res, b] : busy) {
            if (b > span + 1e-6) fail(std::string("busy time exceeds epoch span on ") + to_string(res));
        }
    }
    if (result.max_device_bytes > result.config.resources.device_memory) fail("device memory exceeded");
}

Report make_report(const SimResult& result)
{
    Report rep;
    const auto& tl = result.timeline;
    rep.mode = result.config.baseline ? "baseline" : "pipad";
    rep.epoch_times = tl.epoch_times();
    rep.stall_total = tl.stall_total;
    rep.cache = result.cache;
    rep.access = result.access;
    if (tl.epoch_start.empty()) return rep;

    const std::size_t first = std::min<std::size_t>(tl.preparing_epochs, tl.epoch_start.size() - 1);
    const bool has_training = tl.epoch_start.size() > tl.preparing_epochs;
    rep.window_start = has_training ? tl.epoch_start[first] : tl.epoch_start.front();
    rep.window_end = tl.epoch_end.back();
    const double window = rep.window_end - rep.window_start;
    std::size_t counted = 0;
    for (std::size_t e = has_training ? first : 0; e < rep.epoch_times.size(); ++e) {
        rep.mean_epoch_time += rep.epoch_times[e];
        ++counted;
        rep.ledger += tl.epoch_ledger[e];
    }
    if (counted) rep.mean_epoch_time /= static_cast<double>(counted);

    const std::uint32_t lowest = has_training ? tl.preparing_epochs : 0;
    auto& host = rep.resources["host"];
    auto& transfer = rep.resources["transfer"];
    auto& compute = rep.resources["compute"];
    double host_busy = 0.0;
    double transfer_busy = 0.0;
    double compute_busy = 0.0;
    for (const auto& e : tl.events) {
        if (e.epoch < lowest || window <= 0) continue;
        const double d = e.duration();
        switch (e.resource) {
        case Resource::host:
            host.busy[to_string(e.kind)] += d / (window * tl.host_workers);
            host_busy += d;
            break;
        case Resource::transfer: {
            transfer_busy += d;
            if (e.bytes == 0) break;
            const double adj = static_cast<double>(e.adjacency_entries * kFloatBytes);
            const double b = static_cast<double>(e.bytes);
            transfer.busy["adjacency"] += d * adj / b / window;
            transfer.busy["features"] += d * static_cast<double>(e.feature_bytes) / b / window;
            transfer.busy["reuse_host_hits"] += d * static_cast<double>(e.host_hit_bytes) / b / window;
            break;
        }
        case Resource::compute:
            compute.busy[to_string(e.kind)] += d / window;
            compute_busy += d;
            break;
        }
    }
    if (window > 0) {
        host.idle = 1.0 - host_busy / (window * tl.host_workers);
        transfer.idle = 1.0 - transfer_busy / window;
        compute.idle = 1.0 - compute_busy / window;
        rep.transfer_fraction = transfer_busy / window;
        rep.compute_fraction = compute_busy / window;
    }
    return rep;
}

std::string summary_csv(const Report& rep)
{
    std::ostringstream out;
    out << "metric,value\n";
    out << "mode," << rep.mode << "\n";
    for (std::size_t e = 0; e < rep.epoch_times.size(); ++e) {
        out << "epoch_" << e << "_time," << fmt(rep.epoch_times[e]) << "\n";
    }
    out << "mean_epoch_time," << fmt(rep.mean_epoch_time) << "\n";
    out << "transfer_fraction," << fmt(rep.transfer_fraction) << "\n";
    out << "compute_fraction," << fmt(rep.compute_fraction) << "\n";
    out << "stall_total," << fmt(rep.stall_total) << "\n";
    for (const auto& [name, share] : rep.resources) {
        for (const auto& [cat, v] : share.busy) out << name << "_" << cat << "," << fmt(v) << "\n";
        out << name << "_idle," << fmt(share.idle) << "\n";
    }
    out << "bytes_overlap_adj," << rep.ledger.overlap_adj << "\n";
    out << "bytes_exclusive_adj," << rep.ledger.exclusive_adj << "\n";
    out << "bytes_snapshot_adj," << rep.ledger.snapshot_adj << "\n";
    out << "bytes_features," << rep.ledger.features << "\n";
    out << "bytes_reuse_host_hits," << rep.ledger.reuse_host_hits << "\n";
    out << "bytes_layer0_adjacency," << rep.ledger.layer0_adjacency << "\n";
    out << "cache_device_hits," << rep.cache.device_hits << "\n";
    out << "cache_host_hits," << rep.cache.host_hits << "\n";
    out << "cache_misses," << rep.cache.misses << "\n";
    out << "cache_spills," << rep.cache.spills << "\n";
    out << "global_requests," << rep.access.global_requests << "\n";
    out << "global_transactions," << rep.access.global_transactions << "\n";
    out << "active_thread_ratio," << fmt(rep.access.active_thread_ratio()) << "\n";
    return out.str();
}

std::string report_json(const Report& rep, const SimResult& result)
{
    json j;
    j["mode"] = rep.mode;
    j["model"] = to_string(result.config.model.kind);
    j["reuse"] = to_string(result.config.reuse);
    j["window"] = {rep.window_start, rep.window_end};
    j["epoch_times"] = rep.epoch_times;
    j["mean_epoch_time"] = rep.mean_epoch_time;
    j["transfer_fraction"] = rep.transfer_fraction;
    j["compute_fraction"] = rep.compute_fraction;
    j["stall_total"] = rep.stall_total;
    json res = json::object();
    for (const auto& [name, share] : rep.resources) {
        json r = json::object();
        for (const auto& [cat, v] : share.busy) r[cat] = v;
        r["idle"] = share.idle;
        res[name] = r;
    }
    j["resources"] = res;
    j["ledger"] = {{"overlap_adj", rep.ledger.overlap_adj},
                   {"exclusive_adj", rep.ledger.exclusive_adj},
                   {"snapshot_adj", rep.ledger.snapshot_adj},
                   {"features", rep.ledger.features},
                   {"reuse_host_hits", rep.ledger.reuse_host_hits},
                   {"layer0_adjacency", rep.ledger.layer0_adjacency}};
    j["cache"] = {{"device_hits", rep.cache.device_hits},
                  {"host_hits", rep.cache.host_hits},
                  {"misses", rep.cache.misses},
                  {"spills", rep.cache.spills},
                  {"records", rep.cache.records},
                  {"reallocations", result.cache_reallocations}};
    j["access"] = {{"global_requests", rep.access.global_requests},
                   {"global_transactions", rep.access.global_transactions},
                   {"adjacency_requests", rep.access.adjacency_requests},
                   {"adjacency_transactions", rep.access.adjacency_transactions},
                   {"active_thread_ratio", rep.access.active_thread_ratio()},
                   {"work_units", rep.access.work_units}};
    json decisions = json::array();
    for (std::size_t f = 0; f < result.decisions.size(); ++f) {
        const auto& d = result.decisions[f];
        json rejected = json::array();
        for (const auto& [n, why] : d.rejected) rejected.push_back({{"s_per", n}, {"reason", to_string(why)}});
        decisions.push_back({{"frame", f},
                             {"s_per", d.s_per},
                             {"upper_bound", d.upper_bound},
                             {"device_reuse_bytes", d.device_reuse_bytes},
                             {"rejected", rejected}});
    }
    j["decisions"] = decisions;
    j["max_device_bytes"] = result.max_device_bytes;
    return j.dump(2) + "\n";
}

std::string timeline_json(const SimResult& result)
{
    json events = json::array();
    for (const auto& e : result.timeline.events) {
        events.push_back({{"id", e.id},
                          {"resource", to_string(e.resource)},
                          {"lane", e.lane},
                          {"kind", to_string(e.kind)},
                          {"epoch", e.epoch},
                          {"frame", e.frame},
                          {"partition", e.partition},
                          {"first_snapshot", e.first_snapshot},
                          {"snapshots", e.snapshot_count},
                          {"layer", e.layer},
                          {"start", e.start},
                          {"end", e.end},
                          {"bytes", e.bytes},
                          {"work", e.work},
                          {"deps", e.deps}});
    }
    json j;
    j["epochs"] = {{"start", result.timeline.epoch_start}, {"end", result.timeline.epoch_end}};
    j["events"] = events;
    return j.dump(1) + "\n";
}

}  // namespace pipad
