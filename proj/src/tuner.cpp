#include "pipad/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"
#include "pipad/rng.hpp"

namespace pipad {

using nlohmann::json;

namespace {

// Index of the nearest value; ties go to the lower index.
template <class T>
std::size_t nearest(const std::vector<T>& sorted, double v)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double d = std::abs(static_cast<double>(sorted[i]) - v);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

// Indices ordered by distance from `from`, lower side first on ties.
std::vector<std::size_t> by_distance(std::size_t count, std::size_t from)
{
    std::vector<std::size_t> order;
    order.push_back(from);
    for (std::size_t d = 1; d < count; ++d) {
        if (from >= d) order.push_back(from - d);
        if (from + d < count) order.push_back(from + d);
    }
    return order;
}

}  // namespace

std::vector<std::pair<double, double>> TunerProfile::or_buckets() const
{
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < or_targets.size(); ++i) {
        const double lo = i == 0 ? 0.0 : (or_targets[i - 1] + or_targets[i]) / 2;
        const double hi = i + 1 == or_targets.size() ? 1.0 : (or_targets[i] + or_targets[i + 1]) / 2;
        out.emplace_back(lo, hi);
    }
    return out;
}

std::size_t TunerProfile::or_bucket(double or_value) const
{
    if (or_targets.empty()) throw ConfigurationError("profile has no OR buckets");
    return nearest(or_targets, or_value);
}

std::uint32_t TunerProfile::dim_bucket(std::uint32_t dim) const
{
    if (dims.empty()) throw ConfigurationError("profile has no dimension buckets");
    return dims[nearest(dims, dim)];
}

void TunerProfile::validate() const
{
    if (!std::is_sorted(or_targets.begin(), or_targets.end()) ||
        std::adjacent_find(or_targets.begin(), or_targets.end()) != or_targets.end()) {
        throw ValidationError("profile OR targets must be strictly increasing");
    }
    for (double t : or_targets) {
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("profile OR targets must lie in [0, 1]");
    }
    if (!std::is_sorted(dims.begin(), dims.end())) {
        throw ValidationError("profile dimensions must be increasing");
    }
    for (const auto& [key, entry] : table) {
        if (key.or_index >= or_targets.size()) throw ValidationError("profile entry outside OR buckets");
        if (std::find(dims.begin(), dims.end(), key.dim) == dims.end()) {
            throw ValidationError("profile entry for unlisted dimension");
        }
        if (!(entry.speedup >= 0.0) || !std::isfinite(entry.speedup)) {
            throw ValidationError("profile speedups must be finite and non-negative");
        }
    }
    if (!(machine.transfer_bandwidth > 0) || machine.transfer_latency < 0) {
        throw ValidationError("profile machine constants must be positive");
    }
}

std::string to_json(const TunerProfile& p)
{
    json j;
    j["or_targets"] = p.or_targets;
    json buckets = json::array();
    for (auto [lo, hi] : p.or_buckets()) buckets.push_back({lo, hi});
    j["or_buckets"] = buckets;
    j["dims"] = p.dims;
    j["candidates"] = p.candidates;
    json entries = json::array();
    for (const auto& [k, e] : p.table) {
        entries.push_back({{"or_target", p.or_targets[k.or_index]},
                           {"dim", k.dim},
                           {"s_per", k.s_per},
                           {"speedup", e.speedup},
                           {"samples", e.samples}});
    }
    j["entries"] = entries;
    const double bw = p.machine.transfer_bandwidth;
    j["machine"] = {{"transfer_bandwidth", std::isinf(bw) ? json("inf") : json(bw)},
                    {"transfer_latency", p.machine.transfer_latency}};
    return j.dump(2) + "\n";
}

TunerProfile profile_from_json(const std::string& text)
{
    TunerProfile p;
    try {
        const json j = json::parse(text);
        p.or_targets = j.at("or_targets").get<std::vector<double>>();
        p.dims = j.at("dims").get<std::vector<std::uint32_t>>();
        p.candidates = j.value("candidates", kDefaultCandidates);
        for (const auto& e : j.at("entries")) {
            const double target = e.at("or_target").get<double>();
            auto it = std::find(p.or_targets.begin(), p.or_targets.end(), target);
            if (it == p.or_targets.end()) throw ValidationError("entry OR target not in or_targets");
            TunerProfile::Key key{static_cast<std::size_t>(it - p.or_targets.begin()),
                                  e.at("dim").get<std::uint32_t>(),
                                  e.at("s_per").get<std::uint32_t>()};
            p.table[key] = {e.at("speedup").get<double>(), e.value("samples", 0u)};
        }
        const auto& m = j.at("machine");
        const auto& bw = m.at("transfer_bandwidth");
        p.machine.transfer_bandwidth = bw.is_string() && bw.get<std::string>() == "inf"
                                           ? std::numeric_limits<double>::infinity()
                                           : bw.get<double>();
        p.machine.transfer_latency = m.at("transfer_latency").get<double>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed profile: ") + e.what());
    }
    p.validate();
    return p;
}

void save_profile(const TunerProfile& profile, const std::filesystem::path& path)
{
    io::write_text(path, to_json(profile));
}

TunerProfile load_profile(const std::filesystem::path& path)
{
    const auto bytes = io::read_file(path);
    return profile_from_json(std::string(bytes.begin(), bytes.end()));
}

std::uint32_t memory_upper_bound(const FrameObservation& obs, std::uint64_t device_total,
                                 std::span<const std::uint32_t> candidates, double reserved_overhead)
{
    const double budget = static_cast<double>(device_total) * (1.0 - reserved_overhead);
    if (static_cast<double>(obs.peak_mem_one_snapshot) > budget) {
        throw CapacityError("one-snapshot peak of " + std::to_string(obs.peak_mem_one_snapshot) +
                            " bytes exceeds the usable device memory");
    }
    std::uint32_t bound = 1;
    for (auto n : candidates) {
        if (static_cast<double>(n) * static_cast<double>(obs.peak_mem_one_snapshot) <= budget) {
            bound = std::max(bound, n);
        }
    }
    return bound;
}

double estimate_speedup(const TunerProfile& profile, double or_value, std::uint32_t dim,
                        std::uint32_t s_per)
{
    if (profile.empty()) throw ConfigurationError("tuner profile is empty; build one first");
    if (s_per <= 1) return 1.0;
    const std::size_t or_idx = profile.or_bucket(or_value);
    const std::size_t dim_idx = nearest(profile.dims, dim);
    for (auto d : by_distance(profile.dims.size(), dim_idx)) {
        for (auto o : by_distance(profile.or_targets.size(), or_idx)) {
            auto it = profile.table.find({o, profile.dims[d], s_per});
            if (it != profile.table.end()) return it->second.speedup;
        }
    }
    // nothing measured for this parallelism: assume no benefit
    return 1.0;
}

const char* to_string(RejectReason reason) noexcept
{
    return reason == RejectReason::oom ? "oom" : "pipeline_stall";
}

TunerDecision decide(const Frame& frame, const FrameObservation& obs, const TunerProfile& profile,
                     std::uint64_t device_total, std::span<const std::uint32_t> candidates,
                     const DecideOptions& options)
{
    if (obs.per_snapshot_bytes.size() != frame.size ||
        obs.per_snapshot_compute.size() != frame.size) {
        throw ArgumentError("observation does not cover the frame");
    }
    TunerDecision decision;
    decision.upper_bound = memory_upper_bound(obs, device_total, candidates, options.reserved_overhead);

    const double total_compute =
        std::accumulate(obs.per_snapshot_compute.begin(), obs.per_snapshot_compute.end(), 0.0);
    const auto& machine = profile.machine;

    std::vector<std::uint32_t> sorted(candidates.begin(), candidates.end());
    if (std::find(sorted.begin(), sorted.end(), 1u) == sorted.end()) sorted.push_back(1);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    double best_latency = std::numeric_limits<double>::infinity();
    for (auto n : sorted) {
        if (n == 0 || n > frame.size) continue;
        CandidateEval ev;
        ev.s_per = n;
        ev.speedup = estimate_speedup(profile, obs.frame_or(), obs.feature_dim, n);
        ev.estimated_latency = ev.speedup > 0 ? total_compute / ev.speedup
                                              : std::numeric_limits<double>::infinity();
        if (n > decision.upper_bound) {
            ev.fits = false;
            decision.rejected.emplace_back(n, RejectReason::oom);
            decision.evaluated.push_back(ev);
            continue;
        }

        const auto parts = partitions(frame, n);
        auto measured_bytes = obs.partition_bytes.find(n);
        auto measured_compute = obs.partition_compute.find(n);
        const bool have_bytes =
            measured_bytes != obs.partition_bytes.end() && measured_bytes->second.size() == parts.size();
        const bool have_compute = measured_compute != obs.partition_compute.end() &&
                                  measured_compute->second.size() == parts.size();
        std::vector<double> transfer(parts.size());
        std::vector<double> compute(parts.size());
        for (std::size_t j = 0; j < parts.size(); ++j) {
            double bytes = 0.0;
            double work = 0.0;
            for (std::size_t t = parts[j].first; t < parts[j].end(); ++t) {
                bytes += static_cast<double>(obs.per_snapshot_bytes[t - frame.start]);
                work += obs.per_snapshot_compute[t - frame.start];
            }
            if (have_bytes) bytes = static_cast<double>(measured_bytes->second[j]);
            compute[j] = have_compute ? measured_compute->second[j]
                                      : (ev.speedup > 0 ? work / ev.speedup : work);
            transfer[j] = bytes / machine.transfer_bandwidth + machine.transfer_latency;
        }
        ev.tightest_window = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < parts.size(); ++j) {
            // the first partition hides behind the last one of the previous epoch
            const double window = compute[j == 0 ? parts.size() - 1 : j - 1];
            ev.worst_transfer = std::max(ev.worst_transfer, transfer[j]);
            ev.tightest_window = std::min(ev.tightest_window, window);
            if (transfer[j] > window) ev.stall_free = false;
        }
        decision.evaluated.push_back(ev);
        if (n > 1 && !ev.stall_free) {
            decision.rejected.emplace_back(n, RejectReason::pipeline_stall);
            continue;
        }
        if (ev.estimated_latency < best_latency) {
            best_latency = ev.estimated_latency;
            decision.s_per = n;
        }
    }

    if (options.reuse) {
        const std::uint64_t used = decision.s_per * obs.peak_mem_one_snapshot;
        const std::uint64_t free_bytes = device_total > used ? device_total - used : 0;
        const std::uint64_t needed = obs.aggregation_bytes_per_snapshot * frame.size;
        decision.device_reuse_bytes = std::min(free_bytes, needed);
    }
    return decision;
}

std::string explain(const Frame& frame, const TunerDecision& d)
{
    std::ostringstream out;
    out << "frame start=" << frame.start << " size=" << frame.size << "\n";
    out << "memory upper bound U=" << d.upper_bound << "\n";
    for (const auto& ev : d.evaluated) {
        out << "  s_per=" << ev.s_per << " speedup=" << ev.speedup
            << " est_latency=" << ev.estimated_latency;
        if (!ev.fits) {
            out << " rejected: oom\n";
            continue;
        }
        out << " worst_transfer=" << ev.worst_transfer << " window=" << ev.tightest_window;
        if (ev.s_per > 1 && !ev.stall_free) {
            out << " rejected: pipeline_stall";
        } else if (ev.s_per == d.s_per) {
            out << " selected";
        }
        out << "\n";
    }
    out << "device_reuse_bytes=" << d.device_reuse_bytes << "\n";
    return out.str();
}

TunerProfile build_profile(std::span<const SnapshotSequence> datasets, const ProfileOptions& options)
{
    options.exec.validate();
    TunerProfile profile;
    profile.or_targets = options.or_targets;
    std::sort(profile.or_targets.begin(), profile.or_targets.end());
    profile.dims = options.dims;
    std::sort(profile.dims.begin(), profile.dims.end());
    profile.candidates = options.candidates;
    profile.machine = options.machine;

    struct Group {
        std::size_t dataset;
        std::size_t first;
    };
    Rng rng(mix_seed(options.seed, 0x70f11e));

    for (auto n : options.candidates) {
        if (n <= 1) continue;
        // OR of every contiguous window of n snapshots
        std::vector<std::pair<Group, double>> windows;
        for (std::size_t d = 0; d < datasets.size(); ++d) {
            const auto& seq = datasets[d];
            if (seq.length() < n) continue;
            std::vector<Csr> adj;
            for (const auto& s : seq.snapshots) adj.push_back(s.adjacency);
            for (std::size_t first = 0; first + n <= seq.length(); ++first) {
                const auto stats =
                    overlap_rate(std::span<const Csr>(adj).subspan(first, n), options.exec.slice_cap);
                windows.push_back({{d, first}, stats.partition_rate});
            }
        }
        for (std::size_t o = 0; o < profile.or_targets.size(); ++o) {
            std::vector<Group> matched;
            for (const auto& [g, rate] : windows) {
                if (std::abs(rate - profile.or_targets[o]) <= options.or_tolerance) matched.push_back(g);
            }
            if (matched.empty()) continue;  // bucket left missing
            for (std::size_t i = matched.size(); i > 1; --i) {
                std::swap(matched[i - 1], matched[uniform_below(rng, i)]);
            }

            for (auto dim : profile.dims) {
                double ratio_sum = 0.0;
                for (std::uint32_t k = 0; k < options.samples; ++k) {
                    const auto& g = matched[k % matched.size()];
                    const auto& seq = datasets[g.dataset];
                    std::vector<Csr> group;
                    double single = 0.0;
                    for (std::size_t t = g.first; t < g.first + n; ++t) {
                        group.push_back(seq[t].adjacency);
                        const auto one = decompose(std::span<const Csr>(&seq[t].adjacency, 1),
                                                   options.exec.slice_cap, t);
                        single += model_aggregation(one, dim, options.exec).work_units;
                    }
                    const auto joint = decompose(group, options.exec.slice_cap, g.first);
                    const double parallel = model_aggregation(joint, dim, options.exec).work_units;
                    ratio_sum += parallel > 0 ? single / parallel : 1.0;
                }
                profile.table[{o, dim, n}] = {ratio_sum / options.samples, options.samples};
            }
        }
    }
    return profile;
}

}  // namespace pipad
