#include "pipad/dtdg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"
#include "pipad/rng.hpp"

namespace pipad {

namespace fs = std::filesystem;

std::uint32_t SnapshotSequence::node_count() const
{
    return snapshots.empty() ? 0 : snapshots.front().node_count();
}

std::uint32_t SnapshotSequence::feature_dim() const
{
    return snapshots.empty() ? 0 : snapshots.front().feature_dim();
}

void SnapshotSequence::validate() const
{
    for (std::size_t t = 0; t < snapshots.size(); ++t) {
        const auto& s = snapshots[t];
        if (s.timestep != t) {
            throw ValidationError("snapshot timesteps must run 0, 1, 2, ...");
        }
        if (s.node_count() != node_count()) {
            throw ValidationError("snapshots disagree on node_count");
        }
        if (s.features.rows() != s.node_count()) {
            throw ValidationError("feature rows differ from node_count at t=" +
                                  std::to_string(t));
        }
        if (s.feature_dim() == 0 || s.feature_dim() != feature_dim()) {
            throw ValidationError("snapshots disagree on feature dimension");
        }
        s.adjacency.validate();
    }
}

bool operator==(const SnapshotSequence& a, const SnapshotSequence& b)
{
    if (a.length() != b.length() || a.interval_meta != b.interval_meta) return false;
    for (std::size_t t = 0; t < a.length(); ++t) {
        const auto& x = a.snapshots[t];
        const auto& y = b.snapshots[t];
        if (x.timestep != y.timestep || !(x.adjacency == y.adjacency) ||
            !bitwise_equal(x.features, y.features)) {
            return false;
        }
    }
    return true;
}

std::vector<std::size_t> Partition::snapshot_indices() const
{
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = first + i;
    return out;
}

std::vector<Frame> frames(std::size_t length, std::size_t size, std::size_t stride)
{
    if (size == 0) throw ArgumentError("frame size must be >= 1");
    if (stride == 0) throw ArgumentError("frame stride must be >= 1");
    if (size > length) {
        throw ArgumentError("frame size " + std::to_string(size) +
                            " exceeds sequence length " + std::to_string(length));
    }
    std::vector<Frame> out;
    for (std::size_t start = 0; start + size <= length; start += stride) {
        out.push_back({start, size, stride});
    }
    return out;
}

std::vector<Partition> partitions(const Frame& frame, std::size_t s_per)
{
    if (s_per == 0) throw ArgumentError("s_per must be >= 1");
    std::vector<Partition> out;
    for (std::size_t first = frame.start; first < frame.end(); first += s_per) {
        out.push_back({frame, first, std::min(s_per, frame.end() - first)});
    }
    return out;
}

DenseMatrix random_features(std::uint32_t node_count, std::uint32_t dim,
                            std::uint64_t seed, std::uint32_t timestep)
{
    Rng rng(mix_seed(seed, timestep));
    DenseMatrix m(node_count, dim);
    for (auto& v : m.data()) v = uniform_unit(rng);
    return m;
}

std::vector<char> encode_feature_file(const DenseMatrix& features)
{
    io::ByteWriter w;
    w.u64(features.rows());
    w.u64(features.cols());
    w.f32s(features.data());
    return w.bytes();
}

DenseMatrix read_feature_file(const fs::path& path)
{
    const auto bytes = io::read_file(path);
    io::ByteReader r(bytes);
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (cols == 0 || (rows != 0 && cols > r.remaining() / 4 / rows)) {
        throw ValidationError("feature file header does not match its payload: " +
                              path.string());
    }
    auto data = r.f32s(rows * cols);
    if (!r.at_end()) throw ValidationError("trailing bytes in feature file " + path.string());
    return DenseMatrix(rows, cols, std::move(data));
}

namespace {

struct RawEvent {
    node_id src;
    node_id dst;
    std::uint64_t bucket;
    std::int64_t timestamp;
    std::size_t line;
    float weight;
};

template <typename T>
bool parse_number(std::string_view token, T& out)
{
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc() && ptr == end;
}

DenseMatrix load_features(const FeatureSpec& spec, std::uint32_t node_count,
                          std::uint32_t timestep, const DenseMatrix* file_features)
{
    switch (spec.source) {
    case FeatureSource::constant:
        return DenseMatrix(node_count, spec.dim, 1.0f);
    case FeatureSource::random_seeded:
        return random_features(node_count, spec.dim, spec.seed, timestep);
    case FeatureSource::file:
        return *file_features;
    }
    return {};
}

}  // namespace

SnapshotSequence ingest_temporal_edges(const fs::path& path, const IngestOptions& options)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open edge list " + path.string());
    auto seq = ingest_temporal_edges(in, options);
    seq.interval_meta = "source=" + path.filename().string() + ";" + seq.interval_meta;
    return seq;
}

SnapshotSequence ingest_temporal_edges(std::istream& in, const IngestOptions& options)
{
    if (options.edge_life == 0) throw ArgumentError("edge_life must be >= 1");
    if (options.interval == 0) throw ArgumentError("interval must be >= 1");
    if (options.node_count == 0) throw ArgumentError("node_count must be >= 1");

    std::vector<RawEvent> events;
    std::string line;
    std::size_t line_no = 0;
    std::uint64_t max_bucket = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream tokens(line);
        std::vector<std::string> fields;
        for (std::string tok; tokens >> tok;) fields.push_back(tok);
        if (fields.empty() || fields[0][0] == '#' || fields[0][0] == '%') continue;
        if (fields.size() < 3 || fields.size() > 4) {
            throw ParseError("expected `src dst timestamp [weight]`", line_no);
        }
        RawEvent ev{};
        ev.line = line_no;
        ev.weight = 1.0f;
        if (!parse_number(fields[0], ev.src) || !parse_number(fields[1], ev.dst)) {
            throw ParseError("node ids must be non-negative integers", line_no);
        }
        if (!parse_number(fields[2], ev.timestamp) || ev.timestamp < 0) {
            throw ParseError("timestamp must be a non-negative integer", line_no);
        }
        if (fields.size() == 4) {
            std::istringstream ws(fields[3]);
            if (!(ws >> ev.weight) || !ws.eof() || !std::isfinite(ev.weight)) {
                throw ParseError("weight must be a finite real", line_no);
            }
        }
        if (ev.src >= options.node_count || ev.dst >= options.node_count) {
            throw BoundsError("line " + std::to_string(line_no) + ": node id exceeds node_count " +
                              std::to_string(options.node_count));
        }
        ev.bucket = static_cast<std::uint64_t>(ev.timestamp) / options.interval;
        max_bucket = std::max(max_bucket, ev.bucket);
        events.push_back(ev);
    }

    const std::size_t length = options.bucket_count.value_or(events.empty() ? 0 : max_bucket + 1);

    // Later (timestamp, line) wins when the same pair is alive twice.
    std::stable_sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        return a.timestamp < b.timestamp;
    });
    std::vector<std::vector<std::pair<std::size_t, Edge>>> alive(length);
    for (std::size_t rank = 0; rank < events.size(); ++rank) {
        const auto& ev = events[rank];
        const auto last = std::min<std::uint64_t>(ev.bucket + options.edge_life, length);
        for (auto u = ev.bucket; u < last; ++u) {
            alive[u].push_back({rank, Edge{ev.src, ev.dst, ev.weight}});
        }
    }

    std::optional<DenseMatrix> file_features;
    if (options.features.source == FeatureSource::file) {
        file_features = read_feature_file(options.features.path);
        if (file_features->rows() != options.node_count) {
            throw ValidationError("feature file rows differ from node_count");
        }
    }

    SnapshotSequence seq;
    seq.interval_meta = "interval=" + std::to_string(options.interval) +
                        ";edge_life=" + std::to_string(options.edge_life);
    seq.snapshots.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
        auto& bucket = alive[t];
        std::stable_sort(bucket.begin(), bucket.end(), [](const auto& a, const auto& b) {
            return a.second.src != b.second.src ? a.second.src < b.second.src
                                                : a.second.dst < b.second.dst;
        });
        std::vector<Edge> edges;
        edges.reserve(bucket.size());
        for (std::size_t i = 0; i < bucket.size(); ++i) {
            const bool last_of_pair = i + 1 == bucket.size() ||
                                      bucket[i + 1].second.src != bucket[i].second.src ||
                                      bucket[i + 1].second.dst != bucket[i].second.dst;
            if (last_of_pair) edges.push_back(bucket[i].second);
        }
        Snapshot snap;
        snap.timestep = static_cast<std::uint32_t>(t);
        snap.adjacency = Csr::from_edges(options.node_count, std::move(edges));
        snap.features = load_features(options.features, options.node_count, snap.timestep,
                                      file_features ? &*file_features : nullptr);
        seq.snapshots.push_back(std::move(snap));
    }
    return seq;
}

Csr random_graph(std::uint32_t node_count, std::size_t edges, double skew, std::uint64_t seed)
{
    if (node_count == 0) throw ArgumentError("node_count must be >= 1");
    if (!(skew >= 0.0)) throw ArgumentError("skew must be non-negative");
    const std::uint64_t slots = static_cast<std::uint64_t>(node_count) * node_count;
    if (edges > slots) throw CapacityError("edges exceed node_count^2");

    Rng rng(mix_seed(seed, 7));
    std::vector<std::uint64_t> degree(node_count, 0);
    if (skew == 0.0) {
        for (std::size_t e = 0; e < edges; ++e) ++degree[uniform_below(rng, node_count)];
    } else {
        double total = 0.0;
        for (std::uint32_t r = 0; r < node_count; ++r) total += std::pow(r + 1.0, -skew);
        for (std::uint32_t r = 0; r < node_count; ++r) {
            degree[r] = static_cast<std::uint64_t>(
                std::llround(static_cast<double>(edges) * std::pow(r + 1.0, -skew) / total));
        }
    }
    std::vector<std::uint32_t> rows(node_count);
    std::iota(rows.begin(), rows.end(), 0u);
    for (std::uint32_t i = node_count; i > 1; --i) {
        std::swap(rows[i - 1], rows[uniform_below(rng, i)]);
    }

    std::vector<Edge> list;
    for (std::uint32_t rank = 0; rank < node_count; ++rank) {
        const auto d = std::min<std::uint64_t>(degree[rank], node_count);
        std::unordered_set<std::uint32_t> cols;
        if (d * 2 > node_count) {
            // dense row: drop random columns instead of drawing them
            std::vector<std::uint32_t> all(node_count);
            std::iota(all.begin(), all.end(), 0u);
            for (std::uint32_t i = node_count; i > 1; --i) std::swap(all[i - 1], all[uniform_below(rng, i)]);
            cols.insert(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(d));
        } else {
            while (cols.size() < d) cols.insert(static_cast<std::uint32_t>(uniform_below(rng, node_count)));
        }
        for (auto c : cols) list.push_back({rows[rank], c, 1.0f});
    }
    return Csr::from_edges(node_count, std::move(list));
}

SnapshotSequence generate_synthetic(const SyntheticParams& p)
{
    if (!(p.churn_rate >= 0.0 && p.churn_rate <= 1.0)) {
        throw ArgumentError("churn_rate must lie in [0, 1]");
    }
    if (p.node_count == 0) throw ArgumentError("node_count must be >= 1");
    if (p.feature_dim == 0) throw ArgumentError("feature_dim must be >= 1");
    const std::uint64_t slots = static_cast<std::uint64_t>(p.node_count) * p.node_count;
    if (p.base_edges > slots) {
        throw CapacityError("base_edges " + std::to_string(p.base_edges) +
                            " exceeds node_count^2 = " + std::to_string(slots));
    }

    const auto churn =
        static_cast<std::size_t>(std::floor(p.churn_rate * static_cast<double>(p.base_edges)));
    if (p.steps > 1 && p.base_edges + churn > slots) {
        throw CapacityError("base_edges + churned edges exceed node_count^2 = " + std::to_string(slots));
    }

    Rng rng(mix_seed(p.seed, 0));
    const std::uint64_t feature_seed = mix_seed(p.seed, 1);
    std::vector<std::uint64_t> edges;
    std::unordered_set<std::uint64_t> present;
    edges.reserve(p.base_edges);
    present.reserve(p.base_edges * 2);

    auto add_fresh = [&](std::size_t count) {
        for (std::size_t added = 0; added < count;) {
            const auto key = uniform_below(rng, slots);
            if (present.insert(key).second) {
                edges.push_back(key);
                ++added;
            }
        }
    };
    auto materialize = [&](std::uint32_t t) {
        std::vector<Edge> list;
        list.reserve(edges.size());
        for (auto key : edges) {
            list.push_back({static_cast<node_id>(key / p.node_count),
                            static_cast<node_id>(key % p.node_count), 1.0f});
        }
        Snapshot s;
        s.timestep = t;
        s.adjacency = Csr::from_edges(p.node_count, std::move(list));
        s.features = random_features(p.node_count, p.feature_dim, feature_seed, t);
        return s;
    };

    SnapshotSequence seq;
    seq.interval_meta = "synthetic;churn=" + std::to_string(p.churn_rate) +
                        ";seed=" + std::to_string(p.seed);
    add_fresh(p.base_edges);
    for (std::size_t t = 0; t < p.steps; ++t) {
        if (t > 0) {
            // removed edges stay in `present` until the fresh ones are
            // drawn, so a replacement is never the edge it replaces
            std::vector<std::uint64_t> removed;
            for (std::size_t i = 0; i < churn; ++i) {
                const auto idx = uniform_below(rng, edges.size());
                std::swap(edges[idx], edges.back());
                removed.push_back(edges.back());
                edges.pop_back();
            }
            add_fresh(churn);
            for (auto key : removed) present.erase(key);
        }
        seq.snapshots.push_back(materialize(static_cast<std::uint32_t>(t)));
    }
    return seq;
}

std::vector<char> encode_snapshot(const Snapshot& s)
{
    io::ByteWriter w;
    w.u64(s.node_count());
    w.u64(s.feature_dim());
    w.u64(s.adjacency.nnz());
    for (const auto& e : s.adjacency.edges()) {
        w.u32(e.src);
        w.u32(e.dst);
        w.f32(e.weight);
    }
    w.f32s(s.features.data());
    return w.bytes();
}

Snapshot decode_snapshot(std::span<const char> bytes, std::uint32_t timestep)
{
    io::ByteReader r(bytes);
    const auto n = r.u64();
    const auto f = r.u64();
    const auto nnz = r.u64();
    if (n > UINT32_MAX || nnz > r.remaining() / 12) {
        throw ValidationError("snapshot header does not match its payload");
    }
    std::vector<Edge> edges(nnz);
    for (auto& e : edges) {
        e.src = r.u32();
        e.dst = r.u32();
        e.weight = r.f32();
    }
    if (f == 0 || (n != 0 && f > r.remaining() / 4 / n)) {
        throw ValidationError("snapshot feature block does not match its header");
    }
    Snapshot s;
    s.timestep = timestep;
    s.adjacency = Csr::from_edges(static_cast<std::uint32_t>(n), std::move(edges));
    s.features = DenseMatrix(n, f, r.f32s(n * f));
    if (!r.at_end()) throw ValidationError("trailing bytes in snapshot file");
    return s;
}

void write_sequence(const SnapshotSequence& seq, const fs::path& dir)
{
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "pipad-sequence";
    manifest["version"] = 1;
    manifest["node_count"] = seq.node_count();
    manifest["feature_dim"] = seq.feature_dim();
    manifest["length"] = seq.length();
    manifest["interval_meta"] = seq.interval_meta;
    auto counts = nlohmann::json::array();
    for (const auto& s : seq.snapshots) {
        io::write_file(dir / ("snap_" + std::to_string(s.timestep) + ".bin"), encode_snapshot(s));
        counts.push_back(s.adjacency.nnz());
    }
    manifest["edge_counts"] = counts;
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

SnapshotSequence read_sequence(const fs::path& dir)
{
    const auto text = io::read_file(dir / "manifest.json");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad manifest in " + dir.string() + ": " + e.what());
    }
    SnapshotSequence seq;
    seq.interval_meta = manifest.value("interval_meta", "");
    const auto length = manifest.at("length").get<std::size_t>();
    for (std::size_t t = 0; t < length; ++t) {
        const auto bytes = io::read_file(dir / ("snap_" + std::to_string(t) + ".bin"));
        seq.snapshots.push_back(decode_snapshot(bytes, static_cast<std::uint32_t>(t)));
    }
    seq.validate();
    return seq;
}

}  // namespace pipad
