#include "pipad/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pipad/binary_io.hpp"
#include "pipad/dtdg.hpp"
#include "pipad/errors.hpp"
#include "pipad/experiment.hpp"
#include "pipad/kernel.hpp"
#include "pipad/overlap.hpp"
#include "pipad/pipeline.hpp"
#include "pipad/sliced_csr.hpp"
#include "pipad/tuner.hpp"

namespace pipad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_root()
{
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? fs::path(env) : fs::path("pipad_out");
}

fs::path resolve_out(const std::string& given, const std::string& command)
{
    return given.empty() ? output_root() / command : fs::path(given);
}

std::string fixed(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------

struct ConvertArgs {
    std::string input;
    std::string out;
    std::uint32_t nodes = 0;
    std::uint32_t slice_cap = 32;
    std::uint32_t edge_life = 1;
    std::uint64_t interval = 1;
    std::size_t buckets = 0;
    std::uint32_t feature_dim = kSmallGraphFeatureDim;
    std::string features = "random";
    std::string feature_file;
    std::uint64_t seed = 0;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out)
{
    if (a.slice_cap == 0) throw ArgumentError("--slice-cap must be positive");
    IngestOptions opt;
    opt.node_count = a.nodes;
    opt.interval = a.interval;
    opt.edge_life = a.edge_life;
    if (a.buckets) opt.bucket_count = a.buckets;
    opt.features.dim = a.feature_dim;
    opt.features.seed = a.seed;
    if (a.features == "random") {
        opt.features.source = FeatureSource::random_seeded;
    } else if (a.features == "constant") {
        opt.features.source = FeatureSource::constant;
    } else if (a.features == "file") {
        if (a.feature_file.empty()) throw ArgumentError("--features file needs --feature-file");
        opt.features.source = FeatureSource::file;
        opt.features.path = a.feature_file;
    } else {
        throw ArgumentError("--features must be random, constant or file");
    }

    const auto seq = ingest_temporal_edges(fs::path(a.input), opt);
    const auto dir = resolve_out(a.out, "convert");
    write_sequence(seq, dir);
    fs::create_directories(dir / "scsr");

    std::uint64_t csr = 0;
    std::uint64_t sliced = 0;
    std::uint64_t coo = 0;
    std::ostringstream table;
    table << "timestep,nnz,csr,sliced,coo\n";
    for (std::size_t t = 0; t < seq.length(); ++t) {
        const auto& adj = seq[t].adjacency;
        const auto s = slice_from_csr(adj, a.slice_cap);
        char name[32];
        std::snprintf(name, sizeof name, "snap_%06zu.scsr", t);
        io::write_file(dir / "scsr" / name, serialize(s));
        const auto c1 = storage_cost(StorageFormat::csr, adj.nnz(), adj.node_count, 0);
        const auto c2 = storage_cost(s);
        const auto c3 = storage_cost(StorageFormat::coo, adj.nnz(), adj.node_count, 0);
        csr += c1;
        sliced += c2;
        coo += c3;
        table << t << "," << adj.nnz() << "," << c1 << "," << c2 << "," << c3 << "\n";
    }
    io::write_text(dir / "storage.csv", table.str());

    out << "converted " << seq.length() << " snapshots over " << seq.node_count() << " nodes into "
        << dir.string() << "\n";
    out << std::left << std::setw(8) << "format" << std::right << std::setw(14) << "entries"
        << std::setw(14) << "bytes" << "\n";
    for (auto [name, entries] : {std::pair<const char*, std::uint64_t>{"csr", csr},
                                 {"sliced", sliced},
                                 {"coo", coo}}) {
        out << std::left << std::setw(8) << name << std::right << std::setw(14) << entries
            << std::setw(14) << entries * 4 << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    SyntheticParams p;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out)
{
    const auto seq = generate_synthetic(a.p);
    const auto dir = resolve_out(a.out, "generate");
    write_sequence(seq, dir);
    out << "generated " << seq.length() << " snapshots (" << a.p.node_count << " nodes, churn "
        << a.p.churn_rate << ") into " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct GraphSource {
    std::string data;
    std::size_t snapshot = 0;
    std::uint32_t nodes = 10000;
    double density = 0.01;
    std::size_t edges = 0;
    double skew = 0.0;
    std::uint64_t seed = 0;

    Csr load() const
    {
        if (!data.empty()) {
            const auto seq = read_sequence(data);
            if (snapshot >= seq.length()) throw ArgumentError("--snapshot beyond the sequence length");
            return seq[snapshot].adjacency;
        }
        const auto count = edges ? edges
                                 : static_cast<std::size_t>(density * static_cast<double>(nodes) * nodes);
        return random_graph(nodes, count, skew, seed);
    }
};

struct OverlapArgs {
    std::string data;
    std::string out;
    std::size_t frame_size = 16;
    std::size_t stride = 1;
    std::uint32_t slice_cap = 32;
};

int cmd_overlap(const OverlapArgs& a, std::ostream& out)
{
    if (a.slice_cap == 0) throw ArgumentError("--slice-cap must be positive");
    const auto seq = read_sequence(a.data);
    const auto dir = resolve_out(a.out, "analyze_overlap");
    fs::create_directories(dir);

    std::vector<Csr> adj;
    for (const auto& s : seq.snapshots) adj.push_back(s.adjacency);
    std::ostringstream pairs;
    pairs << "t,next,iou,shared_fraction\n";
    for (std::size_t t = 0; t + 1 < adj.size(); ++t) {
        pairs << t << "," << t + 1 << "," << fixed(topology_overlap(adj[t], adj[t + 1])) << ","
              << fixed(shared_fraction(adj[t], adj[t + 1])) << "\n";
    }
    io::write_text(dir / "pairwise.csv", pairs.str());

    std::ostringstream per_frame;
    per_frame << "frame,start,size,partition_rate,min_pairwise,bytes_saved\n";
    json frames_json = json::array();
    const auto fr = seq.length() >= a.frame_size ? frames(seq.length(), a.frame_size, a.stride)
                                                 : std::vector<Frame>{};
    for (std::size_t f = 0; f < fr.size(); ++f) {
        const std::span<const Csr> window(adj.data() + fr[f].start, fr[f].size);
        const auto st = overlap_rate(window, a.slice_cap);
        double lowest = 1.0;
        for (auto r : st.pairwise_rates) lowest = std::min(lowest, r);
        per_frame << f << "," << fr[f].start << "," << fr[f].size << "," << fixed(st.partition_rate) << ","
                  << fixed(lowest) << "," << st.bytes_saved << "\n";
        frames_json.push_back({{"frame", f},
                               {"start", fr[f].start},
                               {"partition_rate", st.partition_rate},
                               {"min_pairwise", lowest},
                               {"bytes_saved", st.bytes_saved}});
    }
    io::write_text(dir / "overlap.csv", per_frame.str());
    io::write_text(dir / "overlap.json", json{{"snapshots", seq.length()}, {"frames", frames_json}}.dump(2) + "\n");
    out << "overlap of " << fr.size() << " frames written to " << dir.string() << "\n";
    return 0;
}

struct KernelArgs {
    GraphSource src;
    std::string out;
    std::vector<std::uint32_t> dims{2, 4, 8, 16, 32, 64, 128};
};

int cmd_kernel(const KernelArgs& a, std::ostream& out)
{
    const auto adj = a.src.load();
    const auto dir = resolve_out(a.out, "analyze_kernel");
    fs::create_directories(dir);
    ExecConfig cfg;
    std::ostringstream csv;
    csv << "dim,requests,transactions,adjacency_requests,adjacency_transactions,active_thread_ratio\n";
    out << std::setw(6) << "dim" << std::setw(14) << "requests" << std::setw(14) << "transactions" << "\n";
    for (auto dim : a.dims) {
        if (dim == 0) throw ArgumentError("--dims entries must be positive");
        const auto feats = random_features(adj.node_count, dim, a.src.seed, 0);
        const auto st = transaction_trend(dim, cfg, adj, feats);
        csv << dim << "," << st.global_requests << "," << st.global_transactions << ","
            << st.adjacency_requests << "," << st.adjacency_transactions << ","
            << fixed(st.active_thread_ratio()) << "\n";
        out << std::setw(6) << dim << std::setw(14) << st.global_requests << std::setw(14)
            << st.global_transactions << "\n";
    }
    io::write_text(dir / "kernel.csv", csv.str());
    out << "written to " << dir.string() << "\n";
    return 0;
}

struct BalanceArgs {
    GraphSource src;
    std::string out;
    std::uint32_t slice_cap = 32;
};

int cmd_balance(const BalanceArgs& a, std::ostream& out)
{
    if (a.slice_cap == 0) throw ArgumentError("--slice-cap must be positive");
    const auto adj = a.src.load();
    const auto dir = resolve_out(a.out, "analyze_balance");
    fs::create_directories(dir);
    ExecConfig cfg;
    const auto csr = load_balance_report(adj, cfg);
    const auto sliced = load_balance_report(slice_from_csr(adj, a.slice_cap), cfg);
    const auto gap = [](const AccessStats& s) {
        return s.balanced_time > 0 ? (s.actual_time - s.balanced_time) / s.balanced_time : 0.0;
    };
    std::ostringstream csv;
    csv << "format,blocks,balanced_time,actual_time,gap\n";
    csv << "csr," << csr.per_block_work.size() << "," << fixed(csr.balanced_time) << ","
        << fixed(csr.actual_time) << "," << fixed(gap(csr)) << "\n";
    csv << "sliced," << sliced.per_block_work.size() << "," << fixed(sliced.balanced_time) << ","
        << fixed(sliced.actual_time) << "," << fixed(gap(sliced)) << "\n";
    io::write_text(dir / "balance.csv", csv.str());
    out << csv.str() << "written to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
    std::vector<std::string> data;
    std::string config;
    std::string out;
    std::vector<std::uint32_t> dims{kLargeGraphFeatureDim, kSmallGraphFeatureDim};
    std::vector<std::uint32_t> candidates = kDefaultCandidates;
    std::uint32_t samples = 5;
    std::uint64_t seed = 0;
    double bandwidth = ResourceModel{}.transfer_bandwidth;
    double latency = ResourceModel{}.transfer_latency;
};

int cmd_build_profile(const ProfileArgs& a, std::ostream& out)
{
    std::vector<SnapshotSequence> data;
    ProfileOptions opt;
    opt.dims = a.dims;
    opt.candidates = a.candidates;
    opt.samples = a.samples;
    opt.seed = a.seed;
    opt.machine = {a.bandwidth, a.latency};
    if (!a.config.empty()) {
        const auto cfg = load_experiment(a.config);
        data.push_back(load_dataset(cfg));
        opt.machine = {cfg.resources.transfer_bandwidth, cfg.resources.transfer_latency};
    }
    for (const auto& d : a.data) data.push_back(read_sequence(d));
    if (data.empty()) throw ArgumentError("give --data or --config");
    const auto profile = build_profile(data, opt);
    const fs::path path = a.out.empty() ? output_root() / "profile.json" : fs::path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_profile(profile, path);
    out << "profile with " << profile.table.size() << " entries written to " << path.string() << "\n";
    return 0;
}

struct ExplainArgs {
    std::string config;
    std::string profile;
    bool build = false;
    std::optional<std::size_t> frame;
};

int cmd_explain(const ExplainArgs& a, std::ostream& out)
{
    auto cfg = load_experiment(a.config);
    if (!a.profile.empty()) cfg.profile = a.profile;
    cfg.baseline = false;
    cfg.tuner = true;
    cfg.forced_s_per = 0;
    cfg.validate();
    const auto seq = load_dataset(cfg);
    TunerProfile profile;
    if (!cfg.profile.empty() && fs::exists(cfg.profile)) {
        profile = load_profile(cfg.profile);
    } else if (a.build) {
        profile = build_run_profile(cfg, seq);
    } else {
        throw ConfigurationError("no tuner profile found; pass --profile or --build-profile");
    }
    auto sim = to_sim_config(cfg);
    sim.training_epochs = 1;
    const auto result = run_training(seq, sim, &profile);
    const auto& frames = result.preparation.frames;
    if (a.frame && *a.frame >= frames.size()) throw ArgumentError("--frame beyond the frame count");
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (a.frame && *a.frame != f) continue;
        out << "frame " << f << ": OR=" << fixed(result.preparation.observations[f].frame_or(), 4) << "\n"
            << explain(frames[f], result.decisions[f]);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::string profile;
    bool build_profile = false;
    std::string baseline;
    bool sync = false;
    bool ab = false;
    std::optional<std::uint64_t> seed;
    std::string model;
    std::string reuse;
    std::optional<std::uint32_t> s_per;
    bool no_tuner = false;
};

void print_run(const RunOutputs& r, std::ostream& out)
{
    out << r.report.mode << ": mean epoch time " << fixed(r.report.mean_epoch_time, 3)
        << ", transfer fraction " << fixed(r.report.transfer_fraction, 4) << ", outputs in "
        << r.directory.string() << "\n";
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out)
{
    auto cfg = load_experiment(a.config);
    if (!a.profile.empty()) cfg.profile = a.profile;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.model.empty()) cfg.model = a.model;
    if (!a.reuse.empty()) cfg.reuse = a.reuse;
    if (a.s_per) cfg.forced_s_per = *a.s_per;
    if (a.no_tuner) cfg.tuner = false;
    if (!a.baseline.empty()) {
        if (a.baseline != "one-snapshot") throw ArgumentError("--baseline accepts only one-snapshot");
        cfg.baseline = true;
    }
    if (a.sync) cfg.baseline_async = false;
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (cfg.output_dir.empty()) cfg.output_dir = output_root() / "simulate";

    if (!a.ab) {
        print_run(run_experiment(cfg, a.build_profile), out);
        return 0;
    }

    // A/B: the same config once as the one-snapshot baseline, once as PiPAD
    const fs::path root = cfg.output_dir;
    auto base_cfg = cfg;
    base_cfg.baseline = true;
    base_cfg.output_dir = root / "baseline";
    auto pipad_cfg = cfg;
    pipad_cfg.baseline = false;
    pipad_cfg.output_dir = root / "pipad";
    const auto base = run_experiment(base_cfg, a.build_profile);
    const auto pip = run_experiment(pipad_cfg, a.build_profile);
    const double ratio = pip.report.mean_epoch_time > 0
                             ? base.report.mean_epoch_time / pip.report.mean_epoch_time
                             : 0.0;
    std::ostringstream csv;
    csv << "metric,value\n"
        << "baseline_epoch_time," << fixed(base.report.mean_epoch_time) << "\n"
        << "pipad_epoch_time," << fixed(pip.report.mean_epoch_time) << "\n"
        << "epoch_time_ratio," << fixed(ratio) << "\n"
        << "baseline_transfer_fraction," << fixed(base.report.transfer_fraction) << "\n"
        << "pipad_transfer_fraction," << fixed(pip.report.transfer_fraction) << "\n";
    io::write_text(root / "ab.csv", csv.str());
    print_run(base, out);
    print_run(pip, out);
    out << "epoch time ratio (baseline / pipad) " << fixed(ratio, 3) << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Simulated pipeline-parallel DGNN training on discrete-time dynamic graphs", "pipad"};
    app.require_subcommand(1);
    app.footer(std::string("Commands without --out write under $") + kOutputRootEnv + " (default ./pipad_out).");

    ConvertArgs conv;
    auto* convert = app.add_subcommand("convert", "Ingest a temporal edge list into snapshots and sliced CSR files");
    convert->add_option("--input", conv.input, "`src dst timestamp [weight]` lines")->required();
    convert->add_option("--out", conv.out, "Output directory");
    convert->add_option("--nodes", conv.nodes, "Vertex count")->required();
    convert->add_option("--slice-cap", conv.slice_cap, "Nonzeros per slice")->capture_default_str();
    convert->add_option("--edge-life", conv.edge_life, "Snapshots an edge stays alive")->capture_default_str();
    convert->add_option("--interval", conv.interval, "Timestamp units per snapshot")->capture_default_str();
    convert->add_option("--buckets", conv.buckets, "Sequence length; later events are dropped");
    convert->add_option("--feature-dim", conv.feature_dim, "Feature width")->capture_default_str();
    convert->add_option("--features", conv.features, "random, constant or file")->capture_default_str();
    convert->add_option("--feature-file", conv.feature_file, "Dense feature file for --features file");
    convert->add_option("--seed", conv.seed, "Feature seed")->capture_default_str();

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a seeded synthetic evolving graph");
    generate->add_option("--nodes", gen.p.node_count, "Vertex count")->capture_default_str();
    generate->add_option("--edges", gen.p.base_edges, "Edges per snapshot")->capture_default_str();
    generate->add_option("--steps", gen.p.steps, "Snapshot count")->capture_default_str();
    generate->add_option("--churn", gen.p.churn_rate, "Fraction of edges replaced per step")->capture_default_str();
    generate->add_option("--feature-dim", gen.p.feature_dim, "Feature width")->capture_default_str();
    generate->add_option("--seed", gen.p.seed, "Seed")->capture_default_str();
    generate->add_option("--out", gen.out, "Output directory");

    auto* analyze = app.add_subcommand("analyze", "Overlap, kernel and load-balance reports");
    analyze->require_subcommand(1);
    OverlapArgs ov;
    auto* overlap = analyze->add_subcommand("overlap", "Pairwise and per-frame overlap rates");
    overlap->add_option("--data", ov.data, "Sequence directory")->required();
    overlap->add_option("--out", ov.out, "Output directory");
    overlap->add_option("--frame-size", ov.frame_size, "Frame size")->capture_default_str();
    overlap->add_option("--stride", ov.stride, "Frame stride")->capture_default_str();
    overlap->add_option("--slice-cap", ov.slice_cap, "Nonzeros per slice")->capture_default_str();

    const auto add_source = [](CLI::App* cmd, GraphSource& src) {
        cmd->add_option("--data", src.data, "Sequence directory; omit to generate a graph");
        cmd->add_option("--snapshot", src.snapshot, "Snapshot of --data")->capture_default_str();
        cmd->add_option("--nodes", src.nodes, "Generated vertex count")->capture_default_str();
        cmd->add_option("--density", src.density, "Generated edge density")->capture_default_str();
        cmd->add_option("--edges", src.edges, "Generated edge count (overrides --density)");
        cmd->add_option("--skew", src.skew, "Power-law exponent of row degrees, 0 for uniform")->capture_default_str();
        cmd->add_option("--seed", src.seed, "Seed")->capture_default_str();
    };
    KernelArgs ker;
    auto* kernel = analyze->add_subcommand("kernel", "Requests and transactions over a feature-width sweep");
    add_source(kernel, ker.src);
    kernel->add_option("--dims", ker.dims, "Feature widths")->delimiter(',');
    kernel->add_option("--out", ker.out, "Output directory");
    BalanceArgs bal;
    bal.src.density = 0.0;
    bal.src.edges = 50000;
    bal.src.skew = 1.0;
    auto* balance = analyze->add_subcommand("balance", "Balanced vs actual time for CSR and sliced blocks");
    add_source(balance, bal.src);
    balance->add_option("--slice-cap", bal.slice_cap, "Nonzeros per slice")->capture_default_str();
    balance->add_option("--out", bal.out, "Output directory");

    auto* tune = app.add_subcommand("tune", "Tuner profile and decisions");
    tune->require_subcommand(1);
    ProfileArgs prof;
    auto* build = tune->add_subcommand("build-profile", "Measure the offline speedup table");
    build->add_option("--data", prof.data, "Sequence directories")->take_all();
    build->add_option("--config", prof.config, "Experiment config whose dataset and machine to use");
    build->add_option("--out", prof.out, "Profile path");
    build->add_option("--dims", prof.dims, "Feature widths")->delimiter(',');
    build->add_option("--candidates", prof.candidates, "Partition sizes")->delimiter(',');
    build->add_option("--samples", prof.samples, "Samples per entry")->capture_default_str();
    build->add_option("--seed", prof.seed, "Seed")->capture_default_str();
    build->add_option("--bandwidth", prof.bandwidth, "Transfer bandwidth")->capture_default_str();
    build->add_option("--latency", prof.latency, "Transfer latency")->capture_default_str();
    ExplainArgs expl;
    auto* explain_cmd = tune->add_subcommand("explain", "Print the decision rationale per frame");
    explain_cmd->add_option("--config", expl.config, "Experiment config")->required();
    explain_cmd->add_option("--profile", expl.profile, "Profile path");
    explain_cmd->add_flag("--build-profile", expl.build, "Measure a profile when none is found");
    explain_cmd->add_option("--frame", expl.frame, "Only this frame");

    SimulateArgs simu;
    auto* simulate = app.add_subcommand("simulate", "Run an experiment and write timeline, summary and decisions");
    simulate->add_option("--config", simu.config, "Experiment config")->required();
    simulate->add_option("--out", simu.out, "Output directory (overrides the config)");
    simulate->add_option("--profile", simu.profile, "Profile path (overrides the config)");
    simulate->add_flag("--build-profile", simu.build_profile, "Measure a profile when none is found");
    simulate->add_option("--baseline", simu.baseline, "one-snapshot: no decomposition, no reuse, COO shipping");
    simulate->add_flag("--sync", simu.sync, "Baseline waits for compute before each transfer");
    simulate->add_flag("--ab", simu.ab, "Run baseline and PiPAD mode and report the epoch-time ratio");
    simulate->add_option("--seed", simu.seed, "Seed (overrides the config)");
    simulate->add_option("--model", simu.model, "tgcn, mpnn_lstm or evolvegcn");
    simulate->add_option("--reuse", simu.reuse, "off, inter_frame or full");
    simulate->add_option("--s-per", simu.s_per, "Pin every frame's partition size");
    simulate->add_flag("--no-tuner", simu.no_tuner, "Run every frame one snapshot at a time");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(exit_code::usage);
    }

    try {
        if (*convert) return cmd_convert(conv, out);
        if (*generate) return cmd_generate(gen, out);
        if (*overlap) return cmd_overlap(ov, out);
        if (*kernel) return cmd_kernel(ker, out);
        if (*balance) return cmd_balance(bal, out);
        if (*build) return cmd_build_profile(prof, out);
        if (*explain_cmd) return cmd_explain(expl, out);
        if (*simulate) return cmd_simulate(simu, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(exit_code::data_validation);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(exit_code::capacity);
    }
    return static_cast<int>(exit_code::usage);
}

}  // namespace pipad::cli
