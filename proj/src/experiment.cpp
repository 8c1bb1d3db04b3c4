#include "pipad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pipad/binary_io.hpp"
#include "pipad/errors.hpp"

namespace pipad {

using nlohmann::json;
using io::read_file;
using io::write_text;

namespace {

json number_or_inf(double v)
{
    if (std::isinf(v)) return "inf";
    return v;
}

double read_number(const json& j, const char* key, double fallback)
{
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ValidationError(std::string("config field '") + key + "' must be a number");
    return v.get<double>();
}

template <class T>
T read(const json& j, const char* key, T fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace

void ExperimentConfig::validate() const
{
    if (dataset.path.empty() && !dataset.synthetic) {
        throw ArgumentError("config names no dataset (set dataset.path or dataset.synthetic)");
    }
    parse_model(model);
    parse_reuse(reuse);
    to_sim_config(*this).validate();
}

std::string to_json(const ExperimentConfig& cfg)
{
    json ds = json::object();
    if (!cfg.dataset.path.empty()) ds["path"] = cfg.dataset.path.string();
    if (cfg.dataset.synthetic) {
        const auto& p = *cfg.dataset.synthetic;
        ds["synthetic"] = {{"node_count", p.node_count},
                           {"base_edges", p.base_edges},
                           {"steps", p.steps},
                           {"churn_rate", p.churn_rate},
                           {"feature_dim", p.feature_dim},
                           {"seed", p.seed}};
    }
    const auto& r = cfg.resources;
    json j;
    j["dataset"] = ds;
    j["model"] = cfg.model;
    j["hidden_dim"] = cfg.hidden_dim;
    j["frame_size"] = cfg.frame_size;
    j["stride"] = cfg.stride;
    j["candidates"] = cfg.candidates;
    j["preparing_epochs"] = cfg.preparing_epochs;
    j["training_epochs"] = cfg.training_epochs;
    j["resources"] = {{"host_workers", r.host_workers},
                      {"transfer_bandwidth", number_or_inf(r.transfer_bandwidth)},
                      {"transfer_latency", r.transfer_latency},
                      {"compute_throughput", r.compute_throughput},
                      {"device_memory", r.device_memory},
                      {"kernel_launch", r.kernel_launch},
                      {"host_bandwidth", number_or_inf(r.host_bandwidth)},
                      {"decide_cost", r.decide_cost}};
    j["reuse"] = cfg.reuse;
    j["tuner"] = cfg.tuner;
    j["forced_s_per"] = cfg.forced_s_per;
    j["seed"] = cfg.seed;
    j["profile"] = cfg.profile.string();
    j["profile_samples"] = cfg.profile_samples;
    j["output_dir"] = cfg.output_dir.string();
    j["baseline"] = {{"enabled", cfg.baseline}, {"async", cfg.baseline_async}};
    return j.dump(2) + "\n";
}

ExperimentConfig experiment_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");

    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const auto& ds = j.at("dataset");
        cfg.dataset.path = read<std::string>(ds, "path", "");
        if (ds.contains("synthetic")) {
            const auto& s = ds.at("synthetic");
            SyntheticParams p;
            p.node_count = read(s, "node_count", p.node_count);
            p.base_edges = read(s, "base_edges", p.base_edges);
            p.steps = read(s, "steps", p.steps);
            p.churn_rate = read_number(s, "churn_rate", p.churn_rate);
            p.feature_dim = read(s, "feature_dim", p.feature_dim);
            p.seed = read(s, "seed", read<std::uint64_t>(j, "seed", 0));
            cfg.dataset.synthetic = p;
        }
    }
    cfg.model = read(j, "model", cfg.model);
    cfg.hidden_dim = read(j, "hidden_dim", cfg.hidden_dim);
    cfg.frame_size = read(j, "frame_size", cfg.frame_size);
    cfg.stride = read(j, "stride", cfg.stride);
    cfg.candidates = read(j, "candidates", cfg.candidates);
    cfg.preparing_epochs = read(j, "preparing_epochs", cfg.preparing_epochs);
    cfg.training_epochs = read(j, "training_epochs", cfg.training_epochs);
    if (j.contains("resources")) {
        const auto& r = j.at("resources");
        auto& m = cfg.resources;
        m.host_workers = read(r, "host_workers", m.host_workers);
        m.transfer_bandwidth = read_number(r, "transfer_bandwidth", m.transfer_bandwidth);
        m.transfer_latency = read_number(r, "transfer_latency", m.transfer_latency);
        m.compute_throughput = read_number(r, "compute_throughput", m.compute_throughput);
        m.device_memory = read(r, "device_memory", m.device_memory);
        m.kernel_launch = read_number(r, "kernel_launch", m.kernel_launch);
        m.host_bandwidth = read_number(r, "host_bandwidth", m.host_bandwidth);
        m.decide_cost = read_number(r, "decide_cost", m.decide_cost);
    }
    cfg.reuse = read(j, "reuse", cfg.reuse);
    cfg.tuner = read(j, "tuner", cfg.tuner);
    cfg.forced_s_per = read(j, "forced_s_per", cfg.forced_s_per);
    cfg.seed = read(j, "seed", cfg.seed);
    cfg.profile = read<std::string>(j, "profile", "");
    cfg.profile_samples = read(j, "profile_samples", cfg.profile_samples);
    cfg.output_dir = read<std::string>(j, "output_dir", "");
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        cfg.baseline = read(b, "enabled", false);
        cfg.baseline_async = read(b, "async", true);
    }
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    auto cfg = experiment_from_json(std::string(bytes.begin(), bytes.end()));
    // relative dataset and profile paths are relative to the config file
    const auto base = path.parent_path();
    if (!cfg.dataset.path.empty() && cfg.dataset.path.is_relative()) cfg.dataset.path = base / cfg.dataset.path;
    if (!cfg.profile.empty() && cfg.profile.is_relative()) cfg.profile = base / cfg.profile;
    return cfg;
}

SnapshotSequence load_dataset(const ExperimentConfig& cfg)
{
    if (cfg.dataset.synthetic) return generate_synthetic(*cfg.dataset.synthetic);
    if (cfg.dataset.path.empty()) throw ArgumentError("config names no dataset");
    return read_sequence(cfg.dataset.path);
}

SimConfig to_sim_config(const ExperimentConfig& cfg)
{
    SimConfig sim;
    sim.model = ModelTemplate::make(parse_model(cfg.model), cfg.hidden_dim);
    sim.resources = cfg.resources;
    sim.frame_size = cfg.frame_size;
    sim.stride = cfg.stride;
    sim.candidates = cfg.candidates;
    sim.preparing_epochs = cfg.preparing_epochs;
    sim.training_epochs = cfg.training_epochs;
    sim.reuse = parse_reuse(cfg.reuse);
    sim.tuner = cfg.tuner;
    sim.forced_s_per = cfg.forced_s_per;
    sim.seed = cfg.seed;
    sim.baseline = cfg.baseline;
    sim.baseline_async = cfg.baseline_async;
    return sim;
}

TunerProfile build_run_profile(const ExperimentConfig& cfg, const SnapshotSequence& seq)
{
    ProfileOptions opt;
    opt.candidates = cfg.candidates;
    opt.dims = {seq.empty() ? kSmallGraphFeatureDim : seq.feature_dim(), cfg.hidden_dim};
    std::sort(opt.dims.begin(), opt.dims.end());
    opt.dims.erase(std::unique(opt.dims.begin(), opt.dims.end()), opt.dims.end());
    opt.samples = cfg.profile_samples;
    opt.seed = cfg.seed;
    opt.machine = {cfg.resources.transfer_bandwidth, cfg.resources.transfer_latency};
    const std::vector<SnapshotSequence> data{seq};
    return build_profile(data, opt);
}

RunOutputs run_experiment(const ExperimentConfig& cfg, bool build_profile_if_missing)
{
    cfg.validate();
    if (cfg.output_dir.empty()) throw ArgumentError("no output directory given");
    const auto seq = load_dataset(cfg);
    const auto sim = to_sim_config(cfg);

    std::filesystem::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "config.json", to_json(cfg));

    std::optional<TunerProfile> profile;
    const bool needs_profile = !cfg.baseline && cfg.tuner && cfg.forced_s_per == 0 && !seq.empty();
    if (needs_profile) {
        if (!cfg.profile.empty() && std::filesystem::exists(cfg.profile)) {
            profile = load_profile(cfg.profile);
        } else if (build_profile_if_missing) {
            profile = build_run_profile(cfg, seq);
            save_profile(*profile, cfg.output_dir / "profile.json");
        } else {
            throw ConfigurationError(
                cfg.profile.empty()
                    ? "no tuner profile configured; pass --build-profile, set \"profile\", or run `pipad tune build-profile`"
                    : "tuner profile " + cfg.profile.string() +
                          " not found; pass --build-profile or run `pipad tune build-profile`");
        }
    }

    RunOutputs out;
    out.directory = cfg.output_dir;
    out.result = run_training(seq, sim, profile ? &*profile : nullptr);
    check_timeline(out.result);
    out.report = make_report(out.result);

    write_text(cfg.output_dir / "summary.csv", summary_csv(out.report));
    write_text(cfg.output_dir / "report.json", report_json(out.report, out.result));
    write_text(cfg.output_dir / "timeline.json", timeline_json(out.result));
    if (!cfg.baseline && !out.result.decisions.empty()) {
        std::ostringstream log;
        const auto& frames = out.result.preparation.frames;
        for (std::size_t f = 0; f < frames.size(); ++f) {
            log << "frame " << f << ": " << explain(frames[f], out.result.decisions[f]) << "\n";
        }
        write_text(cfg.output_dir / "decisions.log", log.str());
    }
    return out;
}

}  // namespace pipad
