#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pipad/dtdg.hpp"
#include "pipad/pipeline.hpp"
#include "pipad/tuner.hpp"

namespace pipad {

/// Where the snapshots come from: a sequence directory written by
/// `convert`/`generate`, or generator parameters.
struct DatasetSpec {
    std::filesystem::path path;
    std::optional<SyntheticParams> synthetic;
};

/// Everything one run needs. Serializes to JSON and is copied into the
/// run's output directory.
struct ExperimentConfig {
    DatasetSpec dataset;
    std::string model = "tgcn";
    std::uint32_t hidden_dim = 16;
    std::size_t frame_size = 16;
    std::size_t stride = 1;
    std::vector<std::uint32_t> candidates = kDefaultCandidates;
    std::uint32_t preparing_epochs = 2;
    std::uint32_t training_epochs = 2;
    ResourceModel resources;
    std::string reuse = "full";
    bool tuner = true;
    std::uint32_t forced_s_per = 0;
    std::uint64_t seed = 0;
    std::filesystem::path profile;  // empty: none given
    std::uint32_t profile_samples = 5;
    std::filesystem::path output_dir;
    bool baseline = false;
    bool baseline_async = true;

    void validate() const;
};

std::string to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const std::string& text);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Reads or generates the dataset; the generator seed is the config seed
/// unless the synthetic block names its own.
SnapshotSequence load_dataset(const ExperimentConfig& cfg);

SimConfig to_sim_config(const ExperimentConfig& cfg);

/// Profile measured on the run's own dataset with the run's machine
/// constants.
TunerProfile build_run_profile(const ExperimentConfig& cfg, const SnapshotSequence& seq);

struct RunOutputs {
    SimResult result;
    Report report;
    std::filesystem::path directory;
};

/// Simulates one experiment and writes config.json, summary.csv,
/// report.json, timeline.json and, for PiPAD mode, decisions.log.
RunOutputs run_experiment(const ExperimentConfig& cfg, bool build_profile_if_missing);

}  // namespace pipad
