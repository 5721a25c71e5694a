#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fetalchd/curation.hpp"
#include "fetalchd/manifest.hpp"
#include "fetalchd/metrics.hpp"
#include "fetalchd/network.hpp"
#include "fetalchd/phantom.hpp"
#include "fetalchd/robust.hpp"
#include "fetalchd/training.hpp"

namespace fetalchd::pipeline {

/// Everything one experiment needs, loadable from a single JSON document.
/// Stage seeds derive from the global seed unless the document pins them.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path data_dir = "data";
  std::filesystem::path model_dir = "models";
  std::filesystem::path report_dir = "reports";
  PhantomConfig phantom;
  curation::CurationConfig curation;
  train::TrainConfig train;
  robust::PerturbationConfig perturbation;
  net::ArchConfig arch;      // view_classes fixed per use (3 diagnosis, 4 curation)
  int curation_epochs = 6;   // on-the-fly curation view-model training
  std::uint64_t curation_seed = 0;    // derived
  std::uint64_t model_init_seed = 0;  // derived

  void validate() const;
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<train::LambdaMode> lambda_mode;
  std::optional<robust::Strategy> strategy;
  std::optional<int> steps;
  std::vector<std::string> sets;  // repeatable "dotted.path=value"
};

/// Defaults -> optional JSON file -> --set overrides -> flag overrides, then
/// seed derivation and validation. Throws ConfigError / IoError.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const ConfigOverrides& overrides);

RunConfig default_run_config();

// ---- stage runners ------------------------------------------------------

struct GenerateSummary {
  std::filesystem::path manifest_path;
  int n_patients_nc = 0, n_patients_hlhs = 0;
  int n_frames = 0, n_clean = 0, n_contaminant = 0;
  std::map<std::string, int> clean_per_view;  // per class:view key "NC/FourCH"
};
GenerateSummary run_generate(const RunConfig& config);

struct CurateSummary {
  std::filesystem::path curated_manifest_path;
  std::filesystem::path report_path;
  std::array<int, 6> disposition_counts{};
  double nc_view_agreement = 0;    // kept NC frames, curated vs generator view
  double hlhs_view_agreement = 0;  // reported, never asserted
  int n_kept = 0;
};
CurateSummary run_curate(const RunConfig& config);

struct TrainSummary {
  train::LambdaMode mode;
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  int best_epoch = 0;
  double best_val_auc = 0;
  int epochs_run = 0;
};
TrainSummary run_train(const RunConfig& config, train::LambdaMode mode);

struct EvaluateSummary {
  std::filesystem::path json_path, text_path, verdicts_path;
  std::vector<metrics::TableRow> rows;  // the five Table-style rows
  std::array<robust::TierStats, 3> retained_per_tier;
  double retained_overall = 0;
};
EvaluateSummary run_evaluate(const RunConfig& config);

struct AblateSummary {
  std::filesystem::path csv_path, svg_path;
  int n_rows = 0;
};
AblateSummary run_ablate(const RunConfig& config);

// ---- shared loaders (tests and the acceptance suite use these too) -------

std::filesystem::path checkpoint_path(const RunConfig& config,
                                      train::LambdaMode mode);

/// Reads every manifest record's frame file back into memory.
std::vector<Frame> load_frames(const DatasetManifest& manifest,
                               const std::filesystem::path& base_dir);

/// Kept (KeptPlane) frames of the given split, labeled with the
/// curation-assigned view and the patient's pathology.
std::vector<train::TrainingExample> load_kept_examples(
    const CuratedManifest& manifest, const std::filesystem::path& base_dir,
    const net::ArchConfig& arch, Split split);

/// Train/Val kept frames for the diagnosis network.
train::TrainingData load_training_data(const CuratedManifest& manifest,
                                       const std::filesystem::path& base_dir,
                                       const net::ArchConfig& arch);

/// NC-patient frames labeled with generator views (contaminants become
/// Background) for the 4-class curation model.
train::TrainingData load_curation_training_data(
    const DatasetManifest& manifest, const std::filesystem::path& base_dir,
    const net::ArchConfig& arch);

}  // namespace fetalchd::pipeline
