#include "fetalchd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>

#include "fetalchd/errors.hpp"
#include "fetalchd/rng.hpp"

namespace fetalchd::pipeline {

using nlohmann::json;

namespace {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void apply_phantom(const json& j, PhantomConfig& c) {
  get_if_present(j, "image_height", c.image_height);
  get_if_present(j, "image_width", c.image_width);
  get_if_present(j, "n_patients_nc", c.n_patients_nc);
  get_if_present(j, "n_patients_hlhs", c.n_patients_hlhs);
  get_if_present(j, "frames_per_patient", c.frames_per_patient);
  if (j.contains("quality_mix")) {
    const auto& q = j.at("quality_mix");
    if (!q.is_array() || q.size() != 3)
      throw ConfigError("phantom.quality_mix must be a [low, medium, high] triple");
    for (int i = 0; i < 3; ++i)
      c.quality_mix[static_cast<std::size_t>(i)] = q.at(i).get<double>();
  }
  get_if_present(j, "contaminant_fraction", c.contaminant_fraction);
  get_if_present(j, "nuisance_strength", c.nuisance_strength);
  get_if_present(j, "hlhs_lv_scale", c.hlhs_lv_scale);
  get_if_present(j, "master_seed", c.master_seed);
}

void apply_curation(const json& j, curation::CurationConfig& c) {
  get_if_present(j, "color_spread_threshold", c.color_spread_threshold);
  get_if_present(j, "color_fraction_threshold", c.color_fraction_threshold);
  get_if_present(j, "split_band_intensity", c.split_band_intensity);
  get_if_present(j, "split_band_width", c.split_band_width);
  get_if_present(j, "mmode_autocorr_threshold", c.mmode_autocorr_threshold);
  get_if_present(j, "plane_confidence_threshold", c.plane_confidence_threshold);
}

void apply_train(const json& j, train::TrainConfig& c) {
  get_if_present(j, "batch_size", c.batch_size);
  get_if_present(j, "epochs", c.epochs);
  get_if_present(j, "lr", c.lr);
  get_if_present(j, "momentum", c.momentum);
  if (j.contains("lambda_mode"))
    c.lambda_mode =
        train::lambda_mode_from_string(j.at("lambda_mode").get<std::string>());
  get_if_present(j, "seed", c.seed);
  get_if_present(j, "patience", c.patience);
  get_if_present(j, "lr_decay", c.lr_decay);
  get_if_present(j, "lr_decay_every", c.lr_decay_every);
}

void apply_perturbation(const json& j, robust::PerturbationConfig& c) {
  get_if_present(j, "alpha", c.alpha);
  get_if_present(j, "epsilon", c.epsilon);
  get_if_present(j, "n_steps", c.n_steps);
  if (j.contains("strategy"))
    c.strategy =
        robust::strategy_from_string(j.at("strategy").get<std::string>());
  get_if_present(j, "seed", c.seed);
}

void apply_arch(const json& j, net::ArchConfig& c) {
  get_if_present(j, "n_blocks", c.n_blocks);
  get_if_present(j, "base_channels", c.base_channels);
  get_if_present(j, "input_h", c.input_h);
  get_if_present(j, "input_w", c.input_w);
}

/// "a.b.c=value" -> sets doc["a"]["b"]["c"]. The value parses as JSON when
/// possible and falls back to a string.
void apply_set_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects dotted.path=value, got: " + spec);
  std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  std::string pointer = "/";
  for (char ch : path) pointer += ch == '.' ? '/' : std::string(1, ch)[0];
  try {
    doc[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("--set " + spec + ": " + e.what());
  }
}

void write_text_file(const std::string& text, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  write_text_file(j.dump(2) + "\n", path);
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

void RunConfig::validate() const {
  phantom.validate();
  curation.validate();
  train.validate();
  perturbation.validate();
  if (curation_epochs < 1)
    throw ConfigError("curation_epochs must be >= 1");
  if (data_dir.empty() || model_dir.empty() || report_dir.empty())
    throw ConfigError("data_dir/model_dir/report_dir must be set");
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const ConfigOverrides& overrides) {
  json doc = json::object();
  if (file) doc = load_json_file(*file);
  for (const std::string& s : overrides.sets) apply_set_override(doc, s);

  RunConfig cfg;
  get_if_present(doc, "seed", cfg.seed);
  if (overrides.seed) cfg.seed = *overrides.seed;
  std::string dir;
  if (doc.contains("data_dir")) cfg.data_dir = doc.at("data_dir").get<std::string>();
  if (doc.contains("model_dir")) cfg.model_dir = doc.at("model_dir").get<std::string>();
  if (doc.contains("report_dir")) cfg.report_dir = doc.at("report_dir").get<std::string>();
  get_if_present(doc, "curation_epochs", cfg.curation_epochs);

  if (doc.contains("phantom")) apply_phantom(doc.at("phantom"), cfg.phantom);
  if (doc.contains("curation")) apply_curation(doc.at("curation"), cfg.curation);
  if (doc.contains("train")) apply_train(doc.at("train"), cfg.train);
  if (doc.contains("perturbation"))
    apply_perturbation(doc.at("perturbation"), cfg.perturbation);
  if (doc.contains("arch")) apply_arch(doc.at("arch"), cfg.arch);

  if (overrides.lambda_mode) cfg.train.lambda_mode = *overrides.lambda_mode;
  if (overrides.strategy) cfg.perturbation.strategy = *overrides.strategy;
  if (overrides.steps) cfg.perturbation.n_steps = *overrides.steps;

  // stage seeds derive from the global seed unless pinned in the document
  const bool phantom_seed_set =
      doc.contains("phantom") && doc.at("phantom").contains("master_seed");
  const bool train_seed_set =
      doc.contains("train") && doc.at("train").contains("seed");
  const bool perturb_seed_set =
      doc.contains("perturbation") && doc.at("perturbation").contains("seed");
  if (!phantom_seed_set) cfg.phantom.master_seed = mix_seed(cfg.seed, 1);
  if (!train_seed_set) cfg.train.seed = mix_seed(cfg.seed, 2);
  if (!perturb_seed_set) cfg.perturbation.seed = mix_seed(cfg.seed, 3);
  cfg.curation_seed = mix_seed(cfg.seed, 4);
  cfg.model_init_seed = mix_seed(cfg.seed, 5);

  cfg.validate();
  return cfg;
}

GenerateSummary run_generate(const RunConfig& config) {
  config.validate();
  const DatasetManifest manifest =
      generate_dataset(config.phantom, config.data_dir);
  GenerateSummary s;
  s.manifest_path = config.data_dir / "manifest.json";
  s.n_patients_nc = config.phantom.n_patients_nc;
  s.n_patients_hlhs = config.phantom.n_patients_hlhs;
  for (const auto& rec : manifest.records) {
    ++s.n_frames;
    if (rec.kind == FrameKind::BMode) {
      ++s.n_clean;
      ++s.clean_per_view[to_string(rec.pathology) + "/" + to_string(rec.view)];
    } else {
      ++s.n_contaminant;
    }
  }
  return s;
}

std::vector<Frame> load_frames(const DatasetManifest& manifest,
                               const std::filesystem::path& base_dir) {
  std::vector<Frame> frames;
  frames.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    Frame f;
    f.image = read_pnm(base_dir / rec.file_path);
    f.kind = rec.kind;
    f.view = rec.view;
    f.pathology = rec.pathology;
    f.quality = rec.quality;
    f.patient_id = rec.patient_id;
    f.frame_id = rec.frame_id;
    frames.push_back(std::move(f));
  }
  return frames;
}

namespace {

train::TrainingExample example_from_frame(const Frame& frame,
                                          const net::ArchConfig& arch,
                                          int view_label) {
  train::TrainingExample ex;
  ex.pixels = net::preprocess(frame.image, arch).v;
  ex.chd_label = frame.pathology == Pathology::HLHS ? 1 : 0;
  ex.view_label = view_label;
  ex.patient_id = frame.patient_id;
  ex.frame_id = frame.frame_id;
  ex.quality = frame.quality;
  return ex;
}

net::Model obtain_curation_model(const RunConfig& config,
                                 const DatasetManifest& manifest) {
  const auto path = config.model_dir / "curation_model.bin";
  if (std::filesystem::exists(path)) return net::load_model(path);

  train::TrainingData data =
      load_curation_training_data(manifest, config.data_dir, config.arch);
  net::ArchConfig arch = config.arch;
  arch.view_classes = 4;
  const net::Model init = net::build_model(arch, config.curation_seed);
  train::TrainConfig tc = config.train;
  tc.epochs = config.curation_epochs;
  tc.seed = config.curation_seed;
  tc.lambda_mode = train::LambdaMode::Off;  // ignored by the view trainer
  const net::Model model = train::train_view_classifier(init, data, tc);
  ensure_dir(config.model_dir);
  net::save_model(model, path);
  return model;
}

}  // namespace

train::TrainingData load_curation_training_data(
    const DatasetManifest& manifest, const std::filesystem::path& base_dir,
    const net::ArchConfig& arch) {
  net::ArchConfig view_arch = arch;
  view_arch.view_classes = 4;
  train::TrainingData data;
  for (const auto& rec : manifest.records) {
    if (rec.pathology != Pathology::NC) continue;
    if (rec.split != Split::Train && rec.split != Split::Val) continue;
    Frame f;
    f.image = read_pnm(base_dir / rec.file_path);
    f.pathology = rec.pathology;
    f.quality = rec.quality;
    f.patient_id = rec.patient_id;
    f.frame_id = rec.frame_id;
    const int view_label = rec.kind == FrameKind::BMode
                               ? static_cast<int>(rec.view)
                               : 3;  // Background
    auto ex = example_from_frame(f, view_arch, view_label);
    (rec.split == Split::Train ? data.train : data.val).push_back(std::move(ex));
  }
  if (data.train.empty() || data.val.empty())
    throw ConfigError("curation model: no NC Train/Val frames in manifest");
  return data;
}

CurateSummary run_curate(const RunConfig& config) {
  config.validate();
  const auto manifest_path = config.data_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw IoError("run_curate: missing manifest " + manifest_path.string());
  const DatasetManifest manifest = DatasetManifest::load(manifest_path);
  const std::vector<Frame> frames = load_frames(manifest, config.data_dir);
  const net::Model view_model = obtain_curation_model(config, manifest);

  const curation::CurationReport report =
      curation::curate_frames(frames, view_model, config.curation);

  std::map<int, const curation::FrameDisposition*> by_frame;
  for (const auto& fd : report.dispositions) by_frame[fd.frame_id] = &fd;

  CuratedManifest curated;
  curated.config_digest = manifest.config_digest;
  int nc_kept = 0, nc_agree = 0, hlhs_kept = 0, hlhs_agree = 0;
  for (const auto& rec : manifest.records) {
    const auto it = by_frame.find(rec.frame_id);
    if (it == by_frame.end())
      throw NumericError("run_curate: disposition missing for frame " +
                         std::to_string(rec.frame_id));
    CuratedRecord cr;
    cr.base = rec;
    cr.disposition = it->second->disposition;
    cr.curated_view = it->second->curated_view;
    cr.confidence = it->second->confidence;
    if (cr.disposition == Disposition::KeptPlane &&
        rec.kind == FrameKind::BMode) {
      const bool agree = cr.curated_view == rec.view;
      if (rec.pathology == Pathology::NC) {
        ++nc_kept;
        nc_agree += agree ? 1 : 0;
      } else {
        ++hlhs_kept;
        hlhs_agree += agree ? 1 : 0;
      }
    }
    curated.records.push_back(std::move(cr));
  }
  ensure_dir(config.data_dir);
  const auto curated_path = config.data_dir / "curated_manifest.json";
  curated.save(curated_path);

  CurateSummary s;
  s.curated_manifest_path = curated_path;
  s.disposition_counts = report.counts;
  s.n_kept = report.count(Disposition::KeptPlane);
  s.nc_view_agreement = nc_kept > 0 ? static_cast<double>(nc_agree) / nc_kept : 0;
  s.hlhs_view_agreement =
      hlhs_kept > 0 ? static_cast<double>(hlhs_agree) / hlhs_kept : 0;

  json jreport;
  json counts = json::object();
  for (int d = 0; d < 6; ++d)
    counts[to_string(static_cast<Disposition>(d))] =
        report.counts[static_cast<std::size_t>(d)];
  jreport["disposition_counts"] = counts;
  json confusion = json::array();
  for (const auto& row : report.view_confusion) confusion.push_back(row);
  jreport["view_confusion"] = confusion;
  jreport["nc_view_agreement"] = s.nc_view_agreement;
  jreport["hlhs_view_agreement"] = s.hlhs_view_agreement;
  jreport["n_frames"] = static_cast<int>(manifest.records.size());
  ensure_dir(config.report_dir);
  s.report_path = config.report_dir / "curation_report.json";
  write_json_file(jreport, s.report_path);
  return s;
}

std::vector<train::TrainingExample> load_kept_examples(
    const CuratedManifest& manifest, const std::filesystem::path& base_dir,
    const net::ArchConfig& arch, Split split) {
  std::vector<train::TrainingExample> out;
  for (const auto& rec : manifest.records) {
    if (rec.base.split != split || rec.disposition != Disposition::KeptPlane)
      continue;
    Frame f;
    f.image = read_pnm(base_dir / rec.base.file_path);
    f.pathology = rec.base.pathology;
    f.quality = rec.base.quality;
    f.patient_id = rec.base.patient_id;
    f.frame_id = rec.base.frame_id;
    out.push_back(example_from_frame(f, arch, static_cast<int>(*rec.curated_view)));
  }
  return out;
}

train::TrainingData load_training_data(const CuratedManifest& manifest,
                                       const std::filesystem::path& base_dir,
                                       const net::ArchConfig& arch) {
  train::TrainingData data;
  data.train = load_kept_examples(manifest, base_dir, arch, Split::Train);
  data.val = load_kept_examples(manifest, base_dir, arch, Split::Val);
  return data;
}

std::filesystem::path checkpoint_path(const RunConfig& config,
                                      train::LambdaMode mode) {
  return config.model_dir / ("model_" + train::to_string(mode) + ".bin");
}

TrainSummary run_train(const RunConfig& config, train::LambdaMode mode) {
  config.validate();
  const auto curated_path = config.data_dir / "curated_manifest.json";
  if (!std::filesystem::exists(curated_path))
    throw IoError("run_train: missing curated manifest " + curated_path.string());
  const CuratedManifest curated = CuratedManifest::load(curated_path);
  const train::TrainingData data =
      load_training_data(curated, config.data_dir, config.arch);

  net::ArchConfig arch = config.arch;
  arch.view_classes = 3;
  const net::Model init = net::build_model(arch, config.model_init_seed);
  train::TrainConfig tc = config.train;
  tc.lambda_mode = mode;
  const train::TrainResult result = train::train(init, data, tc);

  ensure_dir(config.model_dir);
  TrainSummary s;
  s.mode = mode;
  s.checkpoint_path = checkpoint_path(config, mode);
  net::save_model(result.model, s.checkpoint_path);
  s.best_epoch = result.best_epoch;
  s.best_val_auc = result.best_val_auc;
  s.epochs_run = static_cast<int>(result.log.size());

  std::string lines;
  for (const auto& em : result.log) {
    json line{{"epoch", em.epoch},
              {"train_loss", em.train_loss},
              {"val_auc", em.val_auc}};
    if (em.view_loss_mean) line["view_loss_mean"] = *em.view_loss_mean;
    if (em.lambda_mean) {
      line["lambda_mean"] = *em.lambda_mean;
      line["lambda_min"] = *em.lambda_min;
      line["lambda_max"] = *em.lambda_max;
    }
    lines += line.dump() + "\n";
  }
  s.metrics_path =
      config.model_dir / ("metrics_" + train::to_string(mode) + ".jsonl");
  write_text_file(lines, s.metrics_path);
  return s;
}

namespace {

std::vector<metrics::EvalFrame> to_eval_frames(
    const std::vector<train::TrainingExample>& examples,
    const train::InferenceOutput& inference) {
  std::vector<metrics::EvalFrame> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    metrics::EvalFrame ef;
    ef.frame_id = examples[i].frame_id;
    ef.patient_id = examples[i].patient_id;
    ef.quality = examples[i].quality;
    ef.label = examples[i].chd_label;
    ef.hlhs_prob = inference.chd_probs[i][1];
    ef.predicted = net::argmax_row(inference.chd_probs[i]);
    ef.retained = true;
    out.push_back(ef);
  }
  return out;
}

std::vector<metrics::EvalFrame> filter_quality(
    const std::vector<metrics::EvalFrame>& frames, bool exclude_low) {
  std::vector<metrics::EvalFrame> out;
  for (const auto& f : frames)
    if (!exclude_low || f.quality != Quality::Low) out.push_back(f);
  return out;
}

json report_to_json(const metrics::EvalReport& r) {
  json j{{"stratum", r.stratum},
         {"n_frames", r.n_frames},
         {"n_retained", r.n_retained},
         {"precision_nc", r.nc.precision},
         {"precision_chd", r.chd.precision},
         {"recall_nc", r.nc.recall},
         {"recall_chd", r.chd.recall},
         {"f1_nc", r.nc.f1},
         {"f1_chd", r.chd.f1}};
  j["roc_auc"] = r.auc_defined ? json(r.roc_auc) : json(nullptr);
  j["patient_auc"] = r.patient_auc ? json(*r.patient_auc) : json(nullptr);
  return j;
}

}  // namespace

EvaluateSummary run_evaluate(const RunConfig& config) {
  config.validate();
  const auto curated_path = config.data_dir / "curated_manifest.json";
  if (!std::filesystem::exists(curated_path))
    throw IoError("run_evaluate: missing curated manifest " +
                  curated_path.string());
  const CuratedManifest curated = CuratedManifest::load(curated_path);
  net::ArchConfig arch = config.arch;
  arch.view_classes = 3;
  const auto test = load_kept_examples(curated, config.data_dir, arch, Split::Test);
  if (test.empty()) throw ConfigError("run_evaluate: no kept test frames");

  const train::LambdaMode modes[] = {train::LambdaMode::Off,
                                     train::LambdaMode::Fixed1,
                                     train::LambdaMode::Weighted};
  std::map<train::LambdaMode, net::Model> models;
  for (auto mode : modes) {
    const auto path = checkpoint_path(config, mode);
    if (!std::filesystem::exists(path))
      throw IoError("run_evaluate: missing checkpoint " + path.string());
    models.emplace(mode, net::load_model(path));
  }

  std::map<train::LambdaMode, std::vector<metrics::EvalFrame>> frames;
  for (auto mode : modes)
    frames[mode] = to_eval_frames(test, train::batch_inference(models.at(mode), test));

  EvaluateSummary s;
  auto add_row = [&](const std::string& loss, const std::string& quality,
                     const std::vector<metrics::EvalFrame>& fs) {
    s.rows.push_back({loss, quality, metrics::evaluate_frames(fs, quality, true)});
  };
  add_row("CHD", "All", frames[train::LambdaMode::Off]);
  add_row("CHD", "Med-High",
          filter_quality(frames[train::LambdaMode::Off], true));
  add_row("Multitask (lambda=1)", "Med-High",
          filter_quality(frames[train::LambdaMode::Fixed1], true));
  add_row("Multitask (weighted)", "Med-High",
          filter_quality(frames[train::LambdaMode::Weighted], true));

  // robust-inference row: weighted model, reliability-filtered frames
  const robust::FilterOutcome filtered = robust::filter_predictions(
      test, models.at(train::LambdaMode::Weighted), config.perturbation);
  std::vector<metrics::EvalFrame> weighted_flagged =
      frames[train::LambdaMode::Weighted];
  for (std::size_t i = 0; i < weighted_flagged.size(); ++i)
    weighted_flagged[i].retained = *filtered.all_records[i].reliable;
  std::vector<metrics::EvalFrame> retained_only;
  for (const auto& f : weighted_flagged)
    if (f.retained) retained_only.push_back(f);
  add_row("Multitask (weighted)", "Robust Frames", retained_only);

  s.retained_per_tier = filtered.per_tier;
  s.retained_overall = filtered.overall.fraction();

  // reports
  json j;
  json rows = json::array();
  for (const auto& row : s.rows) {
    json rj = report_to_json(row.report);
    rj["loss"] = row.loss;
    rj["test_quality"] = row.test_quality;
    rows.push_back(rj);
  }
  j["rows"] = rows;
  json strat = json::array();
  for (const auto& r : metrics::stratified_report(weighted_flagged, true))
    strat.push_back(report_to_json(r));
  j["stratified_weighted"] = strat;
  j["retained_fraction"] = {
      {"Low", filtered.per_tier[0].fraction()},
      {"Medium", filtered.per_tier[1].fraction()},
      {"High", filtered.per_tier[2].fraction()},
      {"overall", s.retained_overall}};
  j["abstained_patients"] = filtered.abstained_patients;
  json pscores = json::array();
  for (const auto& p : metrics::aggregate_patient(weighted_flagged)) {
    pscores.push_back({{"patient_id", p.patient_id},
                       {"score", p.score ? json(*p.score) : json(nullptr)},
                       {"abstain", !p.score.has_value()}});
  }
  j["patient_scores"] = pscores;
  j["strategy"] = robust::to_string(config.perturbation.strategy);
  j["n_steps"] = config.perturbation.n_steps;

  ensure_dir(config.report_dir);
  s.json_path = config.report_dir / "evaluation.json";
  write_json_file(j, s.json_path);

  std::string text = metrics::format_report_table(s.rows);
  char extra[160];
  std::snprintf(extra, sizeof(extra),
                "\nRetained fraction  Low %.4f  Medium %.4f  High %.4f  "
                "overall %.4f\n",
                filtered.per_tier[0].fraction(), filtered.per_tier[1].fraction(),
                filtered.per_tier[2].fraction(), s.retained_overall);
  text += extra;
  s.text_path = config.report_dir / "evaluation.txt";
  write_text_file(text, s.text_path);

  std::string verdict_lines;
  for (const auto& v : filtered.verdicts) {
    const json line{{"frame_id", v.frame_id},
                    {"strategy", robust::to_string(v.strategy)},
                    {"n_steps", v.n_steps},
                    {"reliable", v.reliable},
                    {"original_argmax", v.original_chd_argmax},
                    {"final_argmax", v.final_chd_argmax}};
    verdict_lines += line.dump() + "\n";
  }
  s.verdicts_path = config.report_dir / "verdicts.jsonl";
  write_text_file(verdict_lines, s.verdicts_path);
  return s;
}

namespace {

struct AblateCell {
  double auc = std::nan("");
  double retained_fraction = 0;
};

std::string svg_chart(
    const std::vector<std::string>& strata,
    const std::vector<std::pair<std::string, std::vector<double>>>& lines) {
  // 640x480 canvas, y in [0.4, 1.0]
  const double width = 640, height = 480;
  const double left = 70, right = 600, top = 40, bottom = 420;
  auto x_of = [&](std::size_t i) {
    return left + (right - left) * (strata.size() == 1
                                        ? 0.5
                                        : static_cast<double>(i) /
                                              (strata.size() - 1));
  };
  auto y_of = [&](double auc) {
    const double lo = 0.4, hi = 1.0;
    const double t = std::clamp((auc - lo) / (hi - lo), 0.0, 1.0);
    return bottom - t * (bottom - top);
  };
  const char* colors[] = {"#1b7837", "#762a83", "#2166ac", "#636363", "#000000"};
  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
                "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, height, width, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                left, bottom, right, bottom);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                left, top, left, bottom);
  svg += buf;
  for (int tick = 0; tick <= 6; ++tick) {
    const double auc = 0.4 + tick * 0.1;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "text-anchor=\"end\">%.1f</text>\n",
                  left - 6, y_of(auc) + 4, auc);
    svg += buf;
  }
  for (std::size_t i = 0; i < strata.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  x_of(i), bottom + 18, strata[i].c_str());
    svg += buf;
  }
  svg += "<text x=\"320\" y=\"460\" font-size=\"13\" text-anchor=\"middle\">"
         "test stratum</text>\n";
  svg += "<text x=\"20\" y=\"230\" font-size=\"13\" transform=\"rotate(-90 20 "
         "230)\" text-anchor=\"middle\">ROC-AUC (retained frames)</text>\n";
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& [name, values] = lines[li];
    std::string points;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (std::isnan(values[i])) continue;
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x_of(i), y_of(values[i]));
      points += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" "
                  "points=\"%s\"/>\n",
                  colors[li % 5], points.c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "fill=\"%s\">%s</text>\n",
                  right - 140.0, top + 18.0 * (li + 1), colors[li % 5],
                  name.c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

AblateSummary run_ablate(const RunConfig& config) {
  config.validate();
  const auto curated_path = config.data_dir / "curated_manifest.json";
  if (!std::filesystem::exists(curated_path))
    throw IoError("run_ablate: missing curated manifest " + curated_path.string());
  const CuratedManifest curated = CuratedManifest::load(curated_path);
  net::ArchConfig arch = config.arch;
  arch.view_classes = 3;
  const auto test = load_kept_examples(curated, config.data_dir, arch, Split::Test);
  if (test.empty()) throw ConfigError("run_ablate: no kept test frames");
  const auto weighted_path = checkpoint_path(config, train::LambdaMode::Weighted);
  if (!std::filesystem::exists(weighted_path))
    throw IoError("run_ablate: missing checkpoint " + weighted_path.string());
  const net::Model model = net::load_model(weighted_path);

  const robust::Strategy strategies[] = {
      robust::Strategy::CardiacPreserving, robust::Strategy::Random,
      robust::Strategy::Adversarial, robust::Strategy::ViewVerification};
  const int step_counts[] = {1, 2, 4, 8};
  const std::vector<std::string> strata = {"All", "Med-High", "High"};

  auto stratum_frames = [&](const std::vector<metrics::EvalFrame>& frames,
                            int stratum) {
    std::vector<metrics::EvalFrame> out;
    for (const auto& f : frames) {
      if (stratum == 1 && f.quality == Quality::Low) continue;
      if (stratum == 2 && f.quality != Quality::High) continue;
      out.push_back(f);
    }
    return out;
  };

  const train::InferenceOutput inference = train::batch_inference(model, test);
  const std::vector<metrics::EvalFrame> base_frames = to_eval_frames(test, inference);

  std::string csv = "strategy,steps,stratum,auc,retained_fraction\n";
  int n_rows = 0;
  // retained-AUC per stratum at 4 steps, for the chart
  std::map<std::string, std::vector<double>> chart_lines;

  for (const auto strategy : strategies) {
    for (const int steps : step_counts) {
      robust::PerturbationConfig pc = config.perturbation;
      pc.strategy = strategy;
      pc.n_steps = steps;
      const robust::FilterOutcome outcome =
          robust::filter_predictions(test, model, pc);
      std::vector<metrics::EvalFrame> flagged = base_frames;
      for (std::size_t i = 0; i < flagged.size(); ++i)
        flagged[i].retained = *outcome.all_records[i].reliable;
      for (std::size_t si = 0; si < strata.size(); ++si) {
        const auto in_stratum = stratum_frames(flagged, static_cast<int>(si));
        std::vector<metrics::EvalFrame> retained;
        for (const auto& f : in_stratum)
          if (f.retained) retained.push_back(f);
        AblateCell cell;
        cell.retained_fraction =
            in_stratum.empty()
                ? 0.0
                : static_cast<double>(retained.size()) / in_stratum.size();
        const auto report = metrics::evaluate_frames(retained, strata[si], false);
        if (report.auc_defined) cell.auc = report.roc_auc;
        char line[128];
        if (std::isnan(cell.auc))
          std::snprintf(line, sizeof(line), "%s,%d,%s,nan,%.6f\n",
                        robust::to_string(strategy).c_str(), steps,
                        strata[si].c_str(), cell.retained_fraction);
        else
          std::snprintf(line, sizeof(line), "%s,%d,%s,%.6f,%.6f\n",
                        robust::to_string(strategy).c_str(), steps,
                        strata[si].c_str(), cell.auc, cell.retained_fraction);
        csv += line;
        ++n_rows;
        if (steps == 4)
          chart_lines[robust::to_string(strategy)].push_back(cell.auc);
      }
    }
  }

  // unfiltered baseline per stratum
  std::vector<double> baseline;
  for (std::size_t si = 0; si < strata.size(); ++si) {
    const auto report = metrics::evaluate_frames(
        stratum_frames(base_frames, static_cast<int>(si)), strata[si], false);
    baseline.push_back(report.auc_defined ? report.roc_auc : std::nan(""));
  }

  std::vector<std::pair<std::string, std::vector<double>>> lines;
  for (const auto strategy : strategies)
    lines.emplace_back(robust::to_string(strategy),
                       chart_lines[robust::to_string(strategy)]);
  lines.emplace_back("unfiltered", baseline);

  ensure_dir(config.report_dir);
  AblateSummary s;
  s.n_rows = n_rows;
  s.csv_path = config.report_dir / "ablation.csv";
  write_text_file(csv, s.csv_path);
  s.svg_path = config.report_dir / "ablation.svg";
  write_text_file(svg_chart(strata, lines), s.svg_path);
  return s;
}

}  // namespace fetalchd::pipeline
