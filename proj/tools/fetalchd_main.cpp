// Command-line front door for the synthetic fetal-CHD screening pipeline:
//   generate -> curate -> train -> evaluate -> ablate
// One JSON config drives every stage; --set key=value overrides single keys.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "fetalchd/errors.hpp"
#include "fetalchd/pipeline.hpp"

namespace {

using namespace fetalchd;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CliArgs {
  std::optional<std::filesystem::path> config_file;
  pipeline::ConfigOverrides overrides;
};

pipeline::RunConfig make_config(const CliArgs& args) {
  return pipeline::load_run_config(args.config_file, args.overrides);
}

int do_generate(const CliArgs& args) {
  const auto cfg = make_config(args);
  const auto s = pipeline::run_generate(cfg);
  std::printf("dataset written to %s\n", s.manifest_path.string().c_str());
  std::printf("patients        NC %d   HLHS %d\n", s.n_patients_nc,
              s.n_patients_hlhs);
  std::printf("frames          total %d   clean %d   contaminant %d\n",
              s.n_frames, s.n_clean, s.n_contaminant);
  for (const auto& [key, count] : s.clean_per_view)
    std::printf("clean frames    %-16s %d\n", key.c_str(), count);
  return kExitOk;
}

int do_curate(const CliArgs& args) {
  const auto cfg = make_config(args);
  const auto s = pipeline::run_curate(cfg);
  std::printf("curated manifest: %s\n", s.curated_manifest_path.string().c_str());
  std::printf("report:           %s\n", s.report_path.string().c_str());
  for (int d = 0; d < 6; ++d)
    std::printf("%-24s %d\n",
                to_string(static_cast<Disposition>(d)).c_str(),
                s.disposition_counts[static_cast<std::size_t>(d)]);
  std::printf("NC view agreement   %.4f\n", s.nc_view_agreement);
  std::printf("HLHS view agreement %.4f\n", s.hlhs_view_agreement);
  return kExitOk;
}

int do_train(const CliArgs& args, const std::string& lambda_mode) {
  CliArgs a = args;
  if (!lambda_mode.empty())
    a.overrides.lambda_mode = train::lambda_mode_from_string(lambda_mode);
  const auto cfg = make_config(a);
  const auto s = pipeline::run_train(cfg, cfg.train.lambda_mode);
  std::printf("checkpoint: %s\n", s.checkpoint_path.string().c_str());
  std::printf("metrics:    %s\n", s.metrics_path.string().c_str());
  std::printf("best epoch %d of %d, validation ROC-AUC %.4f\n", s.best_epoch,
              s.epochs_run, s.best_val_auc);
  return kExitOk;
}

int do_evaluate(const CliArgs& args) {
  const auto cfg = make_config(args);
  const auto s = pipeline::run_evaluate(cfg);
  std::printf("%s", metrics::format_report_table(s.rows).c_str());
  std::printf("\nretained fraction: Low %.4f  Medium %.4f  High %.4f  overall %.4f\n",
              s.retained_per_tier[0].fraction(),
              s.retained_per_tier[1].fraction(),
              s.retained_per_tier[2].fraction(), s.retained_overall);
  std::printf("reports: %s, %s\n", s.json_path.string().c_str(),
              s.text_path.string().c_str());
  return kExitOk;
}

int do_ablate(const CliArgs& args) {
  const auto cfg = make_config(args);
  const auto s = pipeline::run_ablate(cfg);
  std::printf("%d ablation rows -> %s\n", s.n_rows, s.csv_path.string().c_str());
  std::printf("chart -> %s\n", s.svg_path.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic fetal cardiac ultrasound screening pipeline"};
  app.require_subcommand(1);

  CliArgs args;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string lambda_mode, strategy;
  int steps = 0;

  app.add_option("--config", config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "global seed override");
  app.add_option("--set", args.overrides.sets,
                 "override a config key, e.g. --set phantom.frames_per_patient=24")
      ->take_all();

  auto* gen = app.add_subcommand("generate", "render the synthetic dataset");
  auto* cur = app.add_subcommand("curate", "B-mode filtering and plane extraction");
  auto* tra = app.add_subcommand("train", "train the two-headed classifier");
  auto* eva = app.add_subcommand("evaluate", "test-set metrics and robust inference");
  auto* abl = app.add_subcommand("ablate", "strategy/step/stratum sweep");

  tra->add_option("--lambda-mode", lambda_mode,
                  "off | fixed1 | weighted (default from config)");
  auto* strat_opt = eva->add_option("--strategy", strategy,
                                    "preserve | random | adversarial | viewverify");
  auto* steps_opt = eva->add_option("--steps", steps, "perturbation steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!config_path.empty()) args.config_file = config_path;
    if (seed_opt->count() > 0) args.overrides.seed = seed;
    if (strat_opt->count() > 0)
      args.overrides.strategy = robust::strategy_from_string(strategy);
    if (steps_opt->count() > 0) args.overrides.steps = steps;

    if (gen->parsed()) return do_generate(args);
    if (cur->parsed()) return do_curate(args);
    if (tra->parsed()) return do_train(args, lambda_mode);
    if (eva->parsed()) return do_evaluate(args);
    if (abl->parsed()) return do_ablate(args);
    std::fprintf(stderr, "no subcommand given\n");
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
