#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fetalchd/autodiff.hpp"
#include "fetalchd/manifest.hpp"
#include "fetalchd/network.hpp"
#include "fetalchd/training.hpp"

namespace fetalchd::robust {

enum class Strategy { CardiacPreserving, Random, Adversarial, ViewVerification };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct PerturbationConfig {
  double alpha = 2.0;
  double epsilon = 8.0;
  int n_steps = 4;
  Strategy strategy = Strategy::CardiacPreserving;
  std::uint64_t seed = 0;  // Random strategy only

  void validate() const;
};

/// Gradient of the view cross-entropy loss (target = v_star) with respect to
/// raw input pixels; the /300 normalization is part of the differentiated
/// graph. Input is [1,1,H,W] in raw [0,300] units.
ad::Tensor view_input_gradient(const net::Model& model,
                               const ad::Tensor& raw_input, int v_star);

/// One descent step: delta = -alpha * sgn(grad), with sgn(0) = 0.
ad::Tensor perturbation_step(const ad::Tensor& raw_input,
                             const net::Model& model, int v_star, double alpha);

struct PerturbOutcome {
  ad::Tensor pixels;                    // final perturbed frame
  int v_star = 0;                       // view argmax of the unperturbed frame
  int original_chd_argmax = 0;
  std::vector<int> chd_argmax_per_step;
  std::vector<ad::Tensor> snapshots;    // per-step pixels, when requested
};

/// Iterates n_steps of perturbation_step; after each step pixels are clamped
/// to the epsilon-ball around their original value and then to [0,300].
/// v_star is fixed at step 0 and never recomputed.
PerturbOutcome cardiac_preserving_perturb(const ad::Tensor& raw_input,
                                          const net::Model& model,
                                          const PerturbationConfig& config,
                                          bool keep_snapshots = false);

struct ReliabilityVerdict {
  int frame_id = 0;
  Strategy strategy = Strategy::CardiacPreserving;
  int n_steps = 0;
  int original_chd_argmax = 0;
  std::vector<int> per_step_chd_argmax;  // empty for ViewVerification
  int final_chd_argmax = 0;
  bool reliable = false;
};

/// Perturbation strategies: reliable iff the CHD argmax matches the original
/// at every step. ViewVerification ignores perturbation and checks the
/// model's view argmax against the curation-assigned view label.
ReliabilityVerdict assess_reliability(const ad::Tensor& raw_input, int frame_id,
                                      const net::Model& model,
                                      const PerturbationConfig& config,
                                      std::optional<int> curated_view = {});

struct TierStats {
  int total = 0;
  int retained = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(retained) / total; }
};

struct FilterOutcome {
  std::vector<net::PredictionRecord> all_records;  // reliable flag set on each
  std::vector<net::PredictionRecord> retained;
  std::vector<ReliabilityVerdict> verdicts;
  std::array<TierStats, 3> per_tier;  // indexed by Quality
  TierStats overall;
  std::vector<int> abstained_patients;  // no retained frames at all
};

/// Assesses every frame, keeps the reliable ones, and reports retained
/// fractions per quality tier. Patients whose frames are all rejected land
/// in abstained_patients.
FilterOutcome filter_predictions(const std::vector<train::TrainingExample>& frames,
                                 const net::Model& model,
                                 const PerturbationConfig& config);

}  // namespace fetalchd::robust
