#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fetalchd/autodiff.hpp"
#include "fetalchd/manifest.hpp"
#include "fetalchd/network.hpp"

namespace fetalchd::train {

enum class LambdaMode { Off, Fixed1, Weighted };

std::string to_string(LambdaMode m);
LambdaMode lambda_mode_from_string(const std::string& s);

struct TrainConfig {
  int batch_size = 32;
  int epochs = 12;
  double lr = 0.05;
  double momentum = 0.9;
  LambdaMode lambda_mode = LambdaMode::Weighted;
  std::uint64_t seed = 1;
  int patience = 5;  // early stop on validation ROC-AUC
  double lr_decay = 0.5;
  int lr_decay_every = 10;

  void validate() const;
};

/// One curated frame ready for the network: raw downsampled pixels plus
/// every label downstream stages may need.
struct TrainingExample {
  std::vector<double> pixels;  // input_h * input_w raw values in [0,300]
  int chd_label = 0;           // 0 NC, 1 HLHS
  int view_label = 0;          // curation-assigned (or generator, for the curation model)
  int patient_id = 0;
  int frame_id = 0;
  Quality quality = Quality::Medium;
};

struct TrainingData {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> val;
};

/// -log of the true-class probability, floored at 1e-12. Throws on
/// non-one-hot labels.
double chd_loss(const std::array<double, 2>& probs,
                const std::array<double, 2>& one_hot);
double view_loss(const std::vector<double>& probs,
                 const std::vector<double>& one_hot);

/// (l - min) / (max - min) per element; an all-equal batch (including a
/// single-element batch) maps to all zeros. Throws on empty input.
std::vector<double> minmax_scale(const std::vector<double>& batch_losses);

/// 1 - 0.5 * scaled_loss; domain [0,1], range [0.5,1].
double instance_lambda(double scaled_loss);

struct BatchLossBreakdown {
  std::vector<double> chd_loss;
  std::vector<double> view_loss;   // empty in Off mode
  std::vector<double> scaled_loss; // filled in Weighted mode
  std::vector<double> lambda;      // empty in Off mode
  double total = 0;
};

struct MultitaskLossResult {
  ad::NodeId loss = -1;
  BatchLossBreakdown breakdown;
};

/// Assembles the batch loss on the tape:
///   Off      -> sum_i chd_i
///   Fixed1   -> sum_i (chd_i + view_i)
///   Weighted -> sum_i (chd_i + lambda_i * view_i), lambda detached.
MultitaskLossResult multitask_loss(ad::Tape& tape, const net::GraphOutputs& graph,
                                   const ad::Tensor& chd_one_hot,
                                   const ad::Tensor& view_one_hot,
                                   LambdaMode mode);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double val_auc = 0;
  std::optional<double> view_loss_mean;  // absent in Off mode
  std::optional<double> lambda_mean, lambda_min, lambda_max;
};

struct TrainResult {
  net::Model model;  // best-validation checkpoint
  std::vector<EpochMetrics> log;
  int best_epoch = 0;
  double best_val_auc = 0;
};

/// Trains the two-headed classifier on curated frames. One epoch is one
/// seeded, class-interleaved shuffled pass; after each epoch the frame-level
/// validation ROC-AUC decides the retained checkpoint and early stopping.
/// Throws NumericError on divergence (NaN loss).
TrainResult train(const net::Model& init, const TrainingData& data,
                  const TrainConfig& config);

/// Trains a view-only classifier (the 4-class curation model). Validation
/// accuracy drives checkpoint selection.
net::Model train_view_classifier(const net::Model& init, const TrainingData& data,
                                 const TrainConfig& config);

struct InferenceOutput {
  std::vector<std::vector<double>> chd_probs;
  std::vector<std::vector<double>> view_probs;
};

/// Batched forward + softmax over examples (no gradients kept).
InferenceOutput batch_inference(const net::Model& model,
                                const std::vector<TrainingExample>& examples,
                                int batch_size = 32);

}  // namespace fetalchd::train
