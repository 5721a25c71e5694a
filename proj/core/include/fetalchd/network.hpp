#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fetalchd/autodiff.hpp"
#include "fetalchd/image.hpp"
#include "fetalchd/phantom.hpp"

namespace fetalchd::net {

/// Scaled-down VGG-style trunk: n_blocks of (conv3x3, relu, conv3x3, relu,
/// maxpool2), channels doubling per block, followed by two 1x1-conv +
/// global-average-pool heads sharing the trunk output.
struct ArchConfig {
  int n_blocks = 3;
  int base_channels = 8;
  int input_h = 112;
  int input_w = 96;
  int view_classes = 3;  // 4 adds the Background class for curation
};

/// Network parameters in declaration order: per block conv1_w, conv1_b,
/// conv2_w, conv2_b; then chd_w, chd_b, view_w, view_b.
struct Model {
  ArchConfig arch;
  std::vector<ad::Tensor> params;
  std::vector<std::string> param_names;
};

/// He-uniform initialization (limit sqrt(6/fan_in)), deterministic per seed.
/// Requires input dims divisible by 2^n_blocks.
Model build_model(const ArchConfig& arch, std::uint64_t init_seed);

/// Node handles of one forward pass recorded on a tape.
struct GraphOutputs {
  ad::NodeId input = -1;  // the pixel leaf (raw or normalized, see below)
  ad::NodeId chd_logits = -1;
  ad::NodeId view_logits = -1;
  std::vector<ad::NodeId> params;  // leaf per parameter, model order
};

/// Records the network on the tape on top of an already-normalized input
/// node ([N,1,H,W], values in [0,1]).
GraphOutputs attach_network(ad::Tape& tape, const Model& model,
                            ad::NodeId normalized_input);

/// Registers raw pixels ([N,1,H,W], values in [0,300]) as the input leaf and
/// normalizes on-tape, so input gradients come out in raw pixel units.
GraphOutputs forward_graph_raw(ad::Tape& tape, const Model& model,
                               ad::Tensor raw_batch);

struct Logits {
  ad::Tensor chd;   // [N,2]
  ad::Tensor view;  // [N,view_classes]
};

/// Plain forward pass; batch must be pre-scaled to [0,1].
Logits forward(const Model& model, const ad::Tensor& batch01);

/// Per-frame inference output. reliable / perturbation_steps_survived stay
/// unset until robust inference fills them.
struct PredictionRecord {
  int frame_id = 0;
  int patient_id = 0;
  std::vector<double> chd_probs;   // (NC, HLHS)
  std::vector<double> view_probs;  // (FourCH, LVOT, RVOT[, Background])
  int chd_argmax = 0;
  int view_argmax = 0;
  std::optional<bool> reliable;
  std::optional<int> perturbation_steps_survived;
};

/// Downsamples (bilinear) to the network input size; output stays in raw
/// [0,300] units, laid out as [1,1,input_h,input_w].
ad::Tensor preprocess(const Image& image, const ArchConfig& arch);

/// Softmax probabilities and argmaxes for one curated B-mode frame.
PredictionRecord predict(const Model& model, const Frame& frame);

/// Softmax of one logits row; ties in argmax resolve to the lowest index.
std::vector<double> softmax_row(const std::vector<double>& logits);
int argmax_row(const std::vector<double>& probs);

/// Checkpoint: 8-byte magic, u64 header length, arch JSON, u64 value count,
/// then every parameter as raw 64-bit little-endian doubles in declaration
/// order. Round-trips bit-exactly.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

inline constexpr double kInvPixelMax = 1.0 / 300.0;

}  // namespace fetalchd::net
