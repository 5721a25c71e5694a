#include "fetalchd/robust.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fetalchd/errors.hpp"
#include "fetalchd/rng.hpp"

namespace fetalchd::robust {

using ad::NodeId;
using ad::Tape;
using ad::Tensor;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::CardiacPreserving: return "preserve";
    case Strategy::Random: return "random";
    case Strategy::Adversarial: return "adversarial";
    case Strategy::ViewVerification: return "viewverify";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "preserve") return Strategy::CardiacPreserving;
  if (s == "random") return Strategy::Random;
  if (s == "adversarial") return Strategy::Adversarial;
  if (s == "viewverify") return Strategy::ViewVerification;
  throw ConfigError("unknown strategy: " + s);
}

void PerturbationConfig::validate() const {
  if (!(alpha > 0) || !std::isfinite(alpha))
    throw ConfigError("perturbation: alpha must be > 0");
  if (epsilon < 0 || !std::isfinite(epsilon))
    throw ConfigError("perturbation: epsilon must be >= 0");
  if (n_steps < 1) throw ConfigError("perturbation: n_steps must be >= 1");
}

namespace {

void check_input(const net::Model& model, const Tensor& raw) {
  if (raw.rank() != 4 || raw.dim(0) != 1 || raw.dim(1) != 1 ||
      raw.dim(2) != model.arch.input_h || raw.dim(3) != model.arch.input_w)
    throw std::invalid_argument(
        "robust: input must be [1,1,input_h,input_w] raw pixels");
}

struct ForwardPass {
  Tape tape;
  net::GraphOutputs graph;
  int chd_argmax = 0;
  int view_argmax = 0;
  std::vector<double> chd_probs, view_probs;
};

ForwardPass run_forward(const net::Model& model, const Tensor& raw) {
  ForwardPass fp;
  fp.graph = net::forward_graph_raw(fp.tape, model, raw);
  const Tensor& chd = fp.tape.value(fp.graph.chd_logits);
  const Tensor& view = fp.tape.value(fp.graph.view_logits);
  fp.chd_probs = net::softmax_row({chd.v[0], chd.v[1]});
  fp.view_probs = net::softmax_row(view.v);
  fp.chd_argmax = net::argmax_row(fp.chd_probs);
  fp.view_argmax = net::argmax_row(fp.view_probs);
  return fp;
}

/// Backward pass for the view loss with the (fixed) v_star target; returns
/// the gradient w.r.t. the raw input leaf.
Tensor view_gradient_from_pass(ForwardPass& fp, int v_star, int view_classes) {
  Tensor one_hot({1, view_classes});
  one_hot(0, v_star) = 1.0;
  const NodeId probs = fp.tape.softmax(fp.graph.view_logits);
  const NodeId ce = fp.tape.cross_entropy(probs, std::move(one_hot));
  const NodeId loss = fp.tape.sum(ce);
  fp.tape.backward(loss);
  Tensor grad = fp.tape.grad(fp.graph.input);
  for (double g : grad.v)
    if (!std::isfinite(g)) throw NumericError("robust: non-finite view gradient");
  return grad;
}

Tensor sign_delta(const Tensor& grad, double alpha, double direction) {
  Tensor delta(grad.shape);
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    const double g = grad.v[i];
    delta.v[i] = g > 0 ? direction * alpha : (g < 0 ? -direction * alpha : 0.0);
  }
  return delta;
}

/// delta applied, then clamped to the epsilon ball around the original
/// pixels, then to the [0, 300] range.
void apply_and_clamp(Tensor& pixels, const Tensor& delta, const Tensor& original,
                     double epsilon) {
  for (std::size_t i = 0; i < pixels.v.size(); ++i) {
    double v = pixels.v[i] + delta.v[i];
    v = std::clamp(v, original.v[i] - epsilon, original.v[i] + epsilon);
    v = std::clamp(v, 0.0, kPixelMax);
    pixels.v[i] = v;
  }
}

}  // namespace

Tensor view_input_gradient(const net::Model& model, const Tensor& raw_input,
                           int v_star) {
  check_input(model, raw_input);
  if (v_star < 0 || v_star >= model.arch.view_classes)
    throw std::invalid_argument("view_input_gradient: v_star out of range");
  ForwardPass fp = run_forward(model, raw_input);
  return view_gradient_from_pass(fp, v_star, model.arch.view_classes);
}

Tensor perturbation_step(const Tensor& raw_input, const net::Model& model,
                         int v_star, double alpha) {
  // descent on the view loss: delta = -alpha * sgn(grad), sgn(0) = 0
  return sign_delta(view_input_gradient(model, raw_input, v_star), alpha, -1.0);
}

namespace {

PerturbOutcome perturb_loop(const Tensor& raw_input, const net::Model& model,
                            const PerturbationConfig& config,
                            bool keep_snapshots, int frame_id) {
  check_input(model, raw_input);
  config.validate();

  const bool gradient_based = config.strategy == Strategy::CardiacPreserving ||
                              config.strategy == Strategy::Adversarial;
  const double direction =
      config.strategy == Strategy::Adversarial ? 1.0 : -1.0;

  PerturbOutcome out;
  ForwardPass fp = run_forward(model, raw_input);
  out.v_star = fp.view_argmax;
  out.original_chd_argmax = fp.chd_argmax;
  out.pixels = raw_input;

  Rng random_rng(mix_seed(config.seed, 0xD1CE,
                          static_cast<std::uint64_t>(frame_id)));
  for (int step = 0; step < config.n_steps; ++step) {
    Tensor delta;
    if (gradient_based) {
      // fp currently holds the forward pass at the current pixels
      delta = sign_delta(
          view_gradient_from_pass(fp, out.v_star, model.arch.view_classes),
          config.alpha, direction);
    } else {
      delta = Tensor(out.pixels.shape);
      for (double& d : delta.v)
        d = config.alpha * random_rng.uniform_int(-1, 1);
    }
    apply_and_clamp(out.pixels, delta, raw_input, config.epsilon);
    fp = run_forward(model, out.pixels);
    out.chd_argmax_per_step.push_back(fp.chd_argmax);
    if (keep_snapshots) out.snapshots.push_back(out.pixels);
  }
  return out;
}

}  // namespace

PerturbOutcome cardiac_preserving_perturb(const Tensor& raw_input,
                                          const net::Model& model,
                                          const PerturbationConfig& config,
                                          bool keep_snapshots) {
  if (config.strategy != Strategy::CardiacPreserving)
    throw std::invalid_argument(
        "cardiac_preserving_perturb: config.strategy must be CardiacPreserving");
  return perturb_loop(raw_input, model, config, keep_snapshots, 0);
}

ReliabilityVerdict assess_reliability(const Tensor& raw_input, int frame_id,
                                      const net::Model& model,
                                      const PerturbationConfig& config,
                                      std::optional<int> curated_view) {
  config.validate();
  ReliabilityVerdict verdict;
  verdict.frame_id = frame_id;
  verdict.strategy = config.strategy;
  verdict.n_steps = config.n_steps;

  if (config.strategy == Strategy::ViewVerification) {
    if (!curated_view)
      throw std::invalid_argument(
          "assess_reliability: ViewVerification needs the curation-assigned view");
    const ForwardPass fp = run_forward(model, raw_input);
    verdict.original_chd_argmax = fp.chd_argmax;
    verdict.final_chd_argmax = fp.chd_argmax;
    verdict.reliable = fp.view_argmax == *curated_view;
    return verdict;
  }

  const PerturbOutcome out =
      perturb_loop(raw_input, model, config, false, frame_id);
  verdict.original_chd_argmax = out.original_chd_argmax;
  verdict.per_step_chd_argmax = out.chd_argmax_per_step;
  verdict.final_chd_argmax = out.chd_argmax_per_step.back();
  verdict.reliable =
      std::all_of(out.chd_argmax_per_step.begin(), out.chd_argmax_per_step.end(),
                  [&](int a) { return a == out.original_chd_argmax; });
  return verdict;
}

FilterOutcome filter_predictions(const std::vector<train::TrainingExample>& frames,
                                 const net::Model& model,
                                 const PerturbationConfig& config) {
  config.validate();
  FilterOutcome out;
  const train::InferenceOutput inference =
      train::batch_inference(model, frames);

  std::map<int, int> retained_per_patient;
  const int h = model.arch.input_h, w = model.arch.input_w;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& ex = frames[i];
    Tensor raw({1, 1, h, w}, ex.pixels);
    const ReliabilityVerdict verdict = assess_reliability(
        raw, ex.frame_id, model, config,
        config.strategy == Strategy::ViewVerification
            ? std::optional<int>(ex.view_label)
            : std::nullopt);

    net::PredictionRecord rec;
    rec.frame_id = ex.frame_id;
    rec.patient_id = ex.patient_id;
    rec.chd_probs = inference.chd_probs[i];
    rec.view_probs = inference.view_probs[i];
    rec.chd_argmax = net::argmax_row(rec.chd_probs);
    rec.view_argmax = net::argmax_row(rec.view_probs);
    rec.reliable = verdict.reliable;
    int survived = 0;
    for (int a : verdict.per_step_chd_argmax) {
      if (a != verdict.original_chd_argmax) break;
      ++survived;
    }
    rec.perturbation_steps_survived = survived;

    auto& tier = out.per_tier[static_cast<std::size_t>(ex.quality)];
    ++tier.total;
    ++out.overall.total;
    retained_per_patient.emplace(ex.patient_id, 0);
    if (verdict.reliable) {
      ++tier.retained;
      ++out.overall.retained;
      ++retained_per_patient[ex.patient_id];
      out.retained.push_back(rec);
    }
    out.all_records.push_back(std::move(rec));
    out.verdicts.push_back(verdict);
  }
  for (const auto& [pid, count] : retained_per_patient)
    if (count == 0) out.abstained_patients.push_back(pid);
  return out;
}

}  // namespace fetalchd::robust
