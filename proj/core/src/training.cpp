#include "fetalchd/training.hpp"

#include <algorithm>
#include <cmath>

#include "fetalchd/errors.hpp"
#include "fetalchd/metrics.hpp"
#include "fetalchd/rng.hpp"

namespace fetalchd::train {

using ad::NodeId;
using ad::Tape;
using ad::Tensor;

std::string to_string(LambdaMode m) {
  switch (m) {
    case LambdaMode::Off: return "off";
    case LambdaMode::Fixed1: return "fixed1";
    case LambdaMode::Weighted: return "weighted";
  }
  return "?";
}

LambdaMode lambda_mode_from_string(const std::string& s) {
  if (s == "off") return LambdaMode::Off;
  if (s == "fixed1") return LambdaMode::Fixed1;
  if (s == "weighted") return LambdaMode::Weighted;
  throw ConfigError("unknown lambda mode: " + s);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("train: lr must be > 0");
  if (momentum < 0 || momentum >= 1 || !std::isfinite(momentum))
    throw ConfigError("train: momentum must be in [0,1)");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (!(lr_decay > 0) || lr_decay > 1)
    throw ConfigError("train: lr_decay must be in (0,1]");
  if (lr_decay_every < 1) throw ConfigError("train: lr_decay_every must be >= 1");
}

namespace {

double nll(const double* probs, const double* one_hot, std::size_t k) {
  double row = 0;
  bool seen_one = false;
  for (std::size_t c = 0; c < k; ++c) {
    const double t = one_hot[c];
    if (t != 0.0 && t != 1.0)
      throw std::invalid_argument("loss: label must be one-hot");
    if (t == 1.0) {
      if (seen_one) throw std::invalid_argument("loss: label must be one-hot");
      seen_one = true;
      row = -std::log(std::max(probs[c], ad::kProbFloor));
    }
  }
  if (!seen_one) throw std::invalid_argument("loss: label must be one-hot");
  return row;
}

}  // namespace

double chd_loss(const std::array<double, 2>& probs,
                const std::array<double, 2>& one_hot) {
  return nll(probs.data(), one_hot.data(), 2);
}

double view_loss(const std::vector<double>& probs,
                 const std::vector<double>& one_hot) {
  if (probs.size() != one_hot.size() || probs.size() < 2)
    throw std::invalid_argument("view_loss: probs/label size mismatch");
  return nll(probs.data(), one_hot.data(), probs.size());
}

std::vector<double> minmax_scale(const std::vector<double>& batch_losses) {
  if (batch_losses.empty())
    throw std::invalid_argument("minmax_scale: empty batch");
  const auto [lo_it, hi_it] =
      std::minmax_element(batch_losses.begin(), batch_losses.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(batch_losses.size(), 0.0);
  if (hi - lo < 1e-12) return out;  // rank-free batch carries no signal
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (batch_losses[i] - lo) / (hi - lo);
  return out;
}

double instance_lambda(double scaled_loss) {
  if (!(scaled_loss >= 0.0 && scaled_loss <= 1.0))
    throw std::invalid_argument("instance_lambda: scaled loss must be in [0,1]");
  return 1.0 - 0.5 * scaled_loss;
}

MultitaskLossResult multitask_loss(Tape& tape, const net::GraphOutputs& graph,
                                   const Tensor& chd_one_hot,
                                   const Tensor& view_one_hot,
                                   LambdaMode mode) {
  const int batch = tape.value(graph.chd_logits).dim(0);
  if (chd_one_hot.dim(0) != batch)
    throw std::invalid_argument("multitask_loss: chd label batch mismatch");

  MultitaskLossResult out;
  const NodeId chd_probs = tape.softmax(graph.chd_logits);
  const NodeId chd_ce = tape.cross_entropy(chd_probs, chd_one_hot);
  out.breakdown.chd_loss = tape.value(chd_ce).v;

  if (mode == LambdaMode::Off) {
    out.loss = tape.sum(chd_ce);
    out.breakdown.total = tape.value(out.loss).v[0];
    return out;
  }

  if (view_one_hot.dim(0) != batch)
    throw std::invalid_argument("multitask_loss: view label batch mismatch");
  const NodeId view_probs = tape.softmax(graph.view_logits);
  const NodeId view_ce = tape.cross_entropy(view_probs, view_one_hot);
  out.breakdown.view_loss = tape.value(view_ce).v;

  if (mode == LambdaMode::Fixed1) {
    out.loss = tape.add(tape.sum(chd_ce), tape.sum(view_ce));
    out.breakdown.lambda.assign(static_cast<std::size_t>(batch), 1.0);
  } else {
    out.breakdown.scaled_loss = minmax_scale(out.breakdown.chd_loss);
    out.breakdown.lambda.reserve(static_cast<std::size_t>(batch));
    for (double s : out.breakdown.scaled_loss)
      out.breakdown.lambda.push_back(instance_lambda(s));
    // lambda enters as constant weights; no gradient flows through it
    Tensor weights({batch}, out.breakdown.lambda);
    out.loss =
        tape.add(tape.sum(chd_ce), tape.weighted_sum(view_ce, std::move(weights)));
  }
  out.breakdown.total = tape.value(out.loss).v[0];
  return out;
}

namespace {

struct Batch {
  Tensor input;     // [B,1,H,W], raw pixel units
  Tensor chd_one_hot;   // [B,2]
  Tensor view_one_hot;  // [B,K]
  int size = 0;
};

Batch assemble_batch(const std::vector<TrainingExample>& pool,
                     const std::vector<std::size_t>& ids, std::size_t begin,
                     std::size_t end, int h, int w, int view_classes) {
  Batch b;
  b.size = static_cast<int>(end - begin);
  b.input = Tensor({b.size, 1, h, w});
  b.chd_one_hot = Tensor({b.size, 2});
  b.view_one_hot = Tensor({b.size, view_classes});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = begin; i < end; ++i) {
    const TrainingExample& ex = pool[ids[i]];
    if (ex.pixels.size() != plane)
      throw std::invalid_argument("train: example pixel count mismatch");
    std::copy(ex.pixels.begin(), ex.pixels.end(),
              b.input.v.begin() + static_cast<std::ptrdiff_t>((i - begin) * plane));
    b.chd_one_hot(static_cast<int>(i - begin), ex.chd_label) = 1.0;
    if (ex.view_label < 0 || ex.view_label >= view_classes)
      throw std::invalid_argument("train: view label out of range");
    b.view_one_hot(static_cast<int>(i - begin), ex.view_label) = 1.0;
  }
  return b;
}

/// Class-interleaved shuffled epoch order: one pass over every training
/// frame with batches kept close to class-balanced.
std::vector<std::size_t> epoch_order(const std::vector<TrainingExample>& pool,
                                     Rng& rng) {
  std::vector<std::size_t> nc, hlhs;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (pool[i].chd_label == 0 ? nc : hlhs).push_back(i);
  rng.shuffle(nc);
  rng.shuffle(hlhs);
  std::vector<std::size_t> order;
  order.reserve(pool.size());
  std::size_t a = 0, b = 0;
  while (a < nc.size() && b < hlhs.size()) {
    order.push_back(nc[a++]);
    order.push_back(hlhs[b++]);
  }
  while (a < nc.size()) order.push_back(nc[a++]);
  while (b < hlhs.size()) order.push_back(hlhs[b++]);
  return order;
}

std::vector<double> hlhs_scores(const net::Model& model,
                                const std::vector<TrainingExample>& examples) {
  const InferenceOutput out = batch_inference(model, examples);
  std::vector<double> scores;
  scores.reserve(examples.size());
  for (const auto& p : out.chd_probs) scores.push_back(p[1]);
  return scores;
}

}  // namespace

InferenceOutput batch_inference(const net::Model& model,
                                const std::vector<TrainingExample>& examples,
                                int batch_size) {
  InferenceOutput out;
  const int h = model.arch.input_h, w = model.arch.input_w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t begin = 0; begin < examples.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(examples.size(), begin + static_cast<std::size_t>(batch_size));
    const int n = static_cast<int>(end - begin);
    Tensor batch({n, 1, h, w});
    for (std::size_t i = begin; i < end; ++i) {
      const auto& ex = examples[i];
      if (ex.pixels.size() != plane)
        throw std::invalid_argument("batch_inference: pixel count mismatch");
      for (std::size_t j = 0; j < plane; ++j)
        batch.v[(i - begin) * plane + j] = ex.pixels[j] * net::kInvPixelMax;
    }
    const net::Logits logits = net::forward(model, batch);
    for (int i = 0; i < n; ++i) {
      out.chd_probs.push_back(
          net::softmax_row({logits.chd(i, 0), logits.chd(i, 1)}));
      std::vector<double> vrow(static_cast<std::size_t>(logits.view.dim(1)));
      for (int c = 0; c < logits.view.dim(1); ++c) vrow[static_cast<std::size_t>(c)] = logits.view(i, c);
      out.view_probs.push_back(net::softmax_row(vrow));
    }
  }
  return out;
}

namespace {

struct EpochRunner {
  const TrainConfig& config;
  net::Model& model;
  std::vector<Tensor> velocity;

  // Returns (mean per-frame loss, per-sample breakdown stats).
  template <typename LossFn>
  double run_epoch(const std::vector<TrainingExample>& pool, int epoch,
                   LossFn&& make_loss) {
    Rng shuffle_rng(mix_seed(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    const auto order = epoch_order(pool, shuffle_rng);
    const double lr =
        config.lr * std::pow(config.lr_decay, epoch / config.lr_decay_every);
    const int h = model.arch.input_h, w = model.arch.input_w;
    double loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Batch batch = assemble_batch(pool, order, begin, end, h, w,
                                   model.arch.view_classes);
      Tape tape;
      net::GraphOutputs graph =
          net::forward_graph_raw(tape, model, std::move(batch.input));
      const auto [loss_node, batch_total] =
          make_loss(tape, graph, batch, epoch);
      if (!std::isfinite(batch_total))
        throw NumericError("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch));
      loss_sum += batch_total;
      tape.backward(loss_node);
      std::vector<Tensor> grads;
      grads.reserve(graph.params.size());
      for (NodeId pid : graph.params) grads.push_back(tape.grad(pid));
      ad::sgd_momentum_step(model.params, grads, velocity, lr, config.momentum);
    }
    return loss_sum / static_cast<double>(pool.size());
  }
};

}  // namespace

TrainResult train(const net::Model& init, const TrainingData& data,
                  const TrainConfig& config) {
  config.validate();
  if (data.train.empty() || data.val.empty())
    throw ConfigError("train: empty train or validation split");
  if (init.arch.view_classes != 3)
    throw ConfigError("train: diagnosis model must have a 3-class view head");

  TrainResult result;
  net::Model model = init;
  EpochRunner runner{config, model, {}};

  double best_auc = -1;
  int since_best = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> lambdas, view_losses;
    auto make_loss = [&](Tape& tape, const net::GraphOutputs& graph,
                         const Batch& batch, int) {
      MultitaskLossResult mt = multitask_loss(
          tape, graph, batch.chd_one_hot, batch.view_one_hot,
          config.lambda_mode);
      lambdas.insert(lambdas.end(), mt.breakdown.lambda.begin(),
                     mt.breakdown.lambda.end());
      view_losses.insert(view_losses.end(), mt.breakdown.view_loss.begin(),
                         mt.breakdown.view_loss.end());
      return std::make_pair(mt.loss, mt.breakdown.total);
    };
    const double train_loss = runner.run_epoch(data.train, epoch, make_loss);

    std::vector<int> val_labels;
    val_labels.reserve(data.val.size());
    for (const auto& ex : data.val) val_labels.push_back(ex.chd_label);
    const double val_auc =
        metrics::roc_auc(hlhs_scores(model, data.val), val_labels);

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = train_loss;
    em.val_auc = val_auc;
    if (config.lambda_mode != LambdaMode::Off) {
      double vsum = 0;
      for (double v : view_losses) vsum += v;
      em.view_loss_mean = view_losses.empty() ? 0 : vsum / view_losses.size();
      if (!lambdas.empty()) {
        const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
        double lsum = 0;
        for (double l : lambdas) lsum += l;
        em.lambda_mean = lsum / lambdas.size();
        em.lambda_min = *lo;
        em.lambda_max = *hi;
      }
    }
    result.log.push_back(em);

    if (val_auc > best_auc) {
      best_auc = val_auc;
      result.model = model;
      result.best_epoch = epoch;
      result.best_val_auc = val_auc;
      since_best = 0;
    } else if (++since_best > config.patience) {
      break;
    }
  }
  return result;
}

net::Model train_view_classifier(const net::Model& init,
                                 const TrainingData& data,
                                 const TrainConfig& config) {
  config.validate();
  if (data.train.empty() || data.val.empty())
    throw ConfigError("train_view_classifier: empty train or validation split");

  net::Model model = init;
  net::Model best = init;
  EpochRunner runner{config, model, {}};
  double best_acc = -1;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto make_loss = [&](Tape& tape, const net::GraphOutputs& graph,
                         const Batch& batch, int) {
      const NodeId probs = tape.softmax(graph.view_logits);
      const NodeId ce = tape.cross_entropy(probs, batch.view_one_hot);
      const NodeId loss = tape.sum(ce);
      return std::make_pair(loss, tape.value(loss).v[0]);
    };
    runner.run_epoch(data.train, epoch, make_loss);

    const InferenceOutput out = batch_inference(model, data.val);
    int correct = 0;
    for (std::size_t i = 0; i < data.val.size(); ++i)
      if (net::argmax_row(out.view_probs[i]) == data.val[i].view_label)
        ++correct;
    const double acc = static_cast<double>(correct) / data.val.size();
    if (acc > best_acc) {
      best_acc = acc;
      best = model;
    }
  }
  return best;
}

}  // namespace fetalchd::train
