#include "fetalchd/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "fetalchd/errors.hpp"
#include "fetalchd/rng.hpp"

namespace fetalchd::net {

using ad::NodeId;
using ad::Tape;
using ad::Tensor;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'C', 'H', 'D', 'N', 'E', 'T', '1'};

void validate_arch(const ArchConfig& a) {
  if (a.n_blocks < 1 || a.base_channels < 1)
    throw ConfigError("network: n_blocks and base_channels must be positive");
  if (a.view_classes != 3 && a.view_classes != 4)
    throw ConfigError("network: view_classes must be 3 or 4");
  const int div = 1 << a.n_blocks;
  if (a.input_h % div != 0 || a.input_w % div != 0)
    throw ConfigError("network: input dims must be divisible by 2^n_blocks");
  if (a.input_h / div < 1 || a.input_w / div < 1)
    throw ConfigError("network: input dims too small for n_blocks");
}

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / fan_in);
  for (double& w : t.v) w = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

Model build_model(const ArchConfig& arch, std::uint64_t init_seed) {
  validate_arch(arch);
  Model m;
  m.arch = arch;
  Rng rng(init_seed);

  int in_ch = 1;
  for (int b = 0; b < arch.n_blocks; ++b) {
    const int out_ch = arch.base_channels << b;
    const std::string prefix = "block" + std::to_string(b);
    m.params.push_back(he_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng));
    m.param_names.push_back(prefix + ".conv1_w");
    m.params.emplace_back(std::vector<int>{out_ch});
    m.param_names.push_back(prefix + ".conv1_b");
    m.params.push_back(he_uniform({out_ch, out_ch, 3, 3}, out_ch * 9, rng));
    m.param_names.push_back(prefix + ".conv2_w");
    m.params.emplace_back(std::vector<int>{out_ch});
    m.param_names.push_back(prefix + ".conv2_b");
    in_ch = out_ch;
  }
  m.params.push_back(he_uniform({2, in_ch, 1, 1}, in_ch, rng));
  m.param_names.push_back("chd_head.w");
  m.params.emplace_back(std::vector<int>{2});
  m.param_names.push_back("chd_head.b");
  m.params.push_back(he_uniform({arch.view_classes, in_ch, 1, 1}, in_ch, rng));
  m.param_names.push_back("view_head.w");
  m.params.emplace_back(std::vector<int>{arch.view_classes});
  m.param_names.push_back("view_head.b");
  return m;
}

GraphOutputs attach_network(Tape& tape, const Model& model,
                            NodeId normalized_input) {
  validate_arch(model.arch);
  GraphOutputs out;
  out.input = normalized_input;
  out.params.reserve(model.params.size());
  for (const Tensor& p : model.params) out.params.push_back(tape.leaf(p));

  NodeId x = normalized_input;
  std::size_t pi = 0;
  for (int b = 0; b < model.arch.n_blocks; ++b) {
    const NodeId w1 = out.params[pi++], b1 = out.params[pi++];
    const NodeId w2 = out.params[pi++], b2 = out.params[pi++];
    x = tape.relu(tape.conv2d(x, w1, b1, 1, 1));
    x = tape.relu(tape.conv2d(x, w2, b2, 1, 1));
    x = tape.max_pool2d(x, 2, 2);
  }
  const NodeId chd_w = out.params[pi++], chd_b = out.params[pi++];
  const NodeId view_w = out.params[pi++], view_b = out.params[pi++];
  out.chd_logits = tape.global_avg_pool(tape.conv2d(x, chd_w, chd_b, 1, 0));
  out.view_logits = tape.global_avg_pool(tape.conv2d(x, view_w, view_b, 1, 0));
  return out;
}

GraphOutputs forward_graph_raw(Tape& tape, const Model& model,
                               Tensor raw_batch) {
  const NodeId raw = tape.leaf(std::move(raw_batch));
  const NodeId normalized = tape.scale(raw, kInvPixelMax);
  GraphOutputs out = attach_network(tape, model, normalized);
  out.input = raw;
  return out;
}

Logits forward(const Model& model, const Tensor& batch01) {
  if (batch01.rank() != 4 || batch01.dim(1) != 1 ||
      batch01.dim(2) != model.arch.input_h ||
      batch01.dim(3) != model.arch.input_w)
    throw std::invalid_argument("forward: batch must be [N,1,input_h,input_w]");
  Tape tape;
  const NodeId input = tape.leaf(batch01);
  const GraphOutputs g = attach_network(tape, model, input);
  Logits out{tape.value(g.chd_logits), tape.value(g.view_logits)};
  for (double v : out.chd.v)
    if (!std::isfinite(v)) throw NumericError("forward: non-finite chd logits");
  for (double v : out.view.v)
    if (!std::isfinite(v)) throw NumericError("forward: non-finite view logits");
  return out;
}

Tensor preprocess(const Image& image, const ArchConfig& arch) {
  const Image gray = image.channels == 1 ? image : channel_average(image);
  const Image small = resize_bilinear(gray, arch.input_h, arch.input_w);
  Tensor t({1, 1, arch.input_h, arch.input_w});
  t.v = small.pix;
  return t;
}

std::vector<double> softmax_row(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

int argmax_row(const std::vector<double>& probs) {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = static_cast<int>(i);
  return best;
}

PredictionRecord predict(const Model& model, const Frame& frame) {
  if (frame.image.channels != 1)
    throw std::invalid_argument("predict: expected a curated B-mode frame");
  Tensor raw = preprocess(frame.image, model.arch);
  for (double& v : raw.v) v *= kInvPixelMax;
  const Logits logits = forward(model, raw);

  PredictionRecord rec;
  rec.frame_id = frame.frame_id;
  rec.patient_id = frame.patient_id;
  rec.chd_probs = softmax_row({logits.chd.v[0], logits.chd.v[1]});
  rec.view_probs = softmax_row(logits.view.v);
  rec.chd_argmax = argmax_row(rec.chd_probs);
  rec.view_argmax = argmax_row(rec.view_probs);
  return rec;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_model: cannot open " + path.string());
  const json header = {{"n_blocks", model.arch.n_blocks},
                       {"base_channels", model.arch.base_channels},
                       {"input_h", model.arch.input_h},
                       {"input_w", model.arch.input_w},
                       {"view_classes", model.arch.view_classes}};
  const std::string hs = header.dump();
  const std::uint64_t hlen = hs.size();
  std::uint64_t count = 0;
  for (const Tensor& p : model.params) count += p.v.size();

  f.write(kMagic, sizeof(kMagic));
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Tensor& p : model.params)
    f.write(reinterpret_cast<const char*>(p.v.data()),
            static_cast<std::streamsize>(p.v.size() * sizeof(double)));
  if (!f) throw IoError("save_model: write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_model: cannot open " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("load_model: bad magic in " + path.string());
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || hlen > 1 << 20) throw IoError("load_model: bad header length");
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw IoError("load_model: truncated header");
  ArchConfig arch;
  try {
    const json header = json::parse(hs);
    arch.n_blocks = header.at("n_blocks").get<int>();
    arch.base_channels = header.at("base_channels").get<int>();
    arch.input_h = header.at("input_h").get<int>();
    arch.input_w = header.at("input_w").get<int>();
    arch.view_classes = header.at("view_classes").get<int>();
  } catch (const json::exception& e) {
    throw IoError(std::string("load_model: malformed header: ") + e.what());
  }

  Model m = build_model(arch, 0);  // shapes only; values overwritten below
  std::uint64_t expect = 0;
  for (const Tensor& p : m.params) expect += p.v.size();
  std::uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!f || count != expect)
    throw IoError("load_model: parameter count mismatch in " + path.string());
  for (Tensor& p : m.params) {
    f.read(reinterpret_cast<char*>(p.v.data()),
           static_cast<std::streamsize>(p.v.size() * sizeof(double)));
  }
  if (!f) throw IoError("load_model: truncated parameters in " + path.string());
  return m;
}

}  // namespace fetalchd::net
