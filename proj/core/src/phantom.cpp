#include "fetalchd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fetalchd/errors.hpp"
#include "fetalchd/rng.hpp"

namespace fetalchd {

namespace {

constexpr double kBackgroundLevel = 40.0;
constexpr double kChamberLevel = 180.0;
constexpr double kOutflowLevel = 150.0;
constexpr double kContaminantNoiseSigma = 3.0;

struct QualityProfile {
  double noise_sigma;
  int blur_radius;
};

QualityProfile quality_profile(Quality q) {
  switch (q) {
    case Quality::High: return {5.0, 0};
    case Quality::Medium: return {15.0, 1};
    case Quality::Low: return {40.0, 2};
  }
  return {15.0, 1};
}

// Fractional ellipse layout: {name, center_row, center_col, radius_row,
// radius_col}, all relative to (H, W). Radii of the region named "lv" (and
// the LVOT outflow half-width) scale by hlhs_lv_scale for HLHS frames.
struct FracEllipse {
  const char* name;
  double cr, cc, rr, rc;
};

constexpr FracEllipse kFourChLayout[] = {
    {"lv", 0.380, 0.360, 0.1050, 0.0950},
    {"rv", 0.380, 0.640, 0.1050, 0.0950},
    {"la", 0.645, 0.385, 0.0800, 0.0700},
    {"ra", 0.645, 0.615, 0.0800, 0.0700},
};

constexpr FracEllipse kLvotChambers[] = {
    {"lv", 0.550, 0.420, 0.1350, 0.1150},
    {"la", 0.745, 0.635, 0.0750, 0.0650},
};

// RVOT mirrors LVOT left-right; its small secondary chamber is the left
// ventricle seen edge-on, which is what HLHS shrinks in that view.
constexpr FracEllipse kRvotChambers[] = {
    {"rv", 0.550, 0.580, 0.1350, 0.1150},
    {"lv", 0.745, 0.365, 0.0750, 0.0650},
};

constexpr double kOutflowEndRow = 0.20;
constexpr double kOutflowEndColLvot = 0.70;   // mirrored for RVOT
constexpr double kOutflowHalfWidthFrac = 0.030;  // of image width

bool inside_ellipse(const EllipseSpec& e, int r, int c) {
  const double dr = (r - e.center_row) / e.radius_row;
  const double dc = (c - e.center_col) / e.radius_col;
  return dr * dr + dc * dc <= 1.0;
}

std::vector<std::uint8_t> rasterize_ellipse(const EllipseSpec& e, int h, int w) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  const int r0 = std::max(0, static_cast<int>(std::floor(e.center_row - e.radius_row)));
  const int r1 = std::min(h - 1, static_cast<int>(std::ceil(e.center_row + e.radius_row)));
  const int c0 = std::max(0, static_cast<int>(std::floor(e.center_col - e.radius_col)));
  const int c1 = std::min(w - 1, static_cast<int>(std::ceil(e.center_col + e.radius_col)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (inside_ellipse(e, r, c)) mask[static_cast<std::size_t>(r) * w + c] = 1;
  return mask;
}

std::vector<std::uint8_t> rasterize_channel(double r0, double c0, double r1,
                                            double c1, double half_width,
                                            int h, int w) {
  // Points within half_width of the segment (r0,c0)-(r1,c1).
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  const double dr = r1 - r0, dc = c1 - c0;
  const double len2 = dr * dr + dc * dc;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double t = len2 > 0 ? ((r - r0) * dr + (c - c0) * dc) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double pr = r0 + t * dr, pc = c0 + t * dc;
      const double d2 = (r - pr) * (r - pr) + (c - pc) * (c - pc);
      if (d2 <= half_width * half_width)
        mask[static_cast<std::size_t>(r) * w + c] = 1;
    }
  }
  return mask;
}

void box_blur(Image& img, int radius) {
  if (radius <= 0) return;
  const int h = img.height, w = img.width;
  const double inv = 1.0 / (2 * radius + 1);
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int ch = 0; ch < img.channels; ++ch) {
    // horizontal pass with edge replication
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k)
          s += img.at(ch, r, std::clamp(c + k, 0, w - 1));
        tmp[static_cast<std::size_t>(r) * w + c] = s * inv;
      }
    // vertical pass
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k)
          s += tmp[static_cast<std::size_t>(std::clamp(r + k, 0, h - 1)) * w + c];
        img.at(ch, r, c) = s * inv;
      }
  }
}

void add_noise_clamp_round(Image& img, double sigma, Rng& rng) {
  // One noise plane shared across channels, so grayscale raw-stream frames
  // keep zero cross-channel spread.
  const int h = img.height, w = img.width;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double n = sigma > 0 ? rng.normal(0.0, sigma) : 0.0;
      for (int ch = 0; ch < img.channels; ++ch) {
        double v = img.at(ch, r, c) + n;
        v = std::clamp(v, 0.0, kPixelMax);
        img.at(ch, r, c) = static_cast<double>(std::lround(v));
      }
    }
}

struct NuisanceField {
  // Sum of low-frequency cosine waves plus a per-patient DC shift; values
  // roughly in [-1.25, 1.25] before scaling by nuisance_strength.
  std::array<double, 6> freq_r, freq_c, phase;
  double dc = 0.0;

  static NuisanceField from_seed(std::uint64_t seed) {
    Rng rng(seed);
    NuisanceField f;
    for (std::size_t k = 0; k < f.freq_r.size(); ++k) {
      f.freq_r[k] = rng.uniform(0.5, 4.0);
      f.freq_c[k] = rng.uniform(0.5, 4.0);
      f.phase[k] = rng.uniform(0.0, 2.0 * M_PI);
    }
    f.dc = 0.25 * (2.0 * rng.uniform() - 1.0);
    return f;
  }

  double value(double nr, double nc) const {
    double s = 0.0;
    for (std::size_t k = 0; k < freq_r.size(); ++k)
      s += std::cos(2.0 * M_PI * (freq_r[k] * nr + freq_c[k] * nc) + phase[k]);
    return s / static_cast<double>(freq_r.size()) + dc;
  }
};

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

}  // namespace

void PhantomConfig::validate() const {
  if (image_height < 32 || image_width < 32)
    throw ConfigError("phantom: image dims must be at least 32x32");
  if (n_patients_nc < 1 || n_patients_hlhs < 1)
    throw ConfigError("phantom: patient counts must be positive");
  if (frames_per_patient < 1 || frames_per_patient > 999)
    throw ConfigError("phantom: frames_per_patient must be in [1, 999]");
  double mix_sum = 0;
  for (double q : quality_mix) {
    require_finite(q, "phantom: quality_mix entry");
    if (q < 0) throw ConfigError("phantom: quality_mix entries must be >= 0");
    mix_sum += q;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9)
    throw ConfigError("phantom: quality_mix must sum to 1");
  require_finite(contaminant_fraction, "phantom: contaminant_fraction");
  if (contaminant_fraction < 0 || contaminant_fraction >= 1)
    throw ConfigError("phantom: contaminant_fraction must be in [0,1)");
  require_finite(nuisance_strength, "phantom: nuisance_strength");
  if (nuisance_strength < 0)
    throw ConfigError("phantom: nuisance_strength must be >= 0");
  require_finite(hlhs_lv_scale, "phantom: hlhs_lv_scale");
  if (hlhs_lv_scale <= 0 || hlhs_lv_scale >= 1)
    throw ConfigError("phantom: hlhs_lv_scale must be in (0,1)");
}

const std::vector<std::uint8_t>* FrameGeometry::region(
    const std::string& name) const {
  for (const auto& [n, mask] : regions)
    if (n == name) return &mask;
  return nullptr;
}

std::vector<std::uint8_t> FrameGeometry::structure_mask() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * width, 0);
  for (const auto& [n, mask] : regions)
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) out[i] = 1;
  return out;
}

FrameGeometry frame_geometry(ViewLabel view, Pathology pathology,
                             const PhantomConfig& config) {
  if (view == ViewLabel::Background)
    throw std::invalid_argument("frame_geometry: Background has no geometry");
  const int h = config.image_height, w = config.image_width;
  const double s =
      pathology == Pathology::HLHS ? config.hlhs_lv_scale : 1.0;

  FrameGeometry geo;
  geo.height = h;
  geo.width = w;

  auto add_ellipse = [&](const FracEllipse& fe, double scale) {
    EllipseSpec e;
    e.name = fe.name;
    e.center_row = fe.cr * h;
    e.center_col = fe.cc * w;
    e.radius_row = fe.rr * h * scale;
    e.radius_col = fe.rc * w * scale;
    geo.ellipses.push_back(e);
    geo.regions.emplace_back(e.name, rasterize_ellipse(e, h, w));
  };

  switch (view) {
    case ViewLabel::FourCH:
      for (const auto& fe : kFourChLayout)
        add_ellipse(fe, std::string_view(fe.name) == "lv" ? s : 1.0);
      break;
    case ViewLabel::LVOT: {
      for (const auto& fe : kLvotChambers)
        add_ellipse(fe, std::string_view(fe.name) == "lv" ? s : 1.0);
      const auto& lv = geo.ellipses.front();
      geo.regions.emplace_back(
          "outflow",
          rasterize_channel(lv.center_row, lv.center_col, kOutflowEndRow * h,
                            kOutflowEndColLvot * w,
                            kOutflowHalfWidthFrac * w * s, h, w));
      break;
    }
    case ViewLabel::RVOT: {
      for (const auto& fe : kRvotChambers)
        add_ellipse(fe, std::string_view(fe.name) == "lv" ? s : 1.0);
      const auto& rv = geo.ellipses.front();
      geo.regions.emplace_back(
          "outflow",
          rasterize_channel(rv.center_row, rv.center_col, kOutflowEndRow * h,
                            (1.0 - kOutflowEndColLvot) * w,
                            kOutflowHalfWidthFrac * w, h, w));
      break;
    }
    case ViewLabel::Background:
      break;
  }
  return geo;
}

Frame generate_frame(ViewLabel view, Pathology pathology, Quality quality,
                     std::uint64_t patient_nuisance_seed,
                     std::uint64_t frame_seed, const PhantomConfig& config) {
  config.validate();
  if (view == ViewLabel::Background)
    throw std::invalid_argument("generate_frame: view must be a cardiac plane");

  const int h = config.image_height, w = config.image_width;
  const FrameGeometry geo = frame_geometry(view, pathology, config);
  const auto structures = geo.structure_mask();
  const NuisanceField nuisance = NuisanceField::from_seed(patient_nuisance_seed);

  Frame frame;
  frame.image = Image(h, w, 1);
  frame.kind = FrameKind::BMode;
  frame.view = view;
  frame.pathology = pathology;
  frame.quality = quality;

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      double v = kBackgroundLevel;
      if (!structures[i])
        v += config.nuisance_strength *
             nuisance.value(static_cast<double>(r) / h,
                            static_cast<double>(c) / w);
      frame.image.pix[i] = v;
    }
  if (const auto* outflow = geo.region("outflow"))
    for (std::size_t i = 0; i < outflow->size(); ++i)
      if ((*outflow)[i]) frame.image.pix[i] = kOutflowLevel;
  for (const auto& [name, mask] : geo.regions) {
    if (name == "outflow") continue;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) frame.image.pix[i] = kChamberLevel;
  }

  const QualityProfile prof = quality_profile(quality);
  box_blur(frame.image, prof.blur_radius);
  Rng rng(frame_seed);
  add_noise_clamp_round(frame.image, prof.noise_sigma, rng);
  return frame;
}

namespace {

Image doppler_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  // grayscale base scene
  Image base(h, w, 1);
  const EllipseSpec blob1{"", 0.35 * h, 0.40 * w, 0.13 * h, 0.11 * w};
  const EllipseSpec blob2{"", 0.62 * h, 0.58 * w, 0.10 * h, 0.09 * w};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double v = 60.0;
      if (inside_ellipse(blob1, r, c)) v = 150.0;
      else if (inside_ellipse(blob2, r, c)) v = 130.0;
      base.at(0, r, c) = v;
    }
  // color-flow fan: red/blue split by a smooth velocity field
  const EllipseSpec fan{"", 0.48 * h, 0.50 * w, 0.30 * h, 0.32 * w};
  const double p1 = rng.uniform(0.0, 2.0 * M_PI);
  const double p2 = rng.uniform(0.0, 2.0 * M_PI);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double g = base.at(0, r, c);
      double red = g, green = g, blue = g;
      if (inside_ellipse(fan, r, c)) {
        const double nr = (r - fan.center_row) / fan.radius_row;
        const double nc = (c - fan.center_col) / fan.radius_col;
        const double vel = std::sin(2.0 * M_PI * 1.3 * nr + p1) *
                           std::cos(2.0 * M_PI * 1.1 * nc + p2);
        red += 120.0 * std::max(vel, 0.0);
        blue += 120.0 * std::max(-vel, 0.0);
        green -= 25.0 * std::abs(vel);
      }
      img.at(0, r, c) = red;
      img.at(1, r, c) = green;
      img.at(2, r, c) = blue;
    }
  return img;
}

Image splitview_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  const int band_half = 3;  // 6-column separator
  const int band_lo = w / 2 - band_half, band_hi = w / 2 + band_half;
  const double jitter = rng.uniform(-0.03, 0.03);
  const EllipseSpec left{"", (0.50 + jitter) * h, 0.25 * w, 0.20 * h, 0.14 * w};
  const EllipseSpec right{"", (0.48 - jitter) * h, 0.75 * w, 0.16 * h, 0.12 * w};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double v;
      if (c >= band_lo && c < band_hi) {
        v = 0.0;
      } else {
        v = 55.0;
        if (inside_ellipse(left, r, c)) v = 140.0;
        else if (inside_ellipse(right, r, c)) v = 120.0;
      }
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = v;
    }
  return img;
}

Image mmode_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  const int half = h / 2;
  const EllipseSpec blob{"", 0.25 * h, 0.50 * w, 0.12 * h, 0.14 * w};
  for (int r = 0; r < half; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = inside_ellipse(blob, r, c) ? 90.0 : 30.0;
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = v;
    }
  // Lower half: horizontally swept traces. Five slabs, each with a bright
  // trace band over a dark base; every row is a slow sinusoid so lag-1
  // autocorrelation stays close to 1.
  const int lower_h = h - half;
  const int n_slabs = 5;
  const int trace_total = static_cast<int>(std::lround(0.40 * lower_h));
  for (int slab = 0; slab < n_slabs; ++slab) {
    const int slab_lo = half + slab * lower_h / n_slabs;
    const int slab_hi = half + (slab + 1) * lower_h / n_slabs;
    const int slab_h = slab_hi - slab_lo;
    int band_h = trace_total / n_slabs;
    band_h = std::min(band_h, slab_h);
    const int max_off = std::max(0, slab_h - band_h);
    const int off = max_off > 0 ? rng.uniform_int(0, max_off) : 0;
    const double freq = rng.uniform(1.0, 3.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int r = slab_lo; r < slab_hi; ++r) {
      const bool trace = r >= slab_lo + off && r < slab_lo + off + band_h;
      const double base = trace ? 290.0 : 25.0;
      for (int c = 0; c < w; ++c) {
        const double v =
            base + 16.0 * std::sin(2.0 * M_PI * freq * c / w + phase);
        for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = v;
      }
    }
  }
  return img;
}

}  // namespace

Frame generate_contaminant(FrameKind kind, std::uint64_t frame_seed,
                           const PhantomConfig& config) {
  config.validate();
  if (kind == FrameKind::BMode)
    throw std::invalid_argument(
        "generate_contaminant: kind must be Doppler, SplitView or MMode");
  const int h = config.image_height, w = config.image_width;
  Rng rng(frame_seed);

  Frame frame;
  frame.kind = kind;
  frame.view = ViewLabel::Background;
  switch (kind) {
    case FrameKind::Doppler: frame.image = doppler_image(h, w, rng); break;
    case FrameKind::SplitView: frame.image = splitview_image(h, w, rng); break;
    case FrameKind::MMode: frame.image = mmode_image(h, w, rng); break;
    case FrameKind::BMode: break;
  }
  add_noise_clamp_round(frame.image, kContaminantNoiseSigma, rng);
  return frame;
}

std::uint64_t patient_nuisance_seed(const PhantomConfig& config,
                                    int patient_id) {
  return mix_seed(config.master_seed, 0xA115, static_cast<std::uint64_t>(patient_id));
}

std::uint64_t frame_noise_seed(const PhantomConfig& config, int patient_id,
                               int frame_index) {
  return mix_seed(config.master_seed, 0xF4A3,
                  static_cast<std::uint64_t>(patient_id),
                  static_cast<std::uint64_t>(frame_index));
}

namespace {

struct FrameSlot {
  FrameKind kind;
  ViewLabel view;  // Background for contaminants
};

std::vector<FrameSlot> plan_patient_frames(const PhantomConfig& config,
                                           Rng& rng) {
  const int fpp = config.frames_per_patient;
  const int n_cont = static_cast<int>(
      std::lround(config.contaminant_fraction * fpp));
  const int n_clean = fpp - n_cont;

  std::vector<FrameSlot> slots;
  slots.reserve(fpp);
  const FrameKind kinds[] = {FrameKind::Doppler, FrameKind::SplitView,
                             FrameKind::MMode};
  for (int i = 0; i < n_cont; ++i)
    slots.push_back({kinds[i % 3], ViewLabel::Background});

  // Per-patient view proportions, all three views present when possible.
  std::array<double, 3> weight{};
  double total = 0;
  for (auto& wv : weight) {
    wv = 0.25 + rng.uniform();
    total += wv;
  }
  std::array<int, 3> count{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int v = 0; v < 3; ++v) {
    const double exact = n_clean * weight[v] / total;
    count[v] = static_cast<int>(std::floor(exact));
    frac[v] = exact - count[v];
    assigned += count[v];
  }
  while (assigned < n_clean) {
    const int v = static_cast<int>(
        std::max_element(frac.begin(), frac.end()) - frac.begin());
    ++count[v];
    frac[v] = -1;
    ++assigned;
  }
  if (n_clean >= 3) {
    for (int v = 0; v < 3; ++v) {
      while (count[v] == 0) {
        const int donor = static_cast<int>(
            std::max_element(count.begin(), count.end()) - count.begin());
        --count[donor];
        ++count[v];
      }
    }
  }
  const ViewLabel views[] = {ViewLabel::FourCH, ViewLabel::LVOT,
                             ViewLabel::RVOT};
  for (int v = 0; v < 3; ++v)
    for (int i = 0; i < count[v]; ++i)
      slots.push_back({FrameKind::BMode, views[v]});

  rng.shuffle(slots);
  return slots;
}

Quality draw_quality(const PhantomConfig& config, Rng& rng) {
  const double u = rng.uniform();
  if (u < config.quality_mix[0]) return Quality::Low;
  if (u < config.quality_mix[0] + config.quality_mix[1]) return Quality::Medium;
  return Quality::High;
}

void assign_splits(int n, std::vector<Split>& out) {
  // Sorted patient ids sliced ~80/10/10; every split non-empty.
  int n_val = std::max(1, static_cast<int>(std::lround(0.1 * n)));
  int n_test = std::max(1, static_cast<int>(std::lround(0.1 * n)));
  const int n_train = n - n_val - n_test;
  if (n_train < 1)
    throw ConfigError("phantom: need at least 3 patients per class for splits");
  out.assign(n, Split::Train);
  for (int i = n_train; i < n_train + n_val; ++i) out[i] = Split::Val;
  for (int i = n_train + n_val; i < n; ++i) out[i] = Split::Test;
}

}  // namespace

DatasetManifest generate_dataset(const PhantomConfig& config,
                                 const std::filesystem::path& output_dir) {
  config.validate();

  std::error_code ec;
  std::filesystem::create_directories(output_dir / "frames", ec);
  if (ec)
    throw IoError("generate_dataset: cannot create " +
                  (output_dir / "frames").string() + ": " + ec.message());

  const int n_total = config.n_patients_nc + config.n_patients_hlhs;
  std::vector<Split> nc_splits, hlhs_splits;
  assign_splits(config.n_patients_nc, nc_splits);
  assign_splits(config.n_patients_hlhs, hlhs_splits);

  DatasetManifest manifest;
  manifest.config_digest = phantom_config_digest(config);

  for (int pid = 0; pid < n_total; ++pid) {
    const bool is_nc = pid < config.n_patients_nc;
    const Pathology pathology = is_nc ? Pathology::NC : Pathology::HLHS;
    const Split split = is_nc ? nc_splits[pid]
                              : hlhs_splits[pid - config.n_patients_nc];
    Rng plan_rng(mix_seed(config.master_seed, 0x71A2,
                          static_cast<std::uint64_t>(pid)));
    const auto slots = plan_patient_frames(config, plan_rng);
    const std::uint64_t nuisance_seed = patient_nuisance_seed(config, pid);

    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& slot = slots[i];
      const Quality quality = draw_quality(config, plan_rng);
      const std::uint64_t fseed =
          frame_noise_seed(config, pid, static_cast<int>(i));
      Frame frame =
          slot.kind == FrameKind::BMode
              ? generate_frame(slot.view, pathology, quality, nuisance_seed,
                               fseed, config)
              : generate_contaminant(slot.kind, fseed, config);
      frame.patient_id = pid;
      frame.frame_id = pid * 1000 + static_cast<int>(i);
      frame.pathology = pathology;
      frame.quality = quality;

      char name[32];
      std::snprintf(name, sizeof(name), "p%03d_f%03d.%s", pid,
                    static_cast<int>(i),
                    frame.image.channels == 1 ? "pgm" : "ppm");
      const std::string rel = std::string("frames/") + name;
      write_pnm(frame.image, output_dir / rel);

      ManifestRecord rec;
      rec.patient_id = frame.patient_id;
      rec.frame_id = frame.frame_id;
      rec.file_path = rel;
      rec.kind = frame.kind;
      rec.view = frame.view;
      rec.pathology = frame.pathology;
      rec.quality = frame.quality;
      rec.split = split;
      manifest.records.push_back(std::move(rec));
    }
  }

  manifest.save(output_dir / "manifest.json");
  return manifest;
}

std::string phantom_config_digest(const PhantomConfig& config) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "phantom|h:%d|w:%d|nc:%d|hlhs:%d|fpp:%d|qm:%.17g,%.17g,%.17g|"
                "cf:%.17g|ns:%.17g|lvs:%.17g|seed:%llu",
                config.image_height, config.image_width, config.n_patients_nc,
                config.n_patients_hlhs, config.frames_per_patient,
                config.quality_mix[0], config.quality_mix[1],
                config.quality_mix[2], config.contaminant_fraction,
                config.nuisance_strength, config.hlhs_lv_scale,
                static_cast<unsigned long long>(config.master_seed));
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char* p = buf; *p; ++p) {
    hash ^= static_cast<unsigned char>(*p);
    hash *= 1099511628211ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  return hex;
}

}  // namespace fetalchd
