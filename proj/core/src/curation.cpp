#include "fetalchd/curation.hpp"

#include <cmath>

#include "fetalchd/errors.hpp"

namespace fetalchd::curation {

void CurationConfig::validate() const {
  const double thresholds[] = {color_spread_threshold, color_fraction_threshold,
                               split_band_intensity, mmode_autocorr_threshold,
                               plane_confidence_threshold};
  for (double t : thresholds)
    if (!std::isfinite(t)) throw ConfigError("curation: thresholds must be finite");
  if (split_band_width < 1)
    throw ConfigError("curation: split_band_width must be >= 1");
  if (plane_confidence_threshold <= 0 || plane_confidence_threshold >= 1)
    throw ConfigError("curation: plane_confidence_threshold must be in (0,1)");
}

bool detect_doppler(const Image& frame, const CurationConfig& config) {
  if (frame.channels != 3) return false;
  const int n = frame.height * frame.width;
  int colored = 0;
  for (int r = 0; r < frame.height; ++r)
    for (int c = 0; c < frame.width; ++c) {
      double lo = frame.at(0, r, c), hi = lo;
      for (int ch = 1; ch < 3; ++ch) {
        const double v = frame.at(ch, r, c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > config.color_spread_threshold) ++colored;
    }
  return static_cast<double>(colored) / n > config.color_fraction_threshold;
}

bool detect_splitview(const Image& frame, const CurationConfig& config) {
  const Image gray = channel_average(frame);
  const int w = gray.width, h = gray.height;
  const int bw = config.split_band_width;
  if (bw >= w) return false;
  const int band_lo = (w - bw) / 2, band_hi = band_lo + bw;
  double band = 0, left = 0, right = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < band_lo; ++c) left += gray.at(0, r, c);
    for (int c = band_lo; c < band_hi; ++c) band += gray.at(0, r, c);
    for (int c = band_hi; c < w; ++c) right += gray.at(0, r, c);
  }
  band /= static_cast<double>(h) * bw;
  left /= static_cast<double>(h) * band_lo;
  right /= static_cast<double>(h) * (w - band_hi);
  const double flank_floor = 4.0 * band + 10.0;
  return band < config.split_band_intensity && left >= flank_floor &&
         right >= flank_floor;
}

namespace {

double row_lag1_autocorr(const Image& gray, int row, int col_begin, int col_end) {
  const int n = col_end - col_begin;
  double mean = 0;
  for (int c = col_begin; c < col_end; ++c) mean += gray.at(0, row, c);
  mean /= n;
  double num = 0, den = 0;
  for (int c = col_begin; c < col_end; ++c) {
    const double d = gray.at(0, row, c) - mean;
    den += d * d;
    if (c + 1 < col_end) num += d * (gray.at(0, row, c + 1) - mean);
  }
  // constant rows are perfectly predictable
  if (den < 1e-12) return 1.0;
  return num / den;
}

}  // namespace

bool detect_mmode(const Image& frame, const CurationConfig& config) {
  const Image gray = channel_average(frame);
  const int h = gray.height, w = gray.width;
  const int lower_begin = h / 2;
  if (lower_begin >= h || w < 2) return false;

  double mean_ac = 0;
  int bright = 0;
  for (int r = lower_begin; r < h; ++r) {
    mean_ac += row_lag1_autocorr(gray, r, 0, w);
    for (int c = 0; c < w; ++c)
      if (gray.at(0, r, c) >= 0.9 * kPixelMax) ++bright;
  }
  mean_ac /= h - lower_begin;
  const double bright_mass =
      static_cast<double>(bright) / (static_cast<double>(h - lower_begin) * w);
  return mean_ac >= config.mmode_autocorr_threshold && bright_mass >= 0.30;
}

BModeFilterOutcome bmode_filter(const std::vector<Frame>& frames,
                                const CurationConfig& config) {
  config.validate();
  BModeFilterOutcome out;
  for (const Frame& frame : frames) {
    Disposition rejection;
    if (detect_doppler(frame.image, config)) {
      rejection = Disposition::RejectedDoppler;
    } else if (detect_splitview(frame.image, config)) {
      rejection = Disposition::RejectedSplitView;
    } else if (detect_mmode(frame.image, config)) {
      rejection = Disposition::RejectedMMode;
    } else {
      Frame kept = frame;
      kept.image = channel_average(frame.image);
      out.kept.push_back(std::move(kept));
      continue;
    }
    out.rejected.push_back({frame.frame_id, rejection, {}, {}});
  }
  return out;
}

void CurationReport::tally(const FrameDisposition& fd) {
  dispositions.push_back(fd);
  ++counts[static_cast<std::size_t>(fd.disposition)];
}

CurationReport extract_planes(const std::vector<Frame>& kept_frames,
                              const net::Model& view_model,
                              const CurationConfig& config) {
  config.validate();
  if (view_model.arch.view_classes != 4)
    throw std::invalid_argument(
        "extract_planes: view model must have 4 classes (planes + Background)");
  CurationReport report;
  for (const Frame& frame : kept_frames) {
    const net::PredictionRecord pred = net::predict(view_model, frame);
    const int cls = pred.view_argmax;
    const double confidence = pred.view_probs[static_cast<std::size_t>(cls)];
    FrameDisposition fd;
    fd.frame_id = frame.frame_id;
    if (cls == 3) {
      fd.disposition = Disposition::RejectedBackground;
    } else if (confidence < config.plane_confidence_threshold) {
      fd.disposition = Disposition::RejectedLowConfidence;
    } else {
      fd.disposition = Disposition::KeptPlane;
      fd.curated_view = static_cast<ViewLabel>(cls);
      fd.confidence = confidence;
      report.view_confusion[static_cast<std::size_t>(frame.view)]
                           [static_cast<std::size_t>(cls)]++;
    }
    report.tally(fd);
  }
  return report;
}

CurationReport curate_frames(const std::vector<Frame>& frames,
                             const net::Model& view_model,
                             const CurationConfig& config) {
  const BModeFilterOutcome filtered = bmode_filter(frames, config);
  CurationReport report = extract_planes(filtered.kept, view_model, config);
  for (const FrameDisposition& fd : filtered.rejected) report.tally(fd);
  return report;
}

}  // namespace fetalchd::curation
