#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fetalchd/image.hpp"
#include "fetalchd/manifest.hpp"
#include "fetalchd/network.hpp"
#include "fetalchd/phantom.hpp"

namespace fetalchd::curation {

struct CurationConfig {
  double color_spread_threshold = 30.0;
  double color_fraction_threshold = 0.05;
  double split_band_intensity = 5.0;
  int split_band_width = 4;
  double mmode_autocorr_threshold = 0.9;
  double plane_confidence_threshold = 0.7;

  void validate() const;
};

/// Color test: true iff the frame is 3-channel and more than
/// color_fraction_threshold of its pixels have a cross-channel spread
/// (max - min) above color_spread_threshold.
bool detect_doppler(const Image& frame, const CurationConfig& config);

/// UI-element test: true iff the central split_band_width columns are nearly
/// black while both flanking halves are clearly brighter
/// (mean >= 4 * band mean + 10). 3-channel input is channel-averaged.
bool detect_splitview(const Image& frame, const CurationConfig& config);

/// Histogram/sweep test: true iff rows of the lower half have mean lag-1
/// autocorrelation >= mmode_autocorr_threshold and at least 30% of that
/// region's pixels fall in the top intensity decile.
bool detect_mmode(const Image& frame, const CurationConfig& config);

struct FrameDisposition {
  int frame_id = 0;
  Disposition disposition = Disposition::RejectedBackground;
  std::optional<ViewLabel> curated_view;
  std::optional<double> confidence;
};

struct BModeFilterOutcome {
  std::vector<Frame> kept;  // converted to 1 channel
  std::vector<FrameDisposition> rejected;
};

/// Runs the three detectors in order Doppler -> SplitView -> MMode; the
/// first firing test assigns the rejection. Survivors are channel-averaged.
BModeFilterOutcome bmode_filter(const std::vector<Frame>& frames,
                                const CurationConfig& config);

struct CurationReport {
  std::vector<FrameDisposition> dispositions;
  std::array<int, 6> counts{};  // indexed by Disposition
  /// Generator view (rows) vs curation-assigned view (cols) over kept
  /// frames. Evaluation-only; training never sees generator views.
  std::array<std::array<int, 4>, 4> view_confusion{};

  int count(Disposition d) const {
    return counts[static_cast<std::size_t>(d)];
  }
  void tally(const FrameDisposition& fd);
};

/// Standard-plane extraction with a 4-class view model (FourCH, LVOT, RVOT,
/// Background). Keeps a frame when the argmax is a cardiac plane with
/// softmax confidence >= plane_confidence_threshold.
CurationReport extract_planes(const std::vector<Frame>& kept_frames,
                              const net::Model& view_model,
                              const CurationConfig& config);

/// Full two-stage curation of a frame set: B-mode filtering then plane
/// extraction. The report covers every input frame exactly once.
CurationReport curate_frames(const std::vector<Frame>& frames,
                             const net::Model& view_model,
                             const CurationConfig& config);

}  // namespace fetalchd::curation
