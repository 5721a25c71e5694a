#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fetalchd/image.hpp"
#include "fetalchd/manifest.hpp"

namespace fetalchd {

/// One synthetic ultrasound-like frame plus its provenance labels.
struct Frame {
  Image image;  // values are integers in [0, kPixelMax]
  FrameKind kind = FrameKind::BMode;
  ViewLabel view = ViewLabel::Background;
  Pathology pathology = Pathology::NC;
  Quality quality = Quality::Medium;
  int patient_id = 0;
  int frame_id = 0;
};

struct PhantomConfig {
  int image_height = 224;
  int image_width = 188;
  int n_patients_nc = 20;
  int n_patients_hlhs = 20;
  int frames_per_patient = 16;
  /// Fractions of Low / Medium / High quality frames; must sum to 1.
  std::array<double, 3> quality_mix{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double contaminant_fraction = 0.15;
  double nuisance_strength = 40.0;
  double hlhs_lv_scale = 0.5;
  std::uint64_t master_seed = 1;

  /// Throws ConfigError on violated invariants or non-finite values.
  void validate() const;
};

/// Axis-aligned ellipse in pixel coordinates.
struct EllipseSpec {
  std::string name;
  double center_row = 0, center_col = 0;
  double radius_row = 0, radius_col = 0;
};

/// The exact geometry a frame was rendered from: named region masks (H*W,
/// row-major) plus the underlying ellipse parameters. Depends only on
/// (view, pathology, config), never on seeds.
struct FrameGeometry {
  int height = 0, width = 0;
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> regions;
  std::vector<EllipseSpec> ellipses;

  const std::vector<std::uint8_t>* region(const std::string& name) const;
  /// Union of all region masks (used to confine nuisance to the background).
  std::vector<std::uint8_t> structure_mask() const;
};

FrameGeometry frame_geometry(ViewLabel view, Pathology pathology,
                             const PhantomConfig& config);

/// Renders one clean B-mode cardiac frame. Deterministic for fixed seeds.
/// Rejects ViewLabel::Background.
Frame generate_frame(ViewLabel view, Pathology pathology, Quality quality,
                     std::uint64_t patient_nuisance_seed,
                     std::uint64_t frame_seed, const PhantomConfig& config);

/// Renders one 3-channel raw-stream contaminant (Doppler, SplitView or
/// MMode). Rejects FrameKind::BMode.
Frame generate_contaminant(FrameKind kind, std::uint64_t frame_seed,
                           const PhantomConfig& config);

/// Writes every frame of the configured cohort under output_dir/frames/ and
/// a manifest.json next to them. Patients are split ~80/10/10 into
/// Train/Val/Test, per class, patient-disjoint.
DatasetManifest generate_dataset(const PhantomConfig& config,
                                 const std::filesystem::path& output_dir);

/// FNV-1a checksum of the canonical config encoding, as 16 hex digits.
std::string phantom_config_digest(const PhantomConfig& config);

/// Seed streams used by generate_dataset; exposed so tests can regenerate
/// single frames bit-identically.
std::uint64_t patient_nuisance_seed(const PhantomConfig& config, int patient_id);
std::uint64_t frame_noise_seed(const PhantomConfig& config, int patient_id,
                               int frame_index);

}  // namespace fetalchd
