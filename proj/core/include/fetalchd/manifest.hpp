#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fetalchd {

enum class FrameKind { BMode, Doppler, SplitView, MMode };
enum class ViewLabel { FourCH, LVOT, RVOT, Background };
enum class Pathology { NC, HLHS };
enum class Quality { Low, Medium, High };
enum class Split { Train, Val, Test };

enum class Disposition {
  KeptPlane,
  RejectedDoppler,
  RejectedSplitView,
  RejectedMMode,
  RejectedBackground,
  RejectedLowConfidence,
};

std::string to_string(FrameKind k);
std::string to_string(ViewLabel v);
std::string to_string(Pathology p);
std::string to_string(Quality q);
std::string to_string(Split s);
std::string to_string(Disposition d);

FrameKind frame_kind_from_string(const std::string& s);
ViewLabel view_from_string(const std::string& s);
Pathology pathology_from_string(const std::string& s);
Quality quality_from_string(const std::string& s);
Split split_from_string(const std::string& s);
Disposition disposition_from_string(const std::string& s);

/// One generated frame as indexed by the dataset manifest. file_path is
/// relative to the manifest's directory.
struct ManifestRecord {
  int patient_id = 0;
  int frame_id = 0;
  std::string file_path;
  FrameKind kind = FrameKind::BMode;
  ViewLabel view = ViewLabel::Background;
  Pathology pathology = Pathology::NC;
  Quality quality = Quality::Medium;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string config_digest;

  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

/// Manifest record after curation. curated_view / confidence are present only
/// for kept frames.
struct CuratedRecord {
  ManifestRecord base;
  Disposition disposition = Disposition::RejectedBackground;
  std::optional<ViewLabel> curated_view;
  std::optional<double> confidence;
};

struct CuratedManifest {
  std::vector<CuratedRecord> records;
  std::string config_digest;

  void save(const std::filesystem::path& path) const;
  static CuratedManifest load(const std::filesystem::path& path);
};

}  // namespace fetalchd
