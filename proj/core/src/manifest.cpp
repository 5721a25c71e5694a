#include "fetalchd/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "fetalchd/errors.hpp"

namespace fetalchd {

using nlohmann::json;

namespace {

template <typename E>
E enum_from(const std::string& s,
            std::initializer_list<std::pair<const char*, E>> table,
            const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw IoError(std::string("unknown ") + what + ": " + s);
}

}  // namespace

std::string to_string(FrameKind k) {
  switch (k) {
    case FrameKind::BMode: return "BMode";
    case FrameKind::Doppler: return "Doppler";
    case FrameKind::SplitView: return "SplitView";
    case FrameKind::MMode: return "MMode";
  }
  return "?";
}

std::string to_string(ViewLabel v) {
  switch (v) {
    case ViewLabel::FourCH: return "FourCH";
    case ViewLabel::LVOT: return "LVOT";
    case ViewLabel::RVOT: return "RVOT";
    case ViewLabel::Background: return "Background";
  }
  return "?";
}

std::string to_string(Pathology p) {
  return p == Pathology::NC ? "NC" : "HLHS";
}

std::string to_string(Quality q) {
  switch (q) {
    case Quality::Low: return "Low";
    case Quality::Medium: return "Medium";
    case Quality::High: return "High";
  }
  return "?";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "Train";
    case Split::Val: return "Val";
    case Split::Test: return "Test";
  }
  return "?";
}

std::string to_string(Disposition d) {
  switch (d) {
    case Disposition::KeptPlane: return "KeptPlane";
    case Disposition::RejectedDoppler: return "RejectedDoppler";
    case Disposition::RejectedSplitView: return "RejectedSplitView";
    case Disposition::RejectedMMode: return "RejectedMMode";
    case Disposition::RejectedBackground: return "RejectedBackground";
    case Disposition::RejectedLowConfidence: return "RejectedLowConfidence";
  }
  return "?";
}

FrameKind frame_kind_from_string(const std::string& s) {
  return enum_from<FrameKind>(s,
                              {{"BMode", FrameKind::BMode},
                               {"Doppler", FrameKind::Doppler},
                               {"SplitView", FrameKind::SplitView},
                               {"MMode", FrameKind::MMode}},
                              "frame kind");
}

ViewLabel view_from_string(const std::string& s) {
  return enum_from<ViewLabel>(s,
                              {{"FourCH", ViewLabel::FourCH},
                               {"LVOT", ViewLabel::LVOT},
                               {"RVOT", ViewLabel::RVOT},
                               {"Background", ViewLabel::Background}},
                              "view");
}

Pathology pathology_from_string(const std::string& s) {
  return enum_from<Pathology>(
      s, {{"NC", Pathology::NC}, {"HLHS", Pathology::HLHS}}, "pathology");
}

Quality quality_from_string(const std::string& s) {
  return enum_from<Quality>(s,
                            {{"Low", Quality::Low},
                             {"Medium", Quality::Medium},
                             {"High", Quality::High}},
                            "quality");
}

Split split_from_string(const std::string& s) {
  return enum_from<Split>(
      s, {{"Train", Split::Train}, {"Val", Split::Val}, {"Test", Split::Test}},
      "split");
}

Disposition disposition_from_string(const std::string& s) {
  return enum_from<Disposition>(
      s,
      {{"KeptPlane", Disposition::KeptPlane},
       {"RejectedDoppler", Disposition::RejectedDoppler},
       {"RejectedSplitView", Disposition::RejectedSplitView},
       {"RejectedMMode", Disposition::RejectedMMode},
       {"RejectedBackground", Disposition::RejectedBackground},
       {"RejectedLowConfidence", Disposition::RejectedLowConfidence}},
      "disposition");
}

namespace {

json record_to_json(const ManifestRecord& r) {
  return json{{"patient_id", r.patient_id},
              {"frame_id", r.frame_id},
              {"file_path", r.file_path},
              {"kind", to_string(r.kind)},
              {"view", to_string(r.view)},
              {"pathology", to_string(r.pathology)},
              {"quality", to_string(r.quality)},
              {"split", to_string(r.split)}};
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.patient_id = j.at("patient_id").get<int>();
  r.frame_id = j.at("frame_id").get<int>();
  r.file_path = j.at("file_path").get<std::string>();
  r.kind = frame_kind_from_string(j.at("kind").get<std::string>());
  r.view = view_from_string(j.at("view").get<std::string>());
  r.pathology = pathology_from_string(j.at("pathology").get<std::string>());
  r.quality = quality_from_string(j.at("quality").get<std::string>());
  r.split = split_from_string(j.at("split").get<std::string>());
  return r;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void save_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

void DatasetManifest::save(const std::filesystem::path& path) const {
  json recs = json::array();
  for (const auto& r : records) recs.push_back(record_to_json(r));
  save_json_file(json{{"records", recs}, {"config_digest", config_digest}},
                 path);
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  DatasetManifest m;
  m.config_digest = j.at("config_digest").get<std::string>();
  for (const auto& rj : j.at("records")) m.records.push_back(record_from_json(rj));
  return m;
}

void CuratedManifest::save(const std::filesystem::path& path) const {
  json recs = json::array();
  for (const auto& r : records) {
    json rj = record_to_json(r.base);
    rj["disposition"] = to_string(r.disposition);
    rj["curated_view"] =
        r.curated_view ? json(to_string(*r.curated_view)) : json(nullptr);
    rj["confidence"] = r.confidence ? json(*r.confidence) : json(nullptr);
    recs.push_back(std::move(rj));
  }
  save_json_file(json{{"records", recs}, {"config_digest", config_digest}},
                 path);
}

CuratedManifest CuratedManifest::load(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  CuratedManifest m;
  m.config_digest = j.at("config_digest").get<std::string>();
  for (const auto& rj : j.at("records")) {
    CuratedRecord r;
    r.base = record_from_json(rj);
    r.disposition = disposition_from_string(rj.at("disposition").get<std::string>());
    if (!rj.at("curated_view").is_null())
      r.curated_view = view_from_string(rj.at("curated_view").get<std::string>());
    if (!rj.at("confidence").is_null())
      r.confidence = rj.at("confidence").get<double>();
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace fetalchd
