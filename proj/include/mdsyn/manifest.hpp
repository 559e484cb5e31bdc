#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsyn/geometry.hpp"

namespace mdsyn::engine {

inline constexpr int kManifestVersion = 1;

// rgb, infrared, depth, normal, event, sketch, paint, or external:<name>.
bool is_registered_modality(std::string_view tag);
// Case tag of a cross-modal pair, e.g. "rgb-event". Source pairs are "rgb-rgb".
std::string case_name(std::string_view modality_a, std::string_view modality_b);

enum class LabelKind { PoseDepth, Homography, Aligned };
std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(std::string_view s);

// Ground-truth references carried by a pair. Generated pairs copy this verbatim.
struct PairLabel {
  LabelKind kind = LabelKind::Aligned;
  std::string pose_a, pose_b;    // keys into PairManifest::poses (pose+depth)
  std::string depth_a, depth_b;  // depth files (pose+depth)
  std::optional<Mat3> homography;  // A -> B pixels (homography)

  friend bool operator==(const PairLabel&, const PairLabel&) = default;
};

struct ImageEntry {
  std::string id;
  std::string path;  // relative paths resolve against the manifest directory
  std::string scene;
  std::string modality = "rgb";
  std::string source;     // id of the RGB image this one was generated from
  std::string generator;  // "name@version" for generated images
  std::optional<CameraModel> camera;
  std::string pose;   // key into PairManifest::poses
  std::string depth;  // depth file
};

enum class Split { Train, Test };

struct PairEntry {
  std::string id;
  std::string a, b;
  std::string scene;
  std::string modality_case = "rgb-rgb";
  std::string source_pair;  // id of the RGB pair a cross-modal pair derives from
  PairLabel label;
  Split split = Split::Train;
};

struct GeneratorRecord {
  std::string name;
  std::string version;
  std::string modality;
};

struct PairManifest {
  std::vector<std::string> scenes;
  std::map<std::string, Pose> poses;
  std::vector<ImageEntry> images;
  std::vector<PairEntry> pairs;
  std::vector<GeneratorRecord> generators;
  std::filesystem::path base_dir;  // not serialized

  const ImageEntry* find_image(std::string_view id) const;
  const Pose& pose(const std::string& key) const;
  std::filesystem::path resolve(const std::string& path) const;

  // Throws InvalidManifest on dangling references or unregistered modality tags.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static PairManifest from_json(const nlohmann::ordered_json& j, std::filesystem::path base_dir = {});
  static PairManifest load(const std::filesystem::path& path);
  // Writes the JSON with two-space indentation and a trailing newline.
  void save(const std::filesystem::path& path) const;
};

nlohmann::ordered_json label_to_json(const PairLabel& label);
PairLabel label_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::ordered_json& j);

// Ground truth of a pair in original image coordinates.
struct PoseLabel {
  Pose a_to_b;
  CameraModel cam_a;
  CameraModel cam_b;
};
PoseLabel resolve_pose_label(const PairManifest& manifest, const PairEntry& pair);

}  // namespace mdsyn::engine
