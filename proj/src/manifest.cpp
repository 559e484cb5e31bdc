#include "mdsyn/manifest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <set>

namespace mdsyn::engine {

namespace {

using json = nlohmann::ordered_json;

const std::array<std::string_view, 7> kBuiltinModalities = {"rgb",   "infrared", "depth", "normal",
                                                           "event", "sketch",   "paint"};

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidManifest, what); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace

bool is_registered_modality(std::string_view tag) {
  if (std::find(kBuiltinModalities.begin(), kBuiltinModalities.end(), tag) != kBuiltinModalities.end()) return true;
  constexpr std::string_view kExternal = "external:";
  return tag.size() > kExternal.size() && tag.substr(0, kExternal.size()) == kExternal;
}

std::string case_name(std::string_view modality_a, std::string_view modality_b) {
  // Cross-modal cases are named after the non-RGB side regardless of orientation.
  if (modality_a == "rgb") return "rgb-" + std::string(modality_b);
  if (modality_b == "rgb") return "rgb-" + std::string(modality_a);
  return std::string(modality_a) + "-" + std::string(modality_b);
}

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::PoseDepth: return "pose+depth";
    case LabelKind::Homography: return "homography";
    case LabelKind::Aligned: return "aligned";
  }
  return "aligned";
}

LabelKind label_kind_from_string(std::string_view s) {
  if (s == "pose+depth") return LabelKind::PoseDepth;
  if (s == "homography") return LabelKind::Homography;
  if (s == "aligned") return LabelKind::Aligned;
  bad("unknown label kind '" + std::string(s) + "'");
}

json pose_to_json(const Pose& pose) {
  json j;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[i * 3 + k] = pose.R(i, k);
  j["R"] = r;
  j["t"] = std::vector<double>{pose.t.x(), pose.t.y(), pose.t.z()};
  return j;
}

Pose pose_from_json(const json& j) {
  const auto r = j.at("R").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) bad("pose needs R[9] and t[3]");
  Pose p;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.R(i, k) = r[i * 3 + k];
  p.t = Vec3(t[0], t[1], t[2]);
  try {
    // Labels stored in single precision drift from orthonormality; snap small drift.
    p.validate(1e-5);
    Eigen::JacobiSVD<Mat3> svd(p.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p.R = svd.matrixU() * svd.matrixV().transpose();
    p.validate();
  } catch (const Error& e) {
    bad(std::string("invalid pose: ") + e.what());
  }
  return p;
}

json camera_to_json(const CameraModel& cam) {
  json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

CameraModel camera_from_json(const json& j) {
  CameraModel cam{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                  j.at("cy").get<double>(), j.at("width").get<int>(),   j.at("height").get<int>()};
  try {
    cam.validate();
  } catch (const Error& e) {
    bad(std::string("invalid camera: ") + e.what());
  }
  return cam;
}

json label_to_json(const PairLabel& label) {
  json j;
  j["kind"] = to_string(label.kind);
  if (label.kind == LabelKind::PoseDepth) {
    j["pose_a"] = label.pose_a;
    j["pose_b"] = label.pose_b;
    j["depth_a"] = label.depth_a;
    j["depth_b"] = label.depth_b;
  }
  if (label.homography) {
    std::vector<double> h(9);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) h[i * 3 + k] = (*label.homography)(i, k);
    j["homography"] = h;
  }
  return j;
}

PairLabel label_from_json(const json& j) {
  PairLabel label;
  label.kind = label_kind_from_string(j.at("kind").get<std::string>());
  label.pose_a = get_or<std::string>(j, "pose_a", "");
  label.pose_b = get_or<std::string>(j, "pose_b", "");
  label.depth_a = get_or<std::string>(j, "depth_a", "");
  label.depth_b = get_or<std::string>(j, "depth_b", "");
  if (j.contains("homography")) {
    const auto h = j.at("homography").get<std::vector<double>>();
    if (h.size() != 9) bad("homography label needs 9 entries");
    Mat3 m;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) m(i, k) = h[i * 3 + k];
    label.homography = m;
  }
  if (label.kind == LabelKind::Homography && !label.homography) bad("homography label without matrix");
  return label;
}

const ImageEntry* PairManifest::find_image(std::string_view id) const {
  for (const ImageEntry& e : images) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const Pose& PairManifest::pose(const std::string& key) const {
  const auto it = poses.find(key);
  if (it == poses.end()) bad("unknown pose '" + key + "'");
  return it->second;
}

std::filesystem::path PairManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void PairManifest::validate() const {
  const std::set<std::string> scene_set(scenes.begin(), scenes.end());
  std::set<std::string> ids;
  for (const ImageEntry& e : images) {
    if (e.id.empty() || !ids.insert(e.id).second) bad("duplicate or empty image id '" + e.id + "'");
    if (!is_registered_modality(e.modality)) bad("unregistered modality '" + e.modality + "' on " + e.id);
    if (!e.scene.empty() && !scene_set.count(e.scene)) bad("image " + e.id + " references unknown scene " + e.scene);
    if (!e.pose.empty() && !poses.count(e.pose)) bad("image " + e.id + " references unknown pose " + e.pose);
  }
  for (const ImageEntry& e : images) {
    if (!e.source.empty() && !ids.count(e.source)) bad("image " + e.id + " derives from unknown image " + e.source);
  }
  std::set<std::string> pair_ids;
  for (const PairEntry& p : pairs) {
    if (p.id.empty() || !pair_ids.insert(p.id).second) bad("duplicate or empty pair id '" + p.id + "'");
    if (!ids.count(p.a) || !ids.count(p.b)) bad("pair " + p.id + " references a missing image");
    if (p.label.kind == LabelKind::PoseDepth) {
      if (!poses.count(p.label.pose_a) || !poses.count(p.label.pose_b)) {
        bad("pair " + p.id + " references a missing pose");
      }
    }
  }
}

json PairManifest::to_json() const {
  json j;
  j["mdsyn_manifest"] = kManifestVersion;
  j["scenes"] = scenes;
  json poses_j = json::object();
  for (const auto& [key, pose] : poses) poses_j[key] = pose_to_json(pose);
  j["poses"] = poses_j;
  json images_j = json::array();
  for (const ImageEntry& e : images) {
    json ej;
    ej["id"] = e.id;
    ej["path"] = e.path;
    ej["scene"] = e.scene;
    ej["modality"] = e.modality;
    if (!e.source.empty()) ej["source"] = e.source;
    if (!e.generator.empty()) ej["generator"] = e.generator;
    if (e.camera) ej["camera"] = camera_to_json(*e.camera);
    if (!e.pose.empty()) ej["pose"] = e.pose;
    if (!e.depth.empty()) ej["depth"] = e.depth;
    images_j.push_back(ej);
  }
  j["images"] = images_j;
  json pairs_j = json::array();
  for (const PairEntry& p : pairs) {
    json pj;
    pj["id"] = p.id;
    pj["a"] = p.a;
    pj["b"] = p.b;
    pj["scene"] = p.scene;
    pj["case"] = p.modality_case;
    if (!p.source_pair.empty()) pj["source_pair"] = p.source_pair;
    pj["label"] = label_to_json(p.label);
    pj["split"] = p.split == Split::Test ? "test" : "train";
    pairs_j.push_back(pj);
  }
  j["pairs"] = pairs_j;
  json gens = json::array();
  for (const GeneratorRecord& g : generators) gens.push_back({{"name", g.name}, {"version", g.version}, {"modality", g.modality}});
  j["generators"] = gens;
  return j;
}

PairManifest PairManifest::from_json(const json& j, std::filesystem::path base_dir) {
  PairManifest m;
  m.base_dir = std::move(base_dir);
  try {
    if (j.at("mdsyn_manifest").get<int>() != kManifestVersion) bad("unsupported manifest version");
    m.scenes = get_or<std::vector<std::string>>(j, "scenes", {});
    if (j.contains("poses")) {
      for (const auto& [key, value] : j.at("poses").items()) m.poses.emplace(key, pose_from_json(value));
    }
    for (const json& ej : j.at("images")) {
      ImageEntry e;
      e.id = ej.at("id").get<std::string>();
      e.path = ej.at("path").get<std::string>();
      e.scene = get_or<std::string>(ej, "scene", "");
      e.modality = get_or<std::string>(ej, "modality", "rgb");
      e.source = get_or<std::string>(ej, "source", "");
      e.generator = get_or<std::string>(ej, "generator", "");
      if (ej.contains("camera")) e.camera = camera_from_json(ej.at("camera"));
      e.pose = get_or<std::string>(ej, "pose", "");
      e.depth = get_or<std::string>(ej, "depth", "");
      m.images.push_back(std::move(e));
    }
    for (const json& pj : j.at("pairs")) {
      PairEntry p;
      p.id = pj.at("id").get<std::string>();
      p.a = pj.at("a").get<std::string>();
      p.b = pj.at("b").get<std::string>();
      p.scene = get_or<std::string>(pj, "scene", "");
      p.modality_case = get_or<std::string>(pj, "case", "rgb-rgb");
      p.source_pair = get_or<std::string>(pj, "source_pair", "");
      p.label = label_from_json(pj.at("label"));
      const std::string split = get_or<std::string>(pj, "split", "train");
      if (split != "train" && split != "test") bad("pair " + p.id + " has unknown split '" + split + "'");
      p.split = split == "test" ? Split::Test : Split::Train;
      m.pairs.push_back(std::move(p));
    }
    if (j.contains("generators")) {
      for (const json& gj : j.at("generators")) {
        m.generators.push_back({gj.at("name").get<std::string>(), get_or<std::string>(gj, "version", ""),
                                get_or<std::string>(gj, "modality", "")});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

PairManifest PairManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    bad("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

void PairManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

PoseLabel resolve_pose_label(const PairManifest& manifest, const PairEntry& pair) {
  if (pair.label.kind != LabelKind::PoseDepth) bad("pair " + pair.id + " has no pose label");
  const ImageEntry* a = manifest.find_image(pair.a);
  const ImageEntry* b = manifest.find_image(pair.b);
  if (!a || !b || !a->camera || !b->camera) bad("pair " + pair.id + " lacks camera intrinsics");
  return {relative_pose(manifest.pose(pair.label.pose_a), manifest.pose(pair.label.pose_b)), *a->camera, *b->camera};
}

}  // namespace mdsyn::engine
