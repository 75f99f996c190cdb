#include <json.hpp>

#include "stackcount/scenegen.h"

namespace stackcount {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* kind_name(ContainerSpec::Kind k) {
  return k == ContainerSpec::Kind::box ? "box" : "none";
}

ContainerSpec::Kind kind_from(const std::string& s, const std::string& path) {
  if (s == "box") return ContainerSpec::Kind::box;
  if (s == "none") return ContainerSpec::Kind::none;
  fail(errc::config, path + ": unknown container kind: " + s);
}

// Field accessor that converts a missing key into a config error naming it.
const ordered_json& need(const ordered_json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(errc::config, path + ": manifest missing field: " + key);
  return *it;
}

}  // namespace

void write_manifest(const std::string& path, const SceneRecord& rec) {
  ordered_json j;
  j["schema_version"] = 1;
  j["scene_id"] = rec.scene_id;
  j["shape_id"] = rec.shape_id;
  j["seed"] = rec.seed;
  j["n_objects"] = rec.n_objects;
  j["gamma_gt"] = rec.gamma_gt;
  j["gamma_no_edges"] = rec.gamma_no_edges;
  j["gamma_full"] = rec.gamma_full;
  j["unit_volume"] = rec.unit_volume;
  Quat q = quat_from_mat(rec.container.pose.R);
  j["container"] = {{"kind", kind_name(rec.container.kind)},
                    {"interior", {rec.container.interior.x, rec.container.interior.y,
                                  rec.container.interior.z}},
                    {"wall_thickness_ratio", rec.container.wall_thickness_ratio},
                    {"pose", {{"q", {q.w, q.x, q.y, q.z}},
                              {"t", {rec.container.pose.t.x, rec.container.pose.t.y,
                                     rec.container.pose.t.z}}}}};
  ordered_json pl = ordered_json::array();
  for (const auto& p : rec.placements)
    pl.push_back({p[0], p[1], p[2], p[3], p[4], p[5], p[6]});
  j["placements"] = std::move(pl);
  j["fill_fraction"] = rec.fill_fraction;
  j["settle"] = {{"resolution", rec.settle_resolution}, {"voxel", rec.settle_voxel}};
  write_file(path, j.dump(2) + "\n");
}

SceneRecord read_manifest(const std::string& path) {
  ordered_json j = ordered_json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) fail(errc::config, path + ": manifest is not valid JSON");

  SceneRecord rec;
  try {
    rec.scene_id = need(j, "scene_id", path).get<std::string>();
    rec.shape_id = need(j, "shape_id", path).get<std::string>();
    rec.seed = need(j, "seed", path).get<uint64_t>();
    rec.n_objects = need(j, "n_objects", path).get<int>();
    rec.gamma_gt = need(j, "gamma_gt", path).get<double>();
    rec.gamma_no_edges = need(j, "gamma_no_edges", path).get<double>();
    rec.gamma_full = need(j, "gamma_full", path).get<double>();
    rec.unit_volume = need(j, "unit_volume", path).get<double>();
    const auto& c = need(j, "container", path);
    rec.container.kind = kind_from(need(c, "kind", path).get<std::string>(), path);
    auto interior = need(c, "interior", path).get<std::array<double, 3>>();
    rec.container.interior = {interior[0], interior[1], interior[2]};
    rec.container.wall_thickness_ratio = need(c, "wall_thickness_ratio", path).get<double>();
    const auto& pose = need(c, "pose", path);
    auto q = need(pose, "q", path).get<std::array<double, 4>>();
    auto t = need(pose, "t", path).get<std::array<double, 3>>();
    rec.container.pose.R = mat_from_quat(Quat{q[0], q[1], q[2], q[3]});
    rec.container.pose.t = {t[0], t[1], t[2]};
    for (const auto& p : need(j, "placements", path))
      rec.placements.push_back(p.get<std::array<double, 7>>());
    rec.fill_fraction = need(j, "fill_fraction", path).get<double>();
    const auto& settle = need(j, "settle", path);
    rec.settle_resolution = need(settle, "resolution", path).get<int>();
    rec.settle_voxel = need(settle, "voxel", path).get<double>();
  } catch (const ordered_json::exception& e) {
    fail(errc::config, path + ": manifest field has the wrong type: " + e.what());
  }
  if (rec.n_objects != int(rec.placements.size()))
    fail(errc::config, path + ": manifest object count disagrees with placements");
  return rec;
}

}  // namespace stackcount
