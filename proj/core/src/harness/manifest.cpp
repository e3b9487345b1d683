#include "p2p/harness/manifest.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "p2p/error.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;
using nlohmann::json;

const Subject& Manifest::subject(const std::string& id) const { return subjects[subject_index(id)]; }

std::size_t Manifest::subject_index(const std::string& id) const {
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].id == id) return i;
  }
  throw DataError("manifest has no subject '" + id + "'");
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path f(p);
    return f.is_absolute() ? f : base / f;
  };
  Manifest m;
  try {
    const json j = json::parse(in);
    std::set<std::string> ids;
    for (const auto& js : j.at("subjects")) {
      Subject s;
      s.id = js.at("id").get<std::string>();
      s.weight_kg = js.at("weight_kg").get<double>();
      s.height_m = js.value("height_m", 0.0);
      if (!ids.insert(s.id).second) throw DataError("duplicate subject id '" + s.id + "'");
      if (!(s.weight_kg > 0.0)) throw DataError("subject '" + s.id + "' needs a positive weight_kg");
      for (const auto& jsess : js.at("sessions")) {
        const auto session = jsess.at("id").get<std::string>();
        for (const auto& jt : jsess.at("takes")) {
          Take t;
          t.session = session;
          t.id = jt.at("id").get<std::string>();
          t.pose_file = resolve(jt.at("pose_file").get<std::string>());
          t.pressure_file = resolve(jt.at("pressure_file").get<std::string>());
          t.mask_file = resolve(jt.at("mask_file").get<std::string>());
          t.fps = jt.value("fps", 0.0);
          s.takes.push_back(std::move(t));
        }
      }
      m.subjects.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto relative = [&](const fs::path& p) {
    std::error_code ec;
    auto rel = fs::relative(p, base, ec);
    return (ec || rel.empty()) ? p.generic_string() : rel.generic_string();
  };
  json subjects = json::array();
  for (const auto& s : manifest.subjects) {
    json sessions = json::array();
    for (const auto& t : s.takes) {
      if (sessions.empty() || sessions.back()["id"] != t.session) {
        sessions.push_back({{"id", t.session}, {"takes", json::array()}});
      }
      sessions.back()["takes"].push_back({{"id", t.id},
                                          {"pose_file", relative(t.pose_file)},
                                          {"pressure_file", relative(t.pressure_file)},
                                          {"mask_file", relative(t.mask_file)},
                                          {"fps", t.fps}});
    }
    subjects.push_back(
        {{"id", s.id}, {"weight_kg", s.weight_kg}, {"height_m", s.height_m}, {"sessions", sessions}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << json{{"subjects", subjects}}.dump(2) << '\n';
}

}  // namespace p2p::harness
