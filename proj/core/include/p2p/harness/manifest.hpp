#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace p2p::harness {

struct Take {
  std::string session;
  std::string id;
  std::filesystem::path pose_file;  // resolved against the manifest directory
  std::filesystem::path pressure_file;
  std::filesystem::path mask_file;
  double fps = 0.0;
};

struct Subject {
  std::string id;
  double weight_kg = 0.0;
  double height_m = 0.0;
  std::vector<Take> takes;  // recording order; sessions are flattened
};

struct Manifest {
  std::vector<Subject> subjects;

  [[nodiscard]] const Subject& subject(const std::string& id) const;
  [[nodiscard]] std::size_t subject_index(const std::string& id) const;
};

/// Reads a manifest; relative file paths are resolved against its directory.
/// Throws DataError on missing fields, duplicate ids or non-positive weights.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest`, storing file paths relative to the manifest directory
/// where possible.
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace p2p::harness
