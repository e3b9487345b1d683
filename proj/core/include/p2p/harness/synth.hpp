#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "p2p/harness/manifest.hpp"
#include "p2p/pose/pose.hpp"
#include "p2p/pressure/pressure.hpp"

namespace p2p::harness {

/// Parameters of a synthetic capture campaign.
struct SyntheticSpec {
  std::size_t n_subjects = 4;
  std::size_t sessions = 1;
  std::size_t takes = 2;  // per session
  std::size_t frames_per_take = 500;
  std::uint64_t seed = 42;
  double fps = 30.0;
  std::string generator = "sway-rbf";

  void validate() const;
};

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void save_synthetic_spec(const std::filesystem::path& path, const SyntheticSpec& spec);

/// Writes one pose, pressure and mask CSV per take plus `manifest.json` into
/// `out_dir` and returns the manifest. Output depends only on `spec`.
///
/// Each subject sways between the feet, bends the knees and lifts a heel on
/// a slow periodic cycle with subject-specific tempo, stance and build,
/// while the arms and head move independently of the legs. Face joints are
/// reported undetected in about 60% of frames. Pressure is computed from the
/// noise-free lower-body pose: load share, heel lift and knee bend set the
/// amplitudes of Gaussian kernels at heel, midfoot, forefoot and toe, scaled
/// by body weight, plus uniform noise of at most 2 kPa, on the canonical
/// insole mask.
Manifest synth_generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Pressure map of a (noise-free) pose for a subject of `weight_kg`; the
/// deterministic part of the generator. Cells outside `mask` are 0.
pressure::PressureGrid synthetic_pressure(const pose::PoseFrame& pose, double weight_kg,
                                          const pressure::FootMask& mask);

}  // namespace p2p::harness
