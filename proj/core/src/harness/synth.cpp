#include "p2p/harness/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "json.hpp"
#include "p2p/error.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using pose::Joint;

void SyntheticSpec::validate() const {
  if (n_subjects == 0 || sessions == 0 || takes == 0 || frames_per_take == 0) {
    throw ConfigError("synth: n_subjects, sessions, takes and frames_per_take must be positive");
  }
  if (!(fps > 0.0)) throw ConfigError("synth: fps must be positive");
  if (generator != "sway-rbf") throw ConfigError("synth: unknown generator '" + generator + "'");
}

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  SyntheticSpec spec;
  try {
    const json j = json::parse(in);
    spec.n_subjects = j.value("n_subjects", spec.n_subjects);
    spec.sessions = j.value("sessions", spec.sessions);
    spec.takes = j.value("takes", spec.takes);
    spec.frames_per_take = j.value("frames_per_take", spec.frames_per_take);
    spec.seed = j.value("seed", spec.seed);
    spec.fps = j.value("fps", spec.fps);
    spec.generator = j.value("generator", spec.generator);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

void save_synthetic_spec(const fs::path& path, const SyntheticSpec& spec) {
  const json j{{"n_subjects", spec.n_subjects},           {"sessions", spec.sessions},
               {"takes", spec.takes},                     {"frames_per_take", spec.frames_per_take},
               {"seed", spec.seed},                       {"fps", spec.fps},
               {"generator", spec.generator}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr std::array<double, 6> kWeightsKg{52.0, 67.0, 64.0, 77.0, 60.0, 55.0};
constexpr std::array<double, 6> kHeightsM{1.60, 1.72, 1.60, 1.70, 1.56, 1.54};

// Peak pressure (kPa) of a 65 kg subject with all load on one region.
constexpr double kPeakKpa = 520.0;
constexpr double kNoiseKpa = 2.0;
constexpr double kJitter = 0.008;  // detector noise, fraction of body scale

// Pressure kernels in left-foot coordinates (row, column, row sigma, column sigma).
struct Kernel {
  double row, col, sr, sc;
};
constexpr Kernel kToe{4.0, 12.0, 2.5, 2.2};
constexpr Kernel kForefoot{15.0, 10.0, 4.0, 4.5};
constexpr Kernel kMidfoot{33.0, 6.5, 7.0, 2.5};
constexpr Kernel kHeel{51.0, 9.5, 4.5, 3.5};

// Body proportions as fractions of standing height in pixels.
constexpr double kHipHalfWidth = 0.08;
constexpr double kLegLength = 0.48;
constexpr double kTorso = 0.30;
constexpr double kShoulderHalfWidth = 0.13;
constexpr double kUpperArm = 0.17;
constexpr double kForearm = 0.15;

double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double smoothstep(double x) {
  const double t = std::clamp(x, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

struct Style {
  double weight_kg, height_m, scale_px;
  double tempo_hz, stance, knee_phase, sway_hz, sway_phase;
  std::array<double, 4> arm_hz, arm_phase;
  std::array<double, 2> head_hz, head_phase;
  double origin_x, origin_y;
};

Style make_style(std::size_t index, std::mt19937_64& rng) {
  Style s{};
  s.weight_kg = index < kWeightsKg.size() ? kWeightsKg[index] : uniform(rng, 50.0, 80.0);
  s.height_m = index < kHeightsM.size() ? kHeightsM[index] : uniform(rng, 1.50, 1.80);
  s.scale_px = 600.0 * s.height_m / 1.7;
  s.tempo_hz = uniform(rng, 0.35, 0.55);
  s.stance = uniform(rng, 0.02, 0.05);
  s.knee_phase = uniform(rng, 0.0, kTwoPi);
  s.sway_hz = uniform(rng, 0.07, 0.12);
  s.sway_phase = uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < 4; ++i) {
    s.arm_hz[i] = uniform(rng, 0.15, 0.6);
    s.arm_phase[i] = uniform(rng, 0.0, kTwoPi);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    s.head_hz[i] = uniform(rng, 0.1, 0.4);
    s.head_phase[i] = uniform(rng, 0.0, kTwoPi);
  }
  s.origin_x = uniform(rng, 500.0, 780.0);
  s.origin_y = uniform(rng, 250.0, 330.0);
  return s;
}

struct TakePhase {
  double gait, drift, arms, head;
};

void set(pose::PoseFrame& f, Joint j, double x, double y) {
  auto& k = f.joints[static_cast<std::size_t>(j)];
  k.x = x;
  k.y = y;
  k.confidence = 1.0;
}

const pose::Keypoint& at(const pose::PoseFrame& f, Joint j) { return f.joints[static_cast<std::size_t>(j)]; }

// Noise-free pose at time t. The subject faces the camera, so the left side
// appears at larger image x; image y points down.
pose::PoseFrame clean_pose(const Style& s, const TakePhase& p, double t) {
  const double S = s.scale_px;
  const double phi = kTwoPi * s.tempo_hz * t + p.gait + 0.3 * std::sin(kTwoPi * 0.05 * t + p.drift);
  const double sway = 0.8 * std::sin(phi) + 0.2 * std::sin(kTwoPi * s.sway_hz * t + s.sway_phase + p.drift);
  const double knee = 0.5 + 0.5 * std::sin(2.0 * phi + s.knee_phase);
  const double lift_left = std::pow(std::max(0.0, -std::sin(phi + 0.4)), 2.0);
  const double lift_right = std::pow(std::max(0.0, std::sin(phi + 0.4)), 2.0);

  pose::PoseFrame f;
  const double hx = s.origin_x + 0.06 * sway * S;
  const double hy = s.origin_y + 0.06 * knee * S;
  set(f, Joint::MidHip, hx, hy);
  const double floor_y = s.origin_y + (kLegLength + 0.045) * S;
  for (int side : {1, -1}) {
    const bool left = side > 0;
    const double lift = left ? lift_left : lift_right;
    const double hip_x = hx + side * kHipHalfWidth * S;
    const double hip_y = hy - side * 0.015 * sway * S;
    const double ankle_x = s.origin_x + side * (kHipHalfWidth + s.stance) * S;
    const double ankle_y = s.origin_y + kLegLength * S - 0.018 * lift * S;
    set(f, left ? Joint::LHip : Joint::RHip, hip_x, hip_y);
    set(f, left ? Joint::LKnee : Joint::RKnee, 0.5 * (hip_x + ankle_x) + side * 0.035 * knee * S,
        0.5 * (hip_y + ankle_y));
    set(f, left ? Joint::LAnkle : Joint::RAnkle, ankle_x, ankle_y);
    set(f, left ? Joint::LHeel : Joint::RHeel, ankle_x + side * 0.005 * S, floor_y - 0.015 * S - 0.03 * lift * S);
    set(f, left ? Joint::LBigToe : Joint::RBigToe, ankle_x - side * 0.02 * S, floor_y);
    set(f, left ? Joint::LSmallToe : Joint::RSmallToe, ankle_x + side * 0.03 * S, floor_y - 0.005 * S);
  }

  // Upper body leans against the hip shift; arms and head move on their own.
  const double nx = hx - 0.03 * sway * S;
  const double ny = hy - kTorso * S;
  set(f, Joint::Neck, nx, ny);
  for (int side : {1, -1}) {
    const bool left = side > 0;
    const std::size_t a = left ? 0 : 2;
    const double abduction = 0.25 + 0.9 * (0.5 + 0.5 * std::sin(kTwoPi * s.arm_hz[a] * t + s.arm_phase[a] + p.arms));
    const double bend = 1.4 * (0.5 + 0.5 * std::sin(kTwoPi * s.arm_hz[a + 1] * t + s.arm_phase[a + 1] - p.arms));
    const double sx = nx + side * kShoulderHalfWidth * S;
    const double sy = ny + 0.01 * S;
    const double ex = sx + side * kUpperArm * S * std::sin(abduction);
    const double ey = sy + kUpperArm * S * std::cos(abduction);
    const double fa = abduction + bend;
    set(f, left ? Joint::LShoulder : Joint::RShoulder, sx, sy);
    set(f, left ? Joint::LElbow : Joint::RElbow, ex, ey);
    set(f, left ? Joint::LWrist : Joint::RWrist, ex + side * kForearm * S * std::sin(fa),
        ey + kForearm * S * std::cos(fa));
  }
  const double turn = std::sin(kTwoPi * s.head_hz[0] * t + s.head_phase[0] + p.head);
  const double nod = std::sin(kTwoPi * s.head_hz[1] * t + s.head_phase[1] - p.head);
  const double nose_x = nx + 0.025 * turn * S;
  const double nose_y = ny - 0.11 * S + 0.012 * nod * S;
  set(f, Joint::Nose, nose_x, nose_y);
  set(f, Joint::LEye, nose_x + 0.022 * S - 0.004 * turn * S, nose_y - 0.015 * S);
  set(f, Joint::REye, nose_x - 0.022 * S - 0.004 * turn * S, nose_y - 0.015 * S);
  set(f, Joint::LEar, nose_x + 0.05 * S - 0.02 * turn * S, nose_y - 0.005 * S);
  set(f, Joint::REar, nose_x - 0.05 * S - 0.02 * turn * S, nose_y - 0.005 * S);
  return f;
}

// Detector model: jitter, confidences in [0.55, 0.95], dropped joints at (0, 0).
pose::PoseFrame observe(const pose::PoseFrame& clean, const Style& s, std::mt19937_64& rng) {
  pose::PoseFrame f = clean;
  for (std::size_t j = 0; j < pose::kJointCount; ++j) {
    auto& k = f.joints[j];
    k.x = std::round((k.x + kJitter * s.scale_px * gaussian(rng)) * 1000.0) / 1000.0;
    k.y = std::round((k.y + kJitter * s.scale_px * gaussian(rng)) * 1000.0) / 1000.0;
    k.confidence = std::round(uniform(rng, 0.55, 0.95) * 1000.0) / 1000.0;
    const auto joint = static_cast<Joint>(j);
    double drop = 0.0;
    switch (joint) {
      case Joint::Nose:
      case Joint::REye:
      case Joint::LEye:
      case Joint::REar:
      case Joint::LEar:
        drop = 0.6;
        break;
      case Joint::MidHip:
        drop = 0.002;
        break;
      case Joint::RElbow:
      case Joint::RWrist:
      case Joint::LElbow:
      case Joint::LWrist:
        drop = 0.02;
        break;
      default:
        break;
    }
    if (uniform(rng) < drop) k = pose::Keypoint{};
  }
  return f;
}

}  // namespace

pressure::PressureGrid synthetic_pressure(const pose::PoseFrame& pose, double weight_kg,
                                          const pressure::FootMask& mask) {
  for (Joint j : {Joint::MidHip, Joint::Neck, Joint::LAnkle, Joint::RAnkle, Joint::LHeel, Joint::RHeel,
                  Joint::LBigToe, Joint::RBigToe}) {
    if (!at(pose, j).detected()) {
      throw DataError("synthetic_pressure: joint " + std::string(pose::joint_name(static_cast<std::size_t>(j))) +
                      " is undetected");
    }
  }
  const auto& hip = at(pose, Joint::MidHip);
  const double torso = std::hypot(at(pose, Joint::Neck).x - hip.x, at(pose, Joint::Neck).y - hip.y);
  const double lx = at(pose, Joint::LAnkle).x - hip.x;
  const double rx = at(pose, Joint::RAnkle).x - hip.x;
  const double half = 0.5 * (lx - rx);
  if (!(torso > 0.0) || !(half > 0.0)) throw DataError("synthetic_pressure: degenerate pose");
  const double shift = -0.5 * (lx + rx) / half;
  const double load_left = 0.5 + 0.45 * std::tanh(2.2 * shift);

  pressure::PressureGrid grid;
  grid.frame_id = pose.frame_id;
  grid.mask = mask;
  for (std::size_t foot = 0; foot < pressure::kFeet; ++foot) {
    const bool left = foot == 0;
    const auto& ankle = at(pose, left ? Joint::LAnkle : Joint::RAnkle);
    const auto& heel = at(pose, left ? Joint::LHeel : Joint::RHeel);
    const auto& toe = at(pose, left ? Joint::LBigToe : Joint::RBigToe);
    const double lift = smoothstep(((toe.y - heel.y) / torso - 0.05) / 0.1);
    const double bend = smoothstep((1.6 - (ankle.y - hip.y) / torso) / 0.2);
    const std::array<double, 4> w{0.12 + 0.5 * lift, 0.55 + 0.5 * bend + 0.5 * lift, 0.25 + 0.1 * bend,
                                  (1.0 - lift) * (1.0 - 0.5 * bend) + 0.05};
    const double total = w[0] + w[1] + w[2] + w[3];
    const double load = left ? load_left : 1.0 - load_left;
    const double amp = kPeakKpa * (weight_kg / 65.0) * load / total;
    const double col_shift = 1.2 * std::tanh(2.0 * shift) * (left ? 1.0 : -1.0);
    const std::array<Kernel, 4> kernels{kToe, kForefoot, kMidfoot, kHeel};
    for (std::size_t r = 0; r < pressure::kRows; ++r) {
      for (std::size_t c = 0; c < pressure::kCols; ++c) {
        const std::size_t i = pressure::cell_index(foot, r, c);
        if (!mask.valid[i]) continue;
        // The right foot mirrors the left across the insole axis.
        const double col = left ? static_cast<double>(c) : static_cast<double>(pressure::kCols - 1 - c);
        double v = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          const double dr = (static_cast<double>(r) - kernels[k].row) / kernels[k].sr;
          const double dc = (col - kernels[k].col - col_shift) / kernels[k].sc;
          v += amp * w[k] * std::exp(-0.5 * (dr * dr + dc * dc));
        }
        grid.kpa[i] = std::min(v, 1000.0);
      }
    }
  }
  return grid;
}

Manifest synth_generate(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  const auto mask = pressure::canonical_footmask();
  const fs::path mask_path = out_dir / "footmask.csv";
  pressure::save_mask_file(mask_path, mask);

  Manifest manifest;
  std::mt19937_64 master(spec.seed);
  for (std::size_t si = 0; si < spec.n_subjects; ++si) {
    std::mt19937_64 rng(master());
    const Style style = make_style(si, rng);
    Subject subject;
    subject.id = (si + 1 < 10 ? "S0" : "S") + std::to_string(si + 1);
    subject.weight_kg = style.weight_kg;
    subject.height_m = style.height_m;
    fs::create_directories(out_dir / subject.id);
    for (std::size_t se = 0; se < spec.sessions; ++se) {
      for (std::size_t tk = 0; tk < spec.takes; ++tk) {
        Take take;
        take.session = "sess" + std::to_string(se + 1);
        take.id = "take" + std::to_string(tk + 1);
        take.fps = spec.fps;
        const std::string stem = take.session + "_" + take.id;
        take.pose_file = out_dir / subject.id / (stem + "_pose.csv");
        take.pressure_file = out_dir / subject.id / (stem + "_pressure.csv");
        take.mask_file = mask_path;

        const TakePhase phase{uniform(rng, 0.0, kTwoPi), uniform(rng, 0.0, kTwoPi), uniform(rng, 0.0, kTwoPi),
                              uniform(rng, 0.0, kTwoPi)};
        std::vector<pose::PoseFrame> poses;
        std::vector<pressure::RawPressureFrame> grids;
        poses.reserve(spec.frames_per_take);
        grids.reserve(spec.frames_per_take);
        for (std::size_t i = 0; i < spec.frames_per_take; ++i) {
          const double t = static_cast<double>(i) / spec.fps;
          auto clean = clean_pose(style, phase, t);
          clean.frame_id = static_cast<std::int64_t>(i);
          const auto grid = synthetic_pressure(clean, style.weight_kg, mask);
          auto observed = observe(clean, style, rng);
          observed.frame_id = clean.frame_id;
          poses.push_back(observed);

          pressure::RawPressureFrame raw;
          raw.frame_id = clean.frame_id;
          for (std::size_t c = 0; c < pressure::kCells; ++c) {
            if (!mask.valid[c]) {
              raw.values[c] = std::numeric_limits<double>::quiet_NaN();
              continue;
            }
            const double noisy = std::max(0.0, grid.kpa[c] + uniform(rng, -kNoiseKpa, kNoiseKpa));
            raw.values[c] = std::round(noisy * 100.0) / 100.0;
          }
          grids.push_back(std::move(raw));
        }
        pose::save_pose_file(take.pose_file, poses);
        pressure::save_pressure_file(take.pressure_file, grids);
        subject.takes.push_back(std::move(take));
      }
    }
    manifest.subjects.push_back(std::move(subject));
  }
  save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace p2p::harness
