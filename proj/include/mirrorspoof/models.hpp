#pragma once

// Empirical models of mirror-induced artifacts as functions of the mirror
// state (d, theta, A):
//
//   lateral offset    X = cX * d * tan(2 theta) + deltaX
//   radial distance   R = cR * d^n_d * (1 + a1 theta + a2 theta^2)
//   point count       N = c0 * A^beta * cos^gamma(theta) * exp(-(d - mu)^2 / (2 sigma^2))
//   appearance        P = sig(k (d - d_min)) * sig(-k (d - d_max))
//                     d_min = b0_min + b1 theta + b2 A,  d_max = b0_max + c1 theta + c2 A
//
// Unit conventions: theta is in radians inside tan, cos and the radial
// polynomial, and in degrees inside the window boundaries.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <string>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/kv_config.hpp"
#include "mirrorspoof/optics.hpp"

namespace mirrorspoof {

struct MirrorState {
  double d = 1.0;      // LiDAR-to-mirror distance, m
  double theta = 0.0;  // tilt, degrees
  double area = 1.0;   // m^2

  void validate() const {
    detail::require(d > 0.0, "mirror state: distance must be positive");
    detail::require(theta >= 0.0 && theta < 90.0, "mirror state: tilt must lie in [0, 90) degrees");
    detail::require(area > 0.0, "mirror state: area must be positive");
  }

  double theta_rad() const { return deg_to_rad(theta); }
};

struct ArtifactModelParams {
  // Point count.
  double c0 = 2500.0;
  double beta = 1.25;
  double gamma = 3.5;
  double mu = 3.0;
  double sigma = 1.5;
  // Appearance window.
  double k = 15.0;
  double b0_min = -2.858;
  double b1 = 0.1389;
  double b2 = -0.3003;
  double b0_max = -0.946;
  double c1 = 0.1389;
  double c2 = 1.5390;
  // Lateral offset.
  double cX = 0.98;
  double deltaX = -0.05;
  // Radial distance.
  double cR = 1.02;
  double n_d = 0.88;
  double a1 = 0.15;
  double a2 = 0.08;

  void validate() const {
    detail::require(sigma > 0.0, "params: sigma must be positive");
    detail::require(k > 0.0, "params: k must be positive");
    detail::require(c0 > 0.0, "params: c0 must be positive");
    detail::require(n_d > 0.0 && n_d <= 1.0, "params: n_d must lie in (0, 1]");
  }

  friend bool operator==(const ArtifactModelParams&, const ArtifactModelParams&) = default;
};

struct ParamField {
  const char* name;
  double ArtifactModelParams::*member;
};

inline constexpr std::array<ParamField, 18> kParamFields{{
    {"c0", &ArtifactModelParams::c0},         {"beta", &ArtifactModelParams::beta},
    {"gamma", &ArtifactModelParams::gamma},   {"mu", &ArtifactModelParams::mu},
    {"sigma", &ArtifactModelParams::sigma},   {"k", &ArtifactModelParams::k},
    {"b0_min", &ArtifactModelParams::b0_min}, {"b1", &ArtifactModelParams::b1},
    {"b2", &ArtifactModelParams::b2},         {"b0_max", &ArtifactModelParams::b0_max},
    {"c1", &ArtifactModelParams::c1},         {"c2", &ArtifactModelParams::c2},
    {"cX", &ArtifactModelParams::cX},         {"deltaX", &ArtifactModelParams::deltaX},
    {"cR", &ArtifactModelParams::cR},         {"n_d", &ArtifactModelParams::n_d},
    {"a1", &ArtifactModelParams::a1},         {"a2", &ArtifactModelParams::a2},
}};

struct ArtifactFeatures {
  double R = 0.0;      // centroid range, m
  double X = 0.0;      // centroid lateral displacement, m
  double N = 0.0;      // point count
  double P_app = 0.0;  // appearance probability
  bool offset_clamped = false;  // X was clamped to +/-R
};

// Above this tilt tan(2 theta) approaches its pole at 45 degrees.
inline constexpr double kMaxOffsetTiltDeg = 44.9;

inline double lateral_offset(const MirrorState& s, const ArtifactModelParams& p) {
  s.validate();
  if (s.theta >= kMaxOffsetTiltDeg) {
    throw ModelDomainError("lateral offset model undefined for tilt >= 44.9 deg (tan(2*theta) "
                           "singularity at 45 deg); use the ray-traced simulator instead");
  }
  return p.cX * s.d * std::tan(2.0 * s.theta_rad()) + p.deltaX;
}

inline double radial_distance(const MirrorState& s, const ArtifactModelParams& p) {
  s.validate();
  const double t = s.theta_rad();
  return p.cR * std::pow(s.d, p.n_d) * (1.0 + p.a1 * t + p.a2 * t * t);
}

// Continuous model value; point_count() truncates it.
inline double expected_point_count(const MirrorState& s, const ArtifactModelParams& p) {
  s.validate();
  const double dd = s.d - p.mu;
  return p.c0 * std::pow(s.area, p.beta) * std::pow(std::cos(s.theta_rad()), p.gamma) *
         std::exp(-dd * dd / (2.0 * p.sigma * p.sigma));
}

inline std::int64_t point_count(const MirrorState& s, const ArtifactModelParams& p) {
  return static_cast<std::int64_t>(std::floor(expected_point_count(s, p)));
}

struct AppearanceWindow {
  double d_min = 0.0;
  double d_max = 0.0;
};

inline AppearanceWindow appearance_window(double theta_deg, double area, const ArtifactModelParams& p) {
  return {p.b0_min + p.b1 * theta_deg + p.b2 * area, p.b0_max + p.c1 * theta_deg + p.c2 * area};
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double appearance_probability(const MirrorState& s, const ArtifactModelParams& p) {
  s.validate();
  const auto w = appearance_window(s.theta, s.area, p);
  return sigmoid(p.k * (s.d - w.d_min)) * sigmoid(-p.k * (s.d - w.d_max));
}

inline ArtifactFeatures predict_features(const MirrorState& s, const ArtifactModelParams& p) {
  ArtifactFeatures f;
  f.X = lateral_offset(s, p);
  f.R = radial_distance(s, p);
  f.N = static_cast<double>(point_count(s, p));
  f.P_app = appearance_probability(s, p);
  if (std::abs(f.X) > f.R) {
    f.X = std::copysign(f.R, f.X);
    f.offset_clamped = true;
  }
  return f;
}

// ---- parameter files -------------------------------------------------------

inline ArtifactModelParams params_from_kv(const KeyValueFile& kv) {
  std::set<std::string> names;
  for (const auto& f : kParamFields) names.insert(f.name);
  kv.reject_unknown(names);
  kv.require_all(names);
  ArtifactModelParams p;
  for (const auto& f : kParamFields) p.*(f.member) = kv.get_double(f.name);
  try {
    p.validate();
  } catch (const ContractViolation& e) {
    throw InputError(kv.name() + ": " + e.what());
  }
  return p;
}

inline ArtifactModelParams load_params(const std::string& path) {
  return params_from_kv(KeyValueFile::load(path));
}

inline void write_params(std::ostream& os, const ArtifactModelParams& p) {
  for (const auto& f : kParamFields) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", p.*(f.member));
    os << f.name << '=' << buf << '\n';
  }
}

inline void save_params(const std::string& path, const ArtifactModelParams& p) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_params(out, p);
}

}  // namespace mirrorspoof
