#pragma once

// Frame campaigns: paired baseline / attacked recordings tagged with the
// mirror state under which each attacked frame was captured. Processing a
// campaign registers each attacked frame onto its baseline, differences the
// two, clusters what remains and turns the largest cluster into a feature
// sample. Per-state appearance frequencies feed the window model.
//
// Manifest format (comma separated, `#` comments, optional header row):
//
//   d,theta,area,baseline_csv,attacked_csv
//
// Paths are relative to the manifest. A CSV may hold several frames; a
// single-frame baseline applies to every attacked frame of its row,
// otherwise frames are paired by frame index.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/fitting.hpp"
#include "mirrorspoof/injection.hpp"
#include "mirrorspoof/models.hpp"
#include "mirrorspoof/point_cloud.hpp"
#include "mirrorspoof/registration.hpp"
#include "mirrorspoof/segmentation.hpp"

namespace mirrorspoof {

struct CampaignEntry {
  MirrorState state;
  std::string baseline_csv;
  std::string attacked_csv;
};

struct CampaignManifest {
  std::vector<CampaignEntry> entries;
};

inline constexpr std::string_view kCampaignHeader = "d,theta,area,baseline_csv,attacked_csv";

inline CampaignManifest load_campaign(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open campaign manifest '" + path + "'");
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  CampaignManifest m;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = csv::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty() || line == kCampaignHeader) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto cols = csv::split(line);
    if (cols.size() != 5) throw InputError(where + ": expected 5 columns (" + std::string(kCampaignHeader) + ")");
    CampaignEntry e;
    e.state.d = csv::parse_double(csv::trim(cols[0]), where);
    e.state.theta = csv::parse_double(csv::trim(cols[1]), where);
    e.state.area = csv::parse_double(csv::trim(cols[2]), where);
    try {
      e.state.validate();
    } catch (const ContractViolation& err) {
      throw InputError(where + ": " + err.what());
    }
    auto resolve = [&](const std::string& p) {
      const std::filesystem::path fp(csv::trim(p));
      return (fp.is_absolute() ? fp : dir / fp).string();
    };
    e.baseline_csv = resolve(cols[3]);
    e.attacked_csv = resolve(cols[4]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void save_campaign(const std::string& path, const CampaignManifest& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << kCampaignHeader << '\n';
  for (const auto& e : m.entries) {
    out << csv::format_g9(e.state.d) << ',' << csv::format_g9(e.state.theta) << ',' << csv::format_g9(e.state.area)
        << ',' << e.baseline_csv << ',' << e.attacked_csv << '\n';
  }
}

struct CampaignOptions {
  double difference_radius = 0.10;
  ClusterOptions clustering;  // 0.5 m radius, 5-point minimum
  bool align = true;
  IcpOptions icp;
  double z_reference = 0.0;  // see extract_features
};

struct CampaignSamples {
  std::vector<FeatureSample> artifacts;   // one per frame with an artifact cluster
  std::vector<FeatureSample> appearance;  // one per state: P_app = appearance frequency
  std::size_t frames = 0;
};

inline std::optional<ArtifactFeatures> analyse_frame(const PointCloud& attacked, const PointCloud& baseline,
                                                     const MirrorState& state, const CampaignOptions& options) {
  PointCloud aligned = attacked;
  if (options.align && attacked.size() >= 3 && baseline.size() >= 3) {
    aligned = transformed(attacked, icp_align(attacked, baseline, options.icp).transform);
  }
  const PointCloud diff = frame_difference(aligned, baseline, options.difference_radius);
  const auto clusters = cluster(diff, options.clustering);
  if (clusters.empty()) return std::nullopt;
  const auto largest = std::max_element(clusters.begin(), clusters.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return extract_features(subset(diff, *largest), state, options.z_reference);
}

inline CampaignSamples process_campaign(const CampaignManifest& manifest, const CampaignOptions& options = {}) {
  if (manifest.entries.empty()) throw InputError("campaign is empty");
  CampaignSamples out;
  // Appearance counts keyed by state, in first-seen order.
  std::vector<MirrorState> order;
  std::map<std::tuple<double, double, double>, std::pair<std::size_t, std::size_t>> seen;  // hits, frames
  for (const auto& e : manifest.entries) {
    const auto baseline = load_point_csv(e.baseline_csv);
    const auto attacked = load_point_csv(e.attacked_csv);
    if (baseline.empty()) throw InputError(e.baseline_csv + ": no frames");
    std::map<int, const PointCloud*> by_frame;
    for (const auto& b : baseline) by_frame[b.frame] = &b;
    const auto key = std::make_tuple(e.state.d, e.state.theta, e.state.area);
    if (!seen.count(key)) order.push_back(e.state);
    auto& tally = seen[key];
    for (const auto& a : attacked) {
      const PointCloud* base = baseline.size() == 1 ? &baseline.front() : nullptr;
      if (!base) {
        const auto it = by_frame.find(a.frame);
        if (it == by_frame.end()) {
          throw InputError(e.attacked_csv + ": frame " + std::to_string(a.frame) + " has no baseline counterpart");
        }
        base = it->second;
      }
      ++out.frames;
      ++tally.second;
      if (auto f = analyse_frame(a, *base, e.state, options)) {
        ++tally.first;
        out.artifacts.push_back({e.state, *f});
      }
    }
  }
  for (const auto& s : order) {
    const auto& [hits, frames] = seen[std::make_tuple(s.d, s.theta, s.area)];
    FeatureSample fs;
    fs.state = s;
    fs.features.P_app = frames ? static_cast<double>(hits) / static_cast<double>(frames) : 0.0;
    out.appearance.push_back(fs);
  }
  return out;
}

inline const std::vector<FeatureSample>& samples_for(const CampaignSamples& c, ModelKind kind) {
  return kind == ModelKind::kWindow ? c.appearance : c.artifacts;
}

// Synthesise a campaign by running the injection pipeline over a static
// baseline. Writes one baseline CSV, one attacked CSV per state and the
// manifest into `dir`; returns the manifest path.
inline std::string write_synthetic_campaign(const std::string& dir, const std::vector<MirrorState>& states,
                                            int frames_per_state, const PointCloud& baseline,
                                            const InjectionConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_point_csv((fs::path(dir) / "baseline.csv").string(), {baseline});
  SeededRng rng(config.seed);
  CampaignManifest m;
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::vector<PointCloud> frames;
    for (int f = 0; f < frames_per_state; ++f) {
      PointCloud native = baseline;
      native.frame = f;
      native.timestamp = f * 0.1;
      frames.push_back(inject(native, states[i], config, rng).cloud);
    }
    char name[32];
    std::snprintf(name, sizeof name, "attacked_%04zu.csv", i);
    save_point_csv((fs::path(dir) / name).string(), frames);
    m.entries.push_back({states[i], "baseline.csv", name});
  }
  const std::string manifest = (fs::path(dir) / "campaign.csv").string();
  save_campaign(manifest, m);
  return manifest;
}

}  // namespace mirrorspoof
