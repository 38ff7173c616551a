// Command-line front end. Every command writes its outputs plus a
// manifest.txt into the --out directory.
//
// Exit codes: 0 success, 2 input error, 3 numerical non-convergence.

#include <glob.h>

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mirrorspoof/mirrorspoof.hpp"

namespace fs = std::filesystem;
using namespace mirrorspoof;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitInput = 2;
constexpr int kExitNonConvergence = 3;

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::string> inputs;  // files folded into the parameter hash
  std::uint64_t seed = 0;
  std::string extra;  // resolved parameters, hashed as well

  void write(const fs::path& dir) const {
    std::uint64_t h = fnv1a(extra);
    for (const auto& p : inputs) h = fnv1a(slurp(p), fnv1a(p, h));
    std::ofstream out(dir / "manifest.txt");
    out << "command=" << command << '\n';
    out << "args=";
    for (std::size_t i = 0; i < argv.size(); ++i) out << (i ? " " : "") << argv[i];
    out << '\n';
    out << "seed=" << seed << '\n';
    out << "output_dir=" << dir.string() << '\n';
    out << "inputs=";
    for (std::size_t i = 0; i < inputs.size(); ++i) out << (i ? ";" : "") << inputs[i];
    out << '\n';
    out << "version=" << kVersion << '\n';
    out << "rng=" << SeededRng::kIdentity << '\n';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    out << "param_hash=" << buf << '\n';
  }
};

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw InputError("cannot write '" + p.string() + "'");
  return f;
}

ArtifactModelParams params_or_default(const std::string& path) {
  return path.empty() ? ArtifactModelParams{} : load_params(path);
}

std::string params_text(const ArtifactModelParams& p) {
  std::ostringstream ss;
  write_params(ss, p);
  return ss.str();
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> files;
  for (const auto& pat : patterns) {
    glob_t g{};
    const int rc = ::glob(pat.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc == GLOB_NOMATCH) throw InputError("no files match '" + pat + "'");
    if (rc != 0 && rc != GLOB_NOMATCH) throw InputError("cannot expand '" + pat + "'");
  }
  return files;
}

// ---- scan ------------------------------------------------------------------------

struct ScanArgs {
  std::string scene, config, out;
  int frames = 1;
  std::uint64_t seed = 0;
};

int cmd_scan(const ScanArgs& a, const Manifest& base) {
  const SceneFile sf = load_scene(a.scene);
  const LidarConfig cfg = a.config.empty() ? LidarConfig{} : lidar_config_from_kv(KeyValueFile::load(a.config));
  if (a.frames < 1) throw InputError("--frames must be >= 1");
  const fs::path dir = prepare_out(a.out);
  std::vector<PointCloud> frames;
  const SensorPose pose = sf.pose(cfg);
  for (int f = 0; f < a.frames; ++f) frames.push_back(scan(sf.scene, pose, cfg, f, f / cfg.scan_rate_hz));
  auto out = open_out(dir / "scan.csv");
  write_point_csv(out, frames);
  const PointCloud& p = frames.front();
  std::cout << "points/frame=" << p.size() << " direct=" << count_tag(p, PointTag::kDirect)
            << " virtual=" << count_tag(p, PointTag::kVirtual) << " ground=" << count_tag(p, PointTag::kGround)
            << '\n';
  Manifest m = base;
  m.inputs = {a.scene};
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.seed = a.seed;
  m.write(dir);
  return 0;
}

// ---- inject ------------------------------------------------------------------------

struct InjectArgs {
  std::string input, schedule, params, out;
  std::uint64_t seed = 42;
};

// Schedule rows `frame,d,theta,area`; frame `*` applies to every frame.
struct ScheduleRow {
  bool all_frames = false;
  int frame = 0;
  MirrorState state;
};

std::vector<ScheduleRow> load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schedule '" + path + "'");
  std::vector<ScheduleRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto hash = raw.find('#');
    const std::string line = csv::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty() || line == "frame,d,theta,area") continue;
    const auto cols = csv::split(line);
    if (cols.size() != 4) throw InputError(where + ": expected frame,d,theta,area");
    ScheduleRow r;
    const std::string f = csv::trim(cols[0]);
    if (f == "*") {
      r.all_frames = true;
    } else {
      r.frame = static_cast<int>(csv::parse_int(f, where));
    }
    r.state.d = csv::parse_double(csv::trim(cols[1]), where);
    r.state.theta = csv::parse_double(csv::trim(cols[2]), where);
    r.state.area = csv::parse_double(csv::trim(cols[3]), where);
    try {
      r.state.validate();
    } catch (const ContractViolation& e) {
      throw InputError(where + ": " + e.what());
    }
    if (r.state.theta >= kMaxOffsetTiltDeg) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    ": tilt %g deg is outside the lateral-offset model's domain (theta < %g deg); "
                    "use a ray-traced scene instead",
                    r.state.theta, kMaxOffsetTiltDeg);
      throw InputError(where + buf);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw InputError(path + ": schedule is empty");
  return rows;
}

int cmd_inject(const InjectArgs& a, const Manifest& base) {
  const auto native = load_point_csv(a.input);
  if (native.empty()) throw InputError(a.input + ": no frames");
  const auto schedule = load_schedule(a.schedule);
  InjectionConfig cfg;
  cfg.params = params_or_default(a.params);
  cfg.seed = a.seed;
  const fs::path dir = prepare_out(a.out);
  SeededRng rng(cfg.seed);
  std::vector<PointCloud> attacked;
  std::vector<InjectionReport> reports;
  for (const auto& frame : native) {
    const ScheduleRow* row = nullptr;
    for (const auto& r : schedule) {
      if (!r.all_frames && r.frame == frame.frame) row = &r;
    }
    if (!row) {
      for (const auto& r : schedule) {
        if (r.all_frames) row = &r;
      }
    }
    if (!row) {
      attacked.push_back(frame);
      continue;
    }
    auto res = inject(frame, row->state, cfg, rng);
    attacked.push_back(std::move(res.cloud));
    reports.push_back(res.report);
  }
  {
    auto out = open_out(dir / "attacked.csv");
    write_point_csv(out, attacked);
  }
  auto rep = open_out(dir / "report.csv");
  rep << kReportHeader << '\n';
  std::size_t triggered = 0;
  for (const auto& r : reports) {
    write_report_row(rep, r);
    triggered += r.triggered ? 1 : 0;
  }
  std::cout << "frames=" << native.size() << " scheduled=" << reports.size() << " triggered=" << triggered << '\n';
  Manifest m = base;
  m.inputs = {a.input, a.schedule};
  if (!a.params.empty()) m.inputs.push_back(a.params);
  m.seed = a.seed;
  m.extra = params_text(cfg.params);
  m.write(dir);
  return 0;
}

// ---- fit ------------------------------------------------------------------------------

struct FitArgs {
  std::string campaign, model = "offset", params, out;
  double diff_radius = 0.10;
  double cluster_radius = 0.5;
  int min_points = 5;
  double z_reference = 0.0;
  bool no_align = false;
};

std::string fmt_opt(const std::optional<double>& v) { return v ? csv::format_g9(*v) : std::string("nan"); }

int cmd_fit(const FitArgs& a, const Manifest& base) {
  const ModelKind kind = parse_model_kind(a.model);
  const auto manifest = load_campaign(a.campaign);
  if (manifest.entries.empty()) throw InputError(a.campaign + ": campaign is empty");
  CampaignOptions opt;
  opt.difference_radius = a.diff_radius;
  opt.clustering.radius = a.cluster_radius;
  opt.clustering.min_points = static_cast<std::size_t>(std::max(1, a.min_points));
  opt.z_reference = a.z_reference;
  opt.align = !a.no_align;
  const CampaignSamples cs = process_campaign(manifest, opt);
  const auto& samples = samples_for(cs, kind);
  const ArtifactModelParams start = params_or_default(a.params);
  const FitResult fr = fit_models(samples, kind, std::nullopt, start);

  const fs::path dir = prepare_out(a.out);
  save_params((dir / "params.txt").string(), fr.params);
  {
    auto out = open_out(dir / "fit.csv");
    out << "name,value\n";
    out << "model," << to_string(kind) << '\n';
    const ModelSpec spec = model_spec(kind);
    for (std::size_t j = 0; j < spec.fields.size(); ++j) {
      out << spec.names[j] << ',' << csv::format_g9(fr.params.*(spec.fields[j])) << '\n';
    }
    out << "r_squared," << fmt_opt(fr.r_squared) << '\n';
    out << "rmse," << csv::format_g9(fr.rmse) << '\n';
    out << "samples," << fr.samples << '\n';
    out << "frames," << cs.frames << '\n';
    out << "iterations," << fr.iterations << '\n';
    out << "converged," << (fr.converged ? "true" : "false") << '\n';
  }
  {
    auto out = open_out(dir / "r2_by_configuration.csv");
    out << "theta,area,n,r_squared,rmse\n";
    for (const auto& g : fit_stats_by_configuration(kind, samples, fr.params)) {
      out << csv::format_g9(g.theta) << ',' << csv::format_g9(g.area) << ',' << g.stats.n << ','
          << fmt_opt(g.stats.r_squared) << ',' << csv::format_g9(g.stats.rmse) << '\n';
    }
  }
  Manifest m = base;
  m.inputs = {a.campaign};
  if (!a.params.empty()) m.inputs.push_back(a.params);
  m.extra = params_text(start);
  m.write(dir);
  std::cout << "model=" << to_string(kind) << " samples=" << fr.samples << " r_squared=" << fmt_opt(fr.r_squared)
            << " converged=" << (fr.converged ? "true" : "false") << '\n';
  if (!fr.converged) {
    std::cerr << "fit did not converge: " << fr.diagnostic << '\n';
    return kExitNonConvergence;
  }
  return 0;
}

// ---- scenario -----------------------------------------------------------------------

struct ScenarioArgs {
  std::string config, params, out;
  std::uint64_t seed = 42;
  bool seed_given = false;
  bool no_attack = false;
  bool reference_sweep = false;
};

std::string fmt_time(const std::optional<double>& t) { return t ? csv::format_g9(*t) : std::string("none"); }

int cmd_scenario(const ScenarioArgs& a, const Manifest& base) {
  ScenarioConfig cfg;
  if (!a.config.empty()) cfg = scenario_from_kv(KeyValueFile::load(a.config));
  if (a.seed_given) cfg.seed = a.seed;
  if (a.no_attack) cfg.attack = false;
  cfg.injection.params = params_or_default(a.params);
  cfg.injection.seed = cfg.seed;
  const fs::path dir = prepare_out(a.out);

  const ScenarioLog log = run_scenario(cfg);
  {
    auto out = open_out(dir / "scenario.csv");
    write_scenario_csv(out, log);
  }
  std::ostringstream summary;
  summary << "collision=" << (log.collided() ? "true" : "false") << '\n'
          << "min_ttc=" << (std::isinf(log.min_ttc) ? std::string("inf") : csv::format_g9(log.min_ttc)) << '\n'
          << "attack_time=" << fmt_time(log.attack_time) << '\n'
          << "ego_brake_time=" << fmt_time(log.ego_brake_time) << '\n'
          << "follower_brake_time=" << fmt_time(log.follower_brake_time) << '\n'
          << "ego_stop_time=" << fmt_time(log.ego_stop_time) << '\n'
          << "collision_time=" << fmt_time(log.collision_time) << '\n'
          << "max_injected=" << log.max_injected << '\n';
  {
    auto out = open_out(dir / "summary.txt");
    out << summary.str();
  }
  std::cout << summary.str();

  if (a.reference_sweep) {
    auto out = open_out(dir / "effectiveness.csv");
    out << "d,theta,area,source,triggered,emergency_brake,collision,max_injected,min_ttc\n";
    const MirrorState rows[] = {{4.0, 30.0, 0.18}, {5.0, 45.0, 0.36}, {7.0, 60.0, 0.60}};
    std::uint64_t i = 0;
    for (const auto& s : rows) {
      ScenarioConfig c = cfg;
      c.seed = cfg.seed + i;
      c.injection.seed = c.seed;
      ++i;
      const EffectivenessRow r = evaluate_configuration(s, c);
      out << csv::format_g9(s.d) << ',' << csv::format_g9(s.theta) << ',' << csv::format_g9(s.area) << ','
          << (r.raytraced ? "raytraced" : "model") << ',' << (r.triggered ? "yes" : "no") << ','
          << (r.emergency_brake ? "yes" : "no") << ',' << (r.collision ? "yes" : "no") << ',' << r.max_injected
          << ',' << (std::isinf(r.min_ttc) ? std::string("inf") : csv::format_g9(r.min_ttc)) << '\n';
    }
  }
  Manifest m = base;
  if (!a.config.empty()) m.inputs.push_back(a.config);
  if (!a.params.empty()) m.inputs.push_back(a.params);
  m.seed = cfg.seed;
  m.extra = params_text(cfg.injection.params) + (cfg.attack ? "attack\n" : "no-attack\n");
  m.write(dir);
  return 0;
}

// ---- occupancy ------------------------------------------------------------------------

struct OccupancyArgs {
  std::vector<std::string> frames;
  std::string config, out;
};

int cmd_occupancy(const OccupancyArgs& a, const Manifest& base) {
  const auto files = expand_globs(a.frames);
  std::vector<PointCloud> frames;
  for (const auto& f : files) {
    auto more = load_point_csv(f);
    frames.insert(frames.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (frames.empty()) throw InputError("no frames in the occupancy input");
  const GridConfig cfg = a.config.empty() ? GridConfig{} : grid_config_from_kv(KeyValueFile::load(a.config));
  const OccupancyGrid g = build_grid(frames, cfg);
  const fs::path dir = prepare_out(a.out);
  {
    auto out = open_out(dir / "grid.txt");
    write_grid(out, g);
  }
  std::ostringstream summary;
  summary << "frames=" << frames.size() << '\n'
          << "occupied_cells=" << g.count(CellState::kOccupied) << '\n'
          << "free_cells=" << g.count(CellState::kFree) << '\n'
          << "unknown_cells=" << g.count(CellState::kUnknown) << '\n'
          << "occupied_area=" << csv::format_g9(occupied_area(g)) << '\n';
  {
    auto out = open_out(dir / "summary.txt");
    out << summary.str();
  }
  std::cout << summary.str();
  Manifest m = base;
  m.inputs = files;
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.write(dir);
  return 0;
}

// ---- synth-campaign -------------------------------------------------------------------

struct SynthArgs {
  std::string params, out;
  std::vector<double> distances, thetas, areas;
  int frames = 20;
  std::uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& a, const Manifest& base) {
  if (a.frames < 1) throw InputError("--frames must be >= 1");
  InjectionConfig cfg;
  cfg.params = params_or_default(a.params);
  cfg.seed = a.seed;
  std::vector<MirrorState> states;
  for (double th : a.thetas)
    for (double ar : a.areas)
      for (double d : a.distances) {
        MirrorState s{d, th, ar};
        try {
          s.validate();
        } catch (const ContractViolation& e) {
          throw InputError(e.what());
        }
        if (th >= kMaxOffsetTiltDeg) throw InputError("synth-campaign: tilts must stay below 44.9 deg");
        states.push_back(s);
      }
  // A small static reference scene gives ICP some structure to lock on to.
  LidarConfig lidar;
  lidar.channels = 32;
  lidar.azimuth_step_deg = 360.0 / 256.0;
  PointCloud baseline = scan(ora_baseline_scene(), SensorPose::at(0.0, 0.0, 0.0, lidar), lidar);
  const fs::path dir = prepare_out(a.out);
  const std::string manifest_path = write_synthetic_campaign(dir.string(), states, a.frames, baseline, cfg);
  std::cout << "campaign=" << manifest_path << " states=" << states.size() << " frames=" << states.size() * a.frames
            << '\n';
  Manifest m = base;
  m.seed = a.seed;
  if (!a.params.empty()) m.inputs.push_back(a.params);
  m.extra = params_text(cfg.params);
  m.write(dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror-induced LiDAR artifact toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Manifest base;
  for (int i = 0; i < argc; ++i) base.argv.emplace_back(argv[i]);

  ScanArgs scan_a;
  auto* scan_cmd = app.add_subcommand("scan", "Ray-trace a scene file into a point-cloud CSV");
  scan_cmd->add_option("--scene", scan_a.scene, "Scene description file")->required();
  scan_cmd->add_option("--config", scan_a.config, "LiDAR config (key=value)");
  scan_cmd->add_option("--frames", scan_a.frames, "Number of frames to emit")->capture_default_str();
  scan_cmd->add_option("--seed", scan_a.seed, "Recorded in the manifest; scans are deterministic");
  scan_cmd->add_option("--out", scan_a.out, "Output directory")->required();

  InjectArgs inj_a;
  auto* inj_cmd = app.add_subcommand("inject", "Inject model-driven artifacts into recorded frames");
  inj_cmd->add_option("--input", inj_a.input, "Native point-cloud CSV")->required();
  inj_cmd->add_option("--schedule", inj_a.schedule, "Mirror-state schedule CSV (frame,d,theta,area)")->required();
  inj_cmd->add_option("--params", inj_a.params, "Model parameter file");
  inj_cmd->add_option("--seed", inj_a.seed, "RNG seed")->capture_default_str();
  inj_cmd->add_option("--out", inj_a.out, "Output directory")->required();

  FitArgs fit_a;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an artifact model to a frame campaign");
  fit_cmd->add_option("--campaign", fit_a.campaign, "Campaign manifest CSV")->required();
  fit_cmd->add_option("--model", fit_a.model, "Model to fit")
      ->check(CLI::IsMember({"offset", "radial", "count", "window"}))
      ->capture_default_str();
  fit_cmd->add_option("--params", fit_a.params, "Starting / fixed parameter file");
  fit_cmd->add_option("--diff-radius", fit_a.diff_radius, "Frame-difference radius, m")->capture_default_str();
  fit_cmd->add_option("--cluster-radius", fit_a.cluster_radius, "Clustering radius, m")->capture_default_str();
  fit_cmd->add_option("--min-points", fit_a.min_points, "Minimum cluster size")->capture_default_str();
  fit_cmd->add_option("--z-reference", fit_a.z_reference, "Sensor-frame height R is measured from, m")
      ->capture_default_str();
  fit_cmd->add_flag("--no-align", fit_a.no_align, "Skip ICP registration");
  fit_cmd->add_option("--out", fit_a.out, "Output directory")->required();

  ScenarioArgs sc_a;
  auto* sc_cmd = app.add_subcommand("scenario", "Run the two-vehicle braking scenario");
  sc_cmd->add_option("--config", sc_a.config, "Scenario config (key=value)");
  sc_cmd->add_option("--params", sc_a.params, "Model parameter file");
  auto* seed_opt = sc_cmd->add_option("--seed", sc_a.seed, "RNG seed");
  sc_cmd->add_flag("--no-attack", sc_a.no_attack, "Disable the mirror attack");
  sc_cmd->add_flag("--reference-sweep", sc_a.reference_sweep, "Also evaluate the three reference mirror configurations");
  sc_cmd->add_option("--out", sc_a.out, "Output directory")->required();

  OccupancyArgs occ_a;
  auto* occ_cmd = app.add_subcommand("occupancy", "Build an occupancy grid from point-cloud frames");
  occ_cmd->add_option("--frames", occ_a.frames, "Point-cloud CSV files or glob patterns")->required();
  occ_cmd->add_option("--config", occ_a.config, "Grid config (key=value)");
  occ_cmd->add_option("--out", occ_a.out, "Output directory")->required();

  SynthArgs syn_a;
  syn_a.distances = {1.5, 2.0, 2.5, 3.0, 3.5};
  syn_a.thetas = {10.0, 15.0, 20.0};
  syn_a.areas = {0.18, 0.36, 0.60};
  auto* syn_cmd = app.add_subcommand("synth-campaign", "Write a synthetic campaign from the injection models");
  syn_cmd->add_option("--params", syn_a.params, "Model parameter file");
  syn_cmd->add_option("--distances", syn_a.distances, "Mirror distances, m")->delimiter(',');
  syn_cmd->add_option("--thetas", syn_a.thetas, "Tilts, degrees")->delimiter(',');
  syn_cmd->add_option("--areas", syn_a.areas, "Areas, m^2")->delimiter(',');
  syn_cmd->add_option("--frames", syn_a.frames, "Frames per state")->capture_default_str();
  syn_cmd->add_option("--seed", syn_a.seed, "RNG seed")->capture_default_str();
  syn_cmd->add_option("--out", syn_a.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (scan_cmd->parsed()) {
      base.command = "scan";
      return cmd_scan(scan_a, base);
    }
    if (inj_cmd->parsed()) {
      base.command = "inject";
      return cmd_inject(inj_a, base);
    }
    if (fit_cmd->parsed()) {
      base.command = "fit";
      return cmd_fit(fit_a, base);
    }
    if (sc_cmd->parsed()) {
      base.command = "scenario";
      sc_a.seed_given = seed_opt->count() > 0;
      return cmd_scenario(sc_a, base);
    }
    if (occ_cmd->parsed()) {
      base.command = "occupancy";
      return cmd_occupancy(occ_a, base);
    }
    if (syn_cmd->parsed()) {
      base.command = "synth-campaign";
      return cmd_synth(syn_a, base);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ModelDomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
