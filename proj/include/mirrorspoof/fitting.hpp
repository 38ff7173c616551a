#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) fits of the four artifact models
// to observed (state, features) samples. Initial guesses come from ordinary
// least squares on linearized forms of each model.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirrorspoof/errors.hpp"
#include "mirrorspoof/models.hpp"

namespace mirrorspoof {

enum class ModelKind { kOffset, kRadial, kCount, kWindow };

inline std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kOffset: return "offset";
    case ModelKind::kRadial: return "radial";
    case ModelKind::kCount: return "count";
    case ModelKind::kWindow: return "window";
  }
  return "offset";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "offset") return ModelKind::kOffset;
  if (s == "radial") return ModelKind::kRadial;
  if (s == "count") return ModelKind::kCount;
  if (s == "window") return ModelKind::kWindow;
  throw InputError("unknown model '" + std::string(s) + "' (expected offset|radial|count|window)");
}

struct FeatureSample {
  MirrorState state;
  ArtifactFeatures features;
};

// ---- Levenberg-Marquardt core ----------------------------------------------

struct LmOptions {
  double initial_damping = 1e-3;
  double damping_factor = 10.0;
  int max_iterations = 200;
  double tolerance = 1e-10;  // relative cost change
};

struct LmOutcome {
  Eigen::VectorXd x;
  double cost = 0.0;  // 0.5 * sum r^2
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

// `eval(x, r, J)` fills residuals r (m) and Jacobian J (m x n).
using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>;

inline LmOutcome levenberg_marquardt(Eigen::VectorXd x, const ResidualFn& eval, const LmOptions& opt = {}) {
  LmOutcome out;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  eval(x, r, J);
  double cost = 0.5 * r.squaredNorm();

  auto rank_deficient = [](const Eigen::MatrixXd& jac) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(1e-12);
    return qr.rank() < jac.cols();
  };
  if (!std::isfinite(cost)) {
    out.x = x;
    out.cost = cost;
    out.diagnostic = "non-finite residuals at the initial guess";
    return out;
  }
  if (rank_deficient(J)) {
    out.x = x;
    out.cost = cost;
    out.diagnostic = "rank-deficient Jacobian at the initial guess: parameters not identifiable from these samples";
    return out;
  }

  double lambda = opt.initial_damping;
  Eigen::VectorXd r_new;
  Eigen::MatrixXd J_new;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.iterations = iter;
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd x_try = x + step;
      eval(x_try, r_new, J_new);
      const double cost_try = 0.5 * r_new.squaredNorm();
      if (std::isfinite(cost_try) && cost_try < cost) {
        const double rel = (cost - cost_try) / cost;
        const double step_rel = step.norm() / (x.norm() + 1e-300);
        x = x_try;
        r.swap(r_new);
        J.swap(J_new);
        cost = cost_try;
        lambda = std::max(lambda / opt.damping_factor, 1e-15);
        improved = true;
        if (rel < opt.tolerance || step_rel < 1e-14) out.converged = true;
        break;
      }
      lambda *= opt.damping_factor;
    }
    if (!improved) {
      // No decrease possible at any damping: a stationary point to working
      // precision, unless the gradient is still large.
      const double gnorm = g.lpNorm<Eigen::Infinity>();
      out.converged = gnorm <= 1e-6 * std::max(1.0, cost);
      if (!out.converged) out.diagnostic = "damping diverged without reducing the cost";
      break;
    }
    if (out.converged) break;
  }
  if (!out.converged && out.diagnostic.empty()) {
    out.diagnostic = "iteration limit reached before the cost stabilised";
  }
  if (out.converged && rank_deficient(J)) {
    out.converged = false;
    out.diagnostic = "rank-deficient Jacobian at the solution";
  }
  out.x = x;
  out.cost = cost;
  return out;
}

// ---- model adapters ----------------------------------------------------------

struct ModelSpec {
  std::vector<double ArtifactModelParams::*> fields;
  std::vector<std::string> names;
  // Model value and gradient with respect to `fields`.
  std::function<double(const MirrorState&, const ArtifactModelParams&, double* grad)> value;
  std::function<double(const ArtifactFeatures&)> target;
};

inline ModelSpec model_spec(ModelKind kind) {
  ModelSpec m;
  switch (kind) {
    case ModelKind::kOffset:
      m.fields = {&ArtifactModelParams::cX, &ArtifactModelParams::deltaX};
      m.names = {"cX", "deltaX"};
      m.value = [](const MirrorState& s, const ArtifactModelParams& p, double* g) {
        const double base = s.d * std::tan(2.0 * s.theta_rad());
        if (g) {
          g[0] = base;
          g[1] = 1.0;
        }
        return p.cX * base + p.deltaX;
      };
      m.target = [](const ArtifactFeatures& f) { return f.X; };
      break;
    case ModelKind::kRadial:
      m.fields = {&ArtifactModelParams::cR, &ArtifactModelParams::n_d, &ArtifactModelParams::a1,
                  &ArtifactModelParams::a2};
      m.names = {"cR", "n_d", "a1", "a2"};
      m.value = [](const MirrorState& s, const ArtifactModelParams& p, double* g) {
        const double t = s.theta_rad();
        const double dn = std::pow(s.d, p.n_d);
        const double poly = 1.0 + p.a1 * t + p.a2 * t * t;
        const double v = p.cR * dn * poly;
        if (g) {
          g[0] = dn * poly;
          g[1] = v * std::log(s.d);
          g[2] = p.cR * dn * t;
          g[3] = p.cR * dn * t * t;
        }
        return v;
      };
      m.target = [](const ArtifactFeatures& f) { return f.R; };
      break;
    case ModelKind::kCount:
      m.fields = {&ArtifactModelParams::c0, &ArtifactModelParams::beta, &ArtifactModelParams::gamma,
                  &ArtifactModelParams::mu, &ArtifactModelParams::sigma};
      m.names = {"c0", "beta", "gamma", "mu", "sigma"};
      m.value = [](const MirrorState& s, const ArtifactModelParams& p, double* g) {
        const double ct = std::cos(s.theta_rad());
        const double dd = s.d - p.mu;
        const double v = p.c0 * std::pow(s.area, p.beta) * std::pow(ct, p.gamma) *
                         std::exp(-dd * dd / (2.0 * p.sigma * p.sigma));
        if (g) {
          g[0] = v / p.c0;
          g[1] = v * std::log(s.area);
          g[2] = v * std::log(ct);
          g[3] = v * dd / (p.sigma * p.sigma);
          g[4] = v * dd * dd / (p.sigma * p.sigma * p.sigma);
        }
        return v;
      };
      m.target = [](const ArtifactFeatures& f) { return f.N; };
      break;
    case ModelKind::kWindow:
      m.fields = {&ArtifactModelParams::b0_min, &ArtifactModelParams::b1, &ArtifactModelParams::b2,
                  &ArtifactModelParams::b0_max, &ArtifactModelParams::c1, &ArtifactModelParams::c2};
      m.names = {"b0_min", "b1", "b2", "b0_max", "c1", "c2"};
      m.value = [](const MirrorState& s, const ArtifactModelParams& p, double* g) {
        const auto w = appearance_window(s.theta, s.area, p);
        const double rise = sigmoid(p.k * (s.d - w.d_min));
        const double fall = sigmoid(-p.k * (s.d - w.d_max));
        if (g) {
          const double dmin = -p.k * rise * (1.0 - rise) * fall;
          const double dmax = p.k * fall * (1.0 - fall) * rise;
          g[0] = dmin;
          g[1] = dmin * s.theta;
          g[2] = dmin * s.area;
          g[3] = dmax;
          g[4] = dmax * s.theta;
          g[5] = dmax * s.area;
        }
        return rise * fall;
      };
      m.target = [](const ArtifactFeatures& f) { return f.P_app; };
      break;
  }
  return m;
}

inline double evaluate_model(ModelKind kind, const MirrorState& s, const ArtifactModelParams& p) {
  return model_spec(kind).value(s, p, nullptr);
}

// ---- goodness of fit --------------------------------------------------------

struct FitStats {
  std::optional<double> r_squared;  // undefined when the targets have no variance
  double rmse = 0.0;
  std::size_t n = 0;
};

inline FitStats fit_stats(ModelKind kind, const std::vector<FeatureSample>& samples, const ArtifactModelParams& p) {
  const ModelSpec m = model_spec(kind);
  FitStats st;
  st.n = samples.size();
  if (samples.empty()) return st;
  double mean = 0.0;
  for (const auto& s : samples) mean += m.target(s.features);
  mean /= static_cast<double>(samples.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& s : samples) {
    const double y = m.target(s.features);
    const double e = m.value(s.state, p, nullptr) - y;
    ss_res += e * e;
    ss_tot += (y - mean) * (y - mean);
  }
  st.rmse = std::sqrt(ss_res / static_cast<double>(samples.size()));
  if (ss_tot > 0.0) st.r_squared = 1.0 - ss_res / ss_tot;
  return st;
}

struct GroupStats {
  double theta = 0.0;
  double area = 0.0;
  FitStats stats;
};

// Goodness of fit per (theta, area) configuration.
inline std::vector<GroupStats> fit_stats_by_configuration(ModelKind kind, const std::vector<FeatureSample>& samples,
                                                          const ArtifactModelParams& p) {
  std::map<std::pair<double, double>, std::vector<FeatureSample>> groups;
  for (const auto& s : samples) groups[{s.state.theta, s.state.area}].push_back(s);
  std::vector<GroupStats> out;
  for (const auto& [key, group] : groups) out.push_back({key.first, key.second, fit_stats(kind, group, p)});
  return out;
}

// ---- initial guesses ----------------------------------------------------------

namespace detail {

// Least squares for y ~ X b; nullopt when X is rank deficient.
inline std::optional<Eigen::VectorXd> ordinary_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols()) return std::nullopt;
  return Eigen::VectorXd(qr.solve(y));
}

inline void guess_offset(const std::vector<FeatureSample>& s, ArtifactModelParams& p) {
  Eigen::MatrixXd X(s.size(), 2);
  Eigen::VectorXd y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    X(i, 0) = s[i].state.d * std::tan(2.0 * s[i].state.theta_rad());
    X(i, 1) = 1.0;
    y(i) = s[i].features.X;
  }
  if (auto b = ordinary_least_squares(X, y)) {
    p.cX = (*b)(0);
    p.deltaX = (*b)(1);
  }
}

// log R ~ log cR + n_d log d + a1 t + a2 t^2  (log(1 + f) ~ f)
inline void guess_radial(const std::vector<FeatureSample>& s, ArtifactModelParams& p) {
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].features.R > 0.0) use.push_back(i);
  Eigen::MatrixXd X(use.size(), 4);
  Eigen::VectorXd y(use.size());
  for (std::size_t r = 0; r < use.size(); ++r) {
    const auto& st = s[use[r]].state;
    const double t = st.theta_rad();
    X.row(r) << 1.0, std::log(st.d), t, t * t;
    y(r) = std::log(s[use[r]].features.R);
  }
  if (auto b = ordinary_least_squares(X, y)) {
    p.cR = std::exp((*b)(0));
    p.n_d = std::clamp((*b)(1), 0.05, 1.0);
    p.a1 = (*b)(2);
    p.a2 = (*b)(3);
  }
}

// log N ~ log c0 + beta log A + gamma log cos(t) - (d - mu)^2 / (2 sigma^2)
inline void guess_count(const std::vector<FeatureSample>& s, ArtifactModelParams& p) {
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].features.N > 0.0) use.push_back(i);
  if (use.empty()) return;
  // Spread heuristics: mu at the peak count, sigma a quarter of the span.
  double dlo = s[use[0]].state.d, dhi = dlo, best_n = -1.0;
  for (auto i : use) {
    dlo = std::min(dlo, s[i].state.d);
    dhi = std::max(dhi, s[i].state.d);
    if (s[i].features.N > best_n) {
      best_n = s[i].features.N;
      p.mu = s[i].state.d;
    }
  }
  p.sigma = std::max(0.25 * (dhi - dlo), 1e-3);

  Eigen::MatrixXd X(use.size(), 5);
  Eigen::VectorXd y(use.size());
  for (std::size_t r = 0; r < use.size(); ++r) {
    const auto& st = s[use[r]].state;
    X.row(r) << 1.0, std::log(st.area), std::log(std::cos(st.theta_rad())), st.d, st.d * st.d;
    y(r) = std::log(s[use[r]].features.N);
  }
  const auto b = ordinary_least_squares(X, y);
  if (!b) return;
  p.beta = (*b)(1);
  p.gamma = (*b)(2);
  const double quad = (*b)(4);
  if (quad < 0.0) {
    const double s2 = -0.5 / quad;
    p.sigma = std::sqrt(s2);
    p.mu = (*b)(3) * s2;
    p.c0 = std::exp((*b)(0) + p.mu * p.mu / (2.0 * s2));
  } else {
    p.c0 = std::exp((*b)(0)) * std::exp((p.mu * p.mu) / (2.0 * p.sigma * p.sigma));
  }
}

// Per-configuration 0.5 crossings give d_min and d_max; their linear fits on
// (theta, A) seed the window coefficients.
inline void guess_window(const std::vector<FeatureSample>& s, ArtifactModelParams& p) {
  std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> groups;
  for (const auto& x : s) groups[{x.state.theta, x.state.area}].push_back({x.state.d, x.features.P_app});
  std::vector<std::array<double, 3>> lo, hi;  // theta, area, boundary
  for (auto& [key, pts] : groups) {
    std::sort(pts.begin(), pts.end());
    std::optional<double> rise, fall;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const auto [d0, p0] = pts[i - 1];
      const auto [d1, p1] = pts[i];
      if (!rise && p0 < 0.5 && p1 >= 0.5) rise = d0 + (0.5 - p0) * (d1 - d0) / (p1 - p0);
      if (p0 >= 0.5 && p1 < 0.5) fall = d0 + (p0 - 0.5) * (d1 - d0) / (p0 - p1);
    }
    if (rise) lo.push_back({key.first, key.second, *rise});
    if (fall) hi.push_back({key.first, key.second, *fall});
  }
  auto fit_line = [](const std::vector<std::array<double, 3>>& rows) -> std::optional<Eigen::VectorXd> {
    if (rows.size() < 3) return std::nullopt;
    Eigen::MatrixXd X(rows.size(), 3);
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      X.row(i) << 1.0, rows[i][0], rows[i][1];
      y(i) = rows[i][2];
    }
    return ordinary_least_squares(X, y);
  };
  if (auto b = fit_line(lo)) {
    p.b0_min = (*b)(0);
    p.b1 = (*b)(1);
    p.b2 = (*b)(2);
  }
  if (auto b = fit_line(hi)) {
    p.b0_max = (*b)(0);
    p.c1 = (*b)(1);
    p.c2 = (*b)(2);
  }
}

}  // namespace detail

inline ArtifactModelParams initial_guess(ModelKind kind, const std::vector<FeatureSample>& samples,
                                         ArtifactModelParams base = {}) {
  switch (kind) {
    case ModelKind::kOffset: detail::guess_offset(samples, base); break;
    case ModelKind::kRadial: detail::guess_radial(samples, base); break;
    case ModelKind::kCount: detail::guess_count(samples, base); break;
    case ModelKind::kWindow: detail::guess_window(samples, base); break;
  }
  return base;
}

// ---- fitting -----------------------------------------------------------------

struct FitResult {
  ModelKind model = ModelKind::kOffset;
  ArtifactModelParams params;           // full set; only the model's fields were fitted
  std::vector<std::string> fitted;      // names of the fitted fields
  std::optional<double> r_squared;      // undefined when targets have zero variance
  double rmse = 0.0;
  std::size_t samples = 0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

// `initial` seeds the fit when given; otherwise OLS heuristics are used,
// starting from `base` for any field they cannot determine.
inline FitResult fit_models(const std::vector<FeatureSample>& samples, ModelKind kind,
                            const std::optional<ArtifactModelParams>& initial = std::nullopt,
                            const ArtifactModelParams& base = {}, const LmOptions& options = {}) {
  const ModelSpec spec = model_spec(kind);
  const std::size_t n_params = spec.fields.size();
  FitResult result;
  result.model = kind;
  result.fitted = spec.names;
  result.samples = samples.size();
  result.params = initial ? *initial : base;
  if (samples.size() < 2 * n_params) {
    result.diagnostic = "under-determined: " + std::to_string(samples.size()) + " samples for " +
                        std::to_string(n_params) + " parameters (need at least " +
                        std::to_string(2 * n_params) + ")";
    return result;
  }
  for (const auto& s : samples) s.state.validate();
  if (!initial) result.params = initial_guess(kind, samples, base);

  ArtifactModelParams work = result.params;
  Eigen::VectorXd x0(n_params);
  for (std::size_t j = 0; j < n_params; ++j) x0(j) = work.*(spec.fields[j]);

  const ResidualFn eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    for (std::size_t j = 0; j < n_params; ++j) work.*(spec.fields[j]) = x(j);
    r.resize(samples.size());
    J.resize(samples.size(), n_params);
    std::vector<double> g(n_params);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      r(i) = spec.value(samples[i].state, work, g.data()) - spec.target(samples[i].features);
      for (std::size_t j = 0; j < n_params; ++j) J(i, j) = g[j];
    }
  };
  const LmOutcome lm = levenberg_marquardt(x0, eval, options);
  for (std::size_t j = 0; j < n_params; ++j) result.params.*(spec.fields[j]) = lm.x(j);
  result.iterations = lm.iterations;
  result.converged = lm.converged;
  result.diagnostic = lm.diagnostic;
  const FitStats st = fit_stats(kind, samples, result.params);
  result.r_squared = st.r_squared;
  result.rmse = st.rmse;
  return result;
}

}  // namespace mirrorspoof
