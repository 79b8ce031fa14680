#pragma once

// Reference computations and shared fixtures for the test suites. The
// oracles (quantiles, primitive integration) use no library code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "genplan/arc_primitives.hpp"
#include "genplan/experiments.hpp"
#include "genplan/flow_model.hpp"
#include "genplan/flow_train.hpp"
#include "genplan/rng.hpp"
#include "genplan/vehicle.hpp"

namespace genplan::testing {

// Standard normal CDF from erfc; inverted by bisection to 1e-14.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile_bisect(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Midpoint-rule integration of x' = cos(h), y' = sin(h), h' = kappa(s)
// along the three arcs.
struct OraclePose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

inline OraclePose integrate_primitive(const PrimitiveParams& p, double s_end, double ds = 1e-5) {
  const double arc = p.alpha / 3.0;
  const std::array<double, 3> k{p.kappa1, p.kappa2, p.kappa3};
  OraclePose out;
  double s = 0.0;
  while (s < s_end - 1e-15) {
    const int idx = std::min(2, static_cast<int>((s + 1e-13) / arc));
    // Steps never straddle an arc boundary.
    const double boundary = idx < 2 ? (idx + 1) * arc : s_end;
    const double h = std::min({ds, s_end - s, boundary - s});
    const double kk = k[static_cast<std::size_t>(idx)];
    const double mid_heading = out.heading + 0.5 * kk * h;
    out.x += h * std::cos(mid_heading);
    out.y += h * std::sin(mid_heading);
    out.heading += kk * h;
    s += h;
  }
  return out;
}

// Feasible for the bicycle: every arc within the steering-limited
// curvature and the implied speed within the speed cap.
inline bool trackable(const PrimitiveParams& p, const VehicleLimits& lim) {
  const double k_max = std::tan(lim.psi_max) / lim.wheelbase;
  return p.alpha / kPrimitiveDuration <= lim.speed_max && std::abs(p.kappa1) <= k_max &&
         std::abs(p.kappa2) <= k_max && std::abs(p.kappa3) <= k_max;
}

// Closed-loop RK4 + PID run over one primitive from the origin at the
// primitive's own speed. Returns the RMS distance between the vehicle and
// the time-indexed reference over the 2 s, sampled every sim tick. The
// reference comes from a reconstruction with one sample per tick, so no
// interpolation is involved in the measurement.
inline double tracking_rms(const PrimitiveParams& p, const PidGains& gains, const VehicleLimits& lim,
                           double dt = 0.01) {
  const auto ticks = static_cast<std::size_t>(std::lround(kPrimitiveDuration / dt));
  const PosePath ref = reconstruct(p, ticks + 1);
  const PosePath plan = reconstruct(p, 64);
  VehicleState s{0.0, 0.0, p.alpha / kPrimitiveDuration, 0.0, 0.0};
  double sum = 0.0;
  for (std::size_t k = 1; k <= ticks; ++k) {
    const ControlInput u = pid_track(s, plan, Pose2{}, static_cast<double>(k - 1) * dt, gains, lim);
    s = step(s, u, dt, lim);
    const auto& r = ref.samples[k];
    sum += (s.x - r.x) * (s.x - r.x) + (s.y - r.y) * (s.y - r.y);
  }
  return std::sqrt(sum / static_cast<double>(ticks));
}

// Per-process temporary directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("genplan_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::vector<Vec4> to_vecs(const std::vector<PrimitiveParams>& ps) {
  std::vector<Vec4> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.to_array());
  return out;
}

// Flow trained briefly on the default synthetic expert. Shared within a
// test binary; cheap enough to rebuild per process.
inline const FlowModel& quick_flow() {
  static const FlowModel model = [] {
    Rng rng = make_rng(7, Stream::kData);
    const auto data = synth_expert(rng);
    TrainConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 7;
    return train_flow(to_vecs(data), cfg);
  }();
  return model;
}

// Randomly initialised flow with nonzero output weights, so every coupling
// is a genuine nonlinear map.
inline FlowModel random_flow(std::uint64_t seed, double out_scale = 0.3) {
  FlowModel model;
  Rng rng(seed);
  model.init_weights(rng);
  std::normal_distribution<double> n(0.0, out_scale);
  for (double& w : model.params()) {
    if (w == 0.0) w = n(rng);
  }
  model.set_whitening({3.0, 0.0, 0.1, -0.1}, {1.2, 0.3, 0.25, 0.35});
  return model;
}

inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Self-normalised importance estimate of the density's integral with a
// broad Gaussian proposal in theta space.
inline double mc_normalisation(const FlowModel& m, std::size_t n, std::uint64_t seed, double widen) {
  Rng rng(seed);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    Vec4 x{};
    double log_q = -2.0 * kLog2Pi;
    for (int i = 0; i < 4; ++i) {
      const double s = widen * m.scale()[i];
      const double e = standard_normal(rng);
      x[i] = m.shift()[i] + s * e;
      log_q -= 0.5 * e * e + std::log(s);
    }
    sum += std::exp(m.log_prob(x) - log_q);
  }
  return sum / static_cast<double>(n);
}

// Negative mean log-likelihood of `data` under a full-covariance Gaussian
// fitted to `fit`.
inline double gaussian_nll(const std::vector<Vec4>& fit, const std::vector<Vec4>& data) {
  Vec4 mu{};
  for (const auto& v : fit) {
    for (int i = 0; i < 4; ++i) mu[i] += v[i] / static_cast<double>(fit.size());
  }
  double C[4][4] = {};
  for (const auto& v : fit) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) C[i][j] += (v[i] - mu[i]) * (v[j] - mu[j]) / static_cast<double>(fit.size());
    }
  }
  // Cholesky.
  double Lc[4][4] = {};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = C[i][j];
      for (int k = 0; k < j; ++k) s -= Lc[i][k] * Lc[j][k];
      Lc[i][j] = i == j ? std::sqrt(s) : s / Lc[j][j];
    }
  }
  double logdet = 0.0;
  for (int i = 0; i < 4; ++i) logdet += 2.0 * std::log(Lc[i][i]);
  double total = 0.0;
  for (const auto& v : data) {
    double y[4];
    for (int i = 0; i < 4; ++i) {
      double s = v[i] - mu[i];
      for (int k = 0; k < i; ++k) s -= Lc[i][k] * y[k];
      y[i] = s / Lc[i][i];
    }
    double q = 0.0;
    for (double e : y) q += e * e;
    total += 0.5 * q + 0.5 * logdet + 2.0 * kLog2Pi;
  }
  return total / static_cast<double>(data.size());
}

// Three tight clusters in theta space, visited round-robin.
inline std::vector<Vec4> three_mode_data(std::size_t n, std::uint64_t seed, const std::array<Vec4, 3>& centres) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<Vec4> out;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec4& c = centres[k % 3];
    out.push_back({c[0] + 0.3 * e(rng), c[1] + 0.05 * e(rng), c[2] + 0.05 * e(rng), c[3] + 0.05 * e(rng)});
  }
  return out;
}

}  // namespace genplan::testing
