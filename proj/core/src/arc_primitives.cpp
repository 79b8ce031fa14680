#include "genplan/arc_primitives.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "genplan/errors.hpp"

namespace genplan {
namespace {

// Advances `pose` by arc length `len` along a circle of curvature `kappa`.
Pose2 advance_arc(const Pose2& pose, double kappa, double len) {
  Pose2 out = pose;
  if (std::abs(kappa) < kStraightCurvature) {
    out.x += len * std::cos(pose.heading);
    out.y += len * std::sin(pose.heading);
  } else {
    const double h1 = pose.heading + kappa * len;
    out.x += (std::sin(h1) - std::sin(pose.heading)) / kappa;
    out.y += (std::cos(pose.heading) - std::cos(h1)) / kappa;
    out.heading = h1;
  }
  return out;
}

bool all_finite(const PrimitiveParams& t) {
  return std::isfinite(t.alpha) && std::isfinite(t.kappa1) && std::isfinite(t.kappa2) &&
         std::isfinite(t.kappa3);
}

// Path rigidly moved so that its first pose is (0, 0, 0) and time starts at 0.
PosePath normalize_start(const PosePath& path) {
  const PoseSample& s0 = path.front();
  const Pose2 origin{s0.x, s0.y, s0.heading};
  PosePath out;
  out.samples.reserve(path.size());
  for (const auto& s : path.samples) {
    const Point2 p = to_body(origin, s.x, s.y);
    out.samples.push_back({s.t - s0.t, p.x, p.y, wrap_angle(s.heading - s0.heading)});
  }
  out.samples.front().x = 0.0;
  out.samples.front().y = 0.0;
  out.samples.front().heading = 0.0;
  return out;
}

// Tangent direction of the polyline around sample i by finite differences.
double chord_heading(const PosePath& p, std::size_t i) {
  const std::size_t lo = i == 0 ? 0 : i - 1;
  const std::size_t hi = std::min(i + 1, p.size() - 1);
  return std::atan2(p.samples[hi].y - p.samples[lo].y, p.samples[hi].x - p.samples[lo].x);
}

std::size_t index_at_fraction(const PosePath& p, double frac) {
  const double target = p.front().t + frac * p.duration();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::abs(p.samples[i].t - target);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PrimitiveParams clamp_params(PrimitiveParams t, double kappa_max) {
  t.alpha = std::max(t.alpha, 1e-6);
  t.kappa1 = std::clamp(t.kappa1, -kappa_max, kappa_max);
  t.kappa2 = std::clamp(t.kappa2, -kappa_max, kappa_max);
  t.kappa3 = std::clamp(t.kappa3, -kappa_max, kappa_max);
  return t;
}

Eigen::VectorXd residuals(const PrimitiveParams& theta, const PosePath& path) {
  Eigen::VectorXd r(2 * path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double s = theta.alpha * path.samples[k].t / kPrimitiveDuration;
    const Pose2 p = pose_at_arclength(theta, s);
    r(2 * k) = p.x - path.samples[k].x;
    r(2 * k + 1) = p.y - path.samples[k].y;
  }
  return r;
}

}  // namespace

void validate(const PrimitiveParams& theta) {
  if (!all_finite(theta)) throw ParameterError("primitive parameters must be finite");
  if (!(theta.alpha > 0.0)) throw ParameterError("primitive arc length alpha must be positive");
}

double PosePath::polyline_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    len += std::hypot(samples[i].x - samples[i - 1].x, samples[i].y - samples[i - 1].y);
  }
  return len;
}

Pose2 pose_at_arclength(const PrimitiveParams& theta, double s) {
  s = std::clamp(s, 0.0, theta.alpha);
  const double arc_len = theta.alpha / 3.0;
  Pose2 pose;
  for (int arc = 0; arc < 3; ++arc) {
    const double remaining = s - arc * arc_len;
    if (remaining <= 0.0) break;
    pose = advance_arc(pose, theta.kappa(arc), arc == 2 ? remaining : std::min(remaining, arc_len));
  }
  return pose;
}

PosePath reconstruct(const PrimitiveParams& theta, std::size_t n_samples) {
  validate(theta);
  if (n_samples < 2) throw ParameterError("reconstruct needs at least 2 samples");
  PosePath path;
  path.samples.reserve(n_samples);
  const double denom = static_cast<double>(n_samples - 1);
  const double arc_len = theta.alpha / 3.0;
  // Walk arcs incrementally from each arc's start pose so long paths avoid
  // recomputing the earlier arcs for every sample.
  Pose2 arc_start;
  int arc = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double frac = static_cast<double>(k) / denom;
    const double s = theta.alpha * frac;
    while (arc < 2 && s > (arc + 1) * arc_len) {
      arc_start = advance_arc(arc_start, theta.kappa(arc), arc_len);
      ++arc;
    }
    const Pose2 p = advance_arc(arc_start, theta.kappa(arc), s - arc * arc_len);
    path.samples.push_back({kPrimitiveDuration * frac, p.x, p.y, p.heading});
  }
  return path;
}

PosePath transform_to_world(const PosePath& body_path, const Pose2& origin) {
  PosePath out;
  out.samples.reserve(body_path.size());
  const double c = std::cos(origin.heading);
  const double s = std::sin(origin.heading);
  for (const auto& p : body_path.samples) {
    out.samples.push_back({p.t, origin.x + c * p.x - s * p.y, origin.y + s * p.x + c * p.y,
                           origin.heading + p.heading});
  }
  return out;
}

double fit_cost(const PrimitiveParams& theta, const PosePath& normalized_path) {
  return residuals(theta, normalized_path).squaredNorm();
}

FitResult fit_params(const PosePath& raw, const FitOptions& options) {
  if (raw.size() < 8) throw FitError("fit_params needs at least 8 samples");
  const double net = std::hypot(raw.back().x - raw.front().x, raw.back().y - raw.front().y);
  const double length = raw.polyline_length();
  if (!(net > 0.01) || !(length > 0.01) || !(raw.duration() > 0.0)) {
    throw FitError("fit_params: degenerate path (net displacement below 1 cm)");
  }
  const PosePath path = normalize_start(raw);

  PrimitiveParams theta;
  theta.alpha = length * kPrimitiveDuration / path.duration();
  std::array<double, 4> h{};
  for (int i = 0; i < 4; ++i) h[i] = chord_heading(path, index_at_fraction(path, i / 3.0));
  h[0] = 0.0;
  const double third = theta.alpha / 3.0;
  theta.kappa1 = wrap_angle(h[1] - h[0]) / third;
  theta.kappa2 = wrap_angle(h[2] - h[1]) / third;
  theta.kappa3 = wrap_angle(h[3] - h[2]) / third;
  theta = clamp_params(theta, options.kappa_max);

  FitResult result;
  Eigen::VectorXd r = residuals(theta, path);
  double cost = r.squaredNorm();
  const double eps = options.jacobian_step;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    Eigen::MatrixXd jac(r.size(), 4);
    const auto base = theta.to_array();
    for (int j = 0; j < 4; ++j) {
      auto plus = base;
      auto minus = base;
      plus[j] += eps;
      minus[j] -= eps;
      jac.col(j) = (residuals(PrimitiveParams::from_array(plus), path) -
                    residuals(PrimitiveParams::from_array(minus), path)) /
                   (2.0 * eps);
    }
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * r;
    Eigen::Vector4d delta = jtj.ldlt().solve(-jtr);
    if (!delta.allFinite()) delta = jtj.completeOrthogonalDecomposition().solve(-jtr);

    // Step halving keeps every accepted iterate a strict improvement.
    double step = 1.0;
    bool improved = false;
    PrimitiveParams candidate = theta;
    Eigen::VectorXd cand_r;
    double cand_cost = cost;
    for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
      auto next = base;
      for (int j = 0; j < 4; ++j) next[j] += step * delta(j);
      candidate = clamp_params(PrimitiveParams::from_array(next), options.kappa_max);
      cand_r = residuals(candidate, path);
      cand_cost = cand_r.squaredNorm();
      if (cand_cost < cost) {
        improved = true;
        break;
      }
    }
    if (!improved) {
      result.converged = true;
      break;
    }
    const double decrease = cost - cand_cost;
    theta = candidate;
    r = std::move(cand_r);
    cost = cand_cost;
    if (decrease < options.cost_tolerance) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.params = theta;
  result.iterations = iter;
  result.cost = cost;
  result.residual_rms = std::sqrt(cost / static_cast<double>(path.size()));
  return result;
}

std::vector<PosePath> slice_log(const PosePath& log, double window, double stride) {
  if (!(window > 0.0)) throw ParameterError("slice window must be positive");
  if (stride <= 0.0) stride = window;
  std::vector<PosePath> slices;
  if (log.size() < 2) return slices;
  const double t0 = log.front().t;
  const double t_end = log.back().t;
  constexpr double kTimeEps = 1e-9;
  for (std::size_t k = 0;; ++k) {
    const double start = t0 + static_cast<double>(k) * stride;
    const double stop = start + window;
    if (stop > t_end + kTimeEps) break;
    PosePath slice;
    for (const auto& s : log.samples) {
      if (s.t + kTimeEps >= start && s.t <= stop + kTimeEps) slice.samples.push_back(s);
    }
    if (slice.size() < 2) continue;
    const PoseSample first = slice.front();
    const Pose2 origin{first.x, first.y, first.heading};
    for (auto& s : slice.samples) {
      const Point2 p = to_body(origin, s.x, s.y);
      s = {s.t - first.t, p.x, p.y, wrap_angle(s.heading - first.heading)};
    }
    slice.samples.front() = {0.0, 0.0, 0.0, 0.0};
    slices.push_back(std::move(slice));
  }
  return slices;
}

void write_primitives_csv(std::ostream& out, const std::vector<PrimitiveParams>& data,
                          const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "alpha,kappa1,kappa2,kappa3\n";
  char buf[128];
  for (const auto& p : data) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", p.alpha, p.kappa1, p.kappa2,
                  p.kappa3);
    out << buf;
  }
}

std::vector<PrimitiveParams> read_primitives_csv(std::istream& in) {
  std::vector<PrimitiveParams> data;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "alpha,kappa1,kappa2,kappa3") {
        throw FormatError("primitive CSV: expected header 'alpha,kappa1,kappa2,kappa3'");
      }
      header_seen = true;
      continue;
    }
    std::array<double, 4> v{};
    std::istringstream ss(line);
    std::string field;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      if (col >= 4) throw FormatError("primitive CSV: too many columns on line " + std::to_string(line_no));
      try {
        std::size_t used = 0;
        v[col] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError("primitive CSV: bad number on line " + std::to_string(line_no));
      }
      ++col;
    }
    if (col != 4) throw FormatError("primitive CSV: expected 4 columns on line " + std::to_string(line_no));
    data.push_back(PrimitiveParams::from_array(v));
  }
  if (!header_seen) throw FormatError("primitive CSV: missing header");
  return data;
}

}  // namespace genplan
