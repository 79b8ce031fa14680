#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genplan/arc_primitives.hpp"
#include "genplan/io.hpp"
#include "genplan/rng.hpp"

namespace genplan {

inline constexpr int kFlowDim = 4;
using Vec4 = std::array<double, kFlowDim>;

inline Vec4 to_vec(const PrimitiveParams& p) { return p.to_array(); }
inline PrimitiveParams to_params(const Vec4& v) { return PrimitiveParams::from_array(v); }

enum class TransformKind : std::uint8_t { kAffine = 0 };

struct FlowArchitecture {
  int n_layers = 4;  // two layers of two coupling blocks
  int hidden = 16;   // conditioner hidden units

  friend bool operator==(const FlowArchitecture&, const FlowArchitecture&) = default;
};

// Log-scales are squashed into [-kScaleBound, kScaleBound].
inline constexpr double kScaleBound = 5.0;
inline constexpr int kMaxHidden = 256;

// Affine-coupling normalizing flow on R^4 mapping prior samples z to
// primitive parameters theta:
//
//   u  = c_L o ... o c_1 (z)       coupling blocks
//   theta = shift + scale * u      fixed whitening inverse
//
// Block l keeps two coordinates (its conditioning pair) and maps the other
// two as y = x * exp(s) + t, where (s, t) come from a one-hidden-layer tanh
// network of the conditioning pair and s = 5 tanh(raw / 5). Conditioning
// pairs cycle through {0,1}, {2,3}, {0,2}, {1,3}.
//
// All trainable weights live in one flat parameter vector; per block the
// layout is W1 (hidden x 2, row-major), b1 (hidden), W2 (4 x hidden), b2 (4)
// with W2/b2 rows ordered (s_a, s_b, t_a, t_b).
class FlowModel {
 public:
  struct Mapped {
    Vec4 value{};
    double logdet = 0.0;
  };

  explicit FlowModel(FlowArchitecture arch = {});

  // Conditioner input weights drawn from a scaled Gaussian, output weights
  // zeroed so every block starts as the identity.
  void init_weights(Rng& rng);

  const FlowArchitecture& arch() const { return arch_; }
  int n_layers() const { return arch_.n_layers; }
  std::size_t params_per_layer() const { return 7 * static_cast<std::size_t>(arch_.hidden) + 4; }
  std::size_t n_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  const Vec4& shift() const { return shift_; }
  const Vec4& scale() const { return scale_; }
  void set_whitening(const Vec4& shift, const Vec4& scale);

  static std::array<int, 2> conditioning_pair(int layer);
  static std::array<int, 2> transformed_pair(int layer);

  // theta = f(z) and log|det df/dz|.
  Mapped forward(const Vec4& z) const;
  // z = f^-1(theta) and log|det df^-1/dtheta|.
  Mapped inverse(const Vec4& theta) const;
  double log_prob(const Vec4& theta) const;

  // Batched push-forward; `logdet` may be empty.
  void forward_batch(std::span<const Vec4> z, std::span<Vec4> theta, std::span<double> logdet = {}) const;

  // n iid prior draws pushed through forward.
  std::vector<Vec4> sample(std::size_t n, Rng& rng) const;

  // Mean negative log-likelihood of `batch`; when `grad` is non-empty it
  // receives d(mean NLL)/d(params) (overwritten, size n_params()).
  double nll(std::span<const Vec4> batch, std::span<double> grad = {}) const;

  // SHA-256 over architecture, whitening and weights. Identifies the model
  // a mask cache was built against.
  Digest checksum() const;

  friend bool operator==(const FlowModel&, const FlowModel&) = default;

 private:
  FlowArchitecture arch_;
  Vec4 shift_{0.0, 0.0, 0.0, 0.0};
  Vec4 scale_{1.0, 1.0, 1.0, 1.0};
  std::vector<double> params_;
};

double standard_normal_log_density(const Vec4& z);

// Model file (little-endian):
//   "GPNF" | u16 format version | u16 dim | u16 layer count | u16 hidden
//   | per layer: u8 transform kind, u8 conditioning mask (bit i = coord i)
//   | 32-byte config hash | u16 x3 tool version
//   | f64 shift[dim] | f64 scale[dim] | u64 n_params | f64 params[n_params]
inline constexpr std::uint16_t kFlowFormatVersion = 1;

std::vector<std::uint8_t> serialize_flow(const FlowModel& model, const Digest& config_hash = {});
FlowModel deserialize_flow(std::span<const std::uint8_t> bytes, Digest* config_hash = nullptr);
void save_flow(const FlowModel& model, const std::string& path, const Digest& config_hash = {});
FlowModel load_flow(const std::string& path, Digest* config_hash = nullptr);

}  // namespace genplan
