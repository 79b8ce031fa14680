#include "genplan/flow_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "genplan/errors.hpp"
#include "genplan/version.hpp"

namespace genplan {
namespace {

constexpr std::array<std::array<int, 2>, 4> kCondPairs{{{0, 1}, {2, 3}, {0, 2}, {1, 3}}};
constexpr std::array<std::array<int, 2>, 4> kTransPairs{{{2, 3}, {0, 1}, {1, 3}, {0, 2}}};

// Read-only view of one coupling block's weights.
struct LayerView {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
  int hidden;
};

LayerView layer_view(const double* p, int hidden) {
  const std::size_t h = static_cast<std::size_t>(hidden);
  return {p, p + 2 * h, p + 3 * h, p + 7 * h, hidden};
}

// Conditioner: out = W2 tanh(W1 in + b1) + b2. `hid` receives tanh values.
inline void conditioner(const LayerView& L, double in0, double in1, double* hid, double out[4]) {
  for (int k = 0; k < 4; ++k) out[k] = L.b2[k];
  for (int j = 0; j < L.hidden; ++j) {
    const double h = std::tanh(L.w1[2 * j] * in0 + L.w1[2 * j + 1] * in1 + L.b1[j]);
    hid[j] = h;
    for (int k = 0; k < 4; ++k) out[k] += L.w2[k * L.hidden + j] * h;
  }
}

inline double squash(double raw) { return kScaleBound * std::tanh(raw / kScaleBound); }

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

}  // namespace

FlowModel::FlowModel(FlowArchitecture arch) : arch_(arch) {
  if (arch_.n_layers < 1 || arch_.hidden < 1 || arch_.hidden > kMaxHidden || arch_.n_layers > 64) {
    throw ParameterError("flow architecture needs 1..64 layers and 1..256 hidden units");
  }
  params_.assign(params_per_layer() * static_cast<std::size_t>(arch_.n_layers), 0.0);
}

void FlowModel::init_weights(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  const double std_in = 1.0;  // inputs are whitened, fan-in 2
  for (int l = 0; l < arch_.n_layers; ++l) {
    double* p = params_.data() + params_per_layer() * static_cast<std::size_t>(l);
    for (int i = 0; i < 2 * arch_.hidden; ++i) p[i] = std_in * standard_normal(rng) / std::sqrt(2.0);
  }
}

void FlowModel::set_whitening(const Vec4& shift, const Vec4& scale) {
  for (int i = 0; i < kFlowDim; ++i) {
    if (!std::isfinite(shift[i]) || !(scale[i] > 0.0) || !std::isfinite(scale[i])) {
      throw ParameterError("whitening scale must be positive and finite");
    }
  }
  shift_ = shift;
  scale_ = scale;
}

std::array<int, 2> FlowModel::conditioning_pair(int layer) { return kCondPairs[layer % 4]; }
std::array<int, 2> FlowModel::transformed_pair(int layer) { return kTransPairs[layer % 4]; }

FlowModel::Mapped FlowModel::forward(const Vec4& z) const {
  Mapped m;
  m.value = z;
  std::array<double, kMaxHidden> hid;
  for (int l = 0; l < arch_.n_layers; ++l) {
    const LayerView L = layer_view(params_.data() + params_per_layer() * l, arch_.hidden);
    const auto c = conditioning_pair(l);
    const auto t = transformed_pair(l);
    double out[4];
    conditioner(L, m.value[c[0]], m.value[c[1]], hid.data(), out);
    for (int k = 0; k < 2; ++k) {
      const double ls = squash(out[k]);
      m.value[t[k]] = m.value[t[k]] * std::exp(ls) + out[2 + k];
      m.logdet += ls;
    }
  }
  for (int i = 0; i < kFlowDim; ++i) {
    m.value[i] = shift_[i] + scale_[i] * m.value[i];
    m.logdet += std::log(scale_[i]);
  }
  return m;
}

FlowModel::Mapped FlowModel::inverse(const Vec4& theta) const {
  Mapped m;
  for (int i = 0; i < kFlowDim; ++i) {
    m.value[i] = (theta[i] - shift_[i]) / scale_[i];
    m.logdet -= std::log(scale_[i]);
  }
  std::array<double, kMaxHidden> hid;
  for (int l = arch_.n_layers - 1; l >= 0; --l) {
    const LayerView L = layer_view(params_.data() + params_per_layer() * l, arch_.hidden);
    const auto c = conditioning_pair(l);
    const auto t = transformed_pair(l);
    double out[4];
    conditioner(L, m.value[c[0]], m.value[c[1]], hid.data(), out);
    for (int k = 0; k < 2; ++k) {
      const double ls = squash(out[k]);
      m.value[t[k]] = (m.value[t[k]] - out[2 + k]) * std::exp(-ls);
      m.logdet -= ls;
    }
  }
  return m;
}

double standard_normal_log_density(const Vec4& z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  return -0.5 * sq - 0.5 * kFlowDim * kLog2Pi;
}

double FlowModel::log_prob(const Vec4& theta) const {
  const Mapped m = inverse(theta);
  return standard_normal_log_density(m.value) + m.logdet;
}

void FlowModel::forward_batch(std::span<const Vec4> z, std::span<Vec4> theta, std::span<double> logdet) const {
  if (theta.size() != z.size() || (!logdet.empty() && logdet.size() != z.size())) {
    throw ParameterError("forward_batch: output size mismatch");
  }
  std::copy(z.begin(), z.end(), theta.begin());
  if (!logdet.empty()) std::fill(logdet.begin(), logdet.end(), 0.0);
  std::array<double, kMaxHidden> hid;
  // Layer-major loop keeps one block's weights hot across the batch.
  for (int l = 0; l < arch_.n_layers; ++l) {
    const LayerView L = layer_view(params_.data() + params_per_layer() * l, arch_.hidden);
    const auto c = conditioning_pair(l);
    const auto t = transformed_pair(l);
    for (std::size_t n = 0; n < theta.size(); ++n) {
      Vec4& v = theta[n];
      double out[4];
      conditioner(L, v[c[0]], v[c[1]], hid.data(), out);
      const double ls0 = squash(out[0]);
      const double ls1 = squash(out[1]);
      v[t[0]] = v[t[0]] * std::exp(ls0) + out[2];
      v[t[1]] = v[t[1]] * std::exp(ls1) + out[3];
      if (!logdet.empty()) logdet[n] += ls0 + ls1;
    }
  }
  double log_scale = 0.0;
  for (int i = 0; i < kFlowDim; ++i) log_scale += std::log(scale_[i]);
  for (std::size_t n = 0; n < theta.size(); ++n) {
    for (int i = 0; i < kFlowDim; ++i) theta[n][i] = shift_[i] + scale_[i] * theta[n][i];
    if (!logdet.empty()) logdet[n] += log_scale;
  }
}

std::vector<Vec4> FlowModel::sample(std::size_t n, Rng& rng) const {
  std::vector<Vec4> z(n);
  for (auto& v : z)
    for (auto& c : v) c = standard_normal(rng);
  std::vector<Vec4> out(n);
  forward_batch(z, out);
  return out;
}

double FlowModel::nll(std::span<const Vec4> batch, std::span<double> grad) const {
  if (batch.empty()) throw ParameterError("nll: empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != params_.size()) throw ParameterError("nll: gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const int L = arch_.n_layers;
  const int H = arch_.hidden;
  const std::size_t ppl = params_per_layer();

  double log_scale = 0.0;
  for (int i = 0; i < kFlowDim; ++i) log_scale += std::log(scale_[i]);

  // Per-layer activations of the inverse pass, indexed by layer.
  std::vector<Vec4> inputs(static_cast<std::size_t>(L));
  std::vector<double> hidden(static_cast<std::size_t>(L * H));
  std::vector<std::array<double, 4>> outs(static_cast<std::size_t>(L));
  std::vector<Vec4> outputs(static_cast<std::size_t>(L));
  std::vector<double> dh(static_cast<std::size_t>(H));

  double total = 0.0;
  for (const Vec4& theta : batch) {
    Vec4 x;
    for (int i = 0; i < kFlowDim; ++i) x[i] = (theta[i] - shift_[i]) / scale_[i];
    double sum_ls = 0.0;
    for (int l = L - 1; l >= 0; --l) {
      const LayerView V = layer_view(params_.data() + ppl * l, H);
      const auto c = conditioning_pair(l);
      const auto t = transformed_pair(l);
      inputs[l] = x;
      auto& o = outs[l];
      conditioner(V, x[c[0]], x[c[1]], hidden.data() + static_cast<std::size_t>(l) * H, o.data());
      for (int k = 0; k < 2; ++k) {
        const double ls = squash(o[k]);
        x[t[k]] = (x[t[k]] - o[2 + k]) * std::exp(-ls);
        sum_ls += ls;
      }
      outputs[l] = x;
    }
    double sq = 0.0;
    for (double v : x) sq += v * v;
    total += 0.5 * sq + 0.5 * kFlowDim * kLog2Pi + sum_ls + log_scale;

    if (!want_grad) continue;
    Vec4 g = x;  // dL/dz
    for (int l = 0; l < L; ++l) {
      const LayerView V = layer_view(params_.data() + ppl * l, H);
      double* gp = grad.data() + ppl * l;
      double* gw1 = gp;
      double* gb1 = gp + 2 * H;
      double* gw2 = gp + 3 * H;
      double* gb2 = gp + 7 * H;
      const auto c = conditioning_pair(l);
      const auto t = transformed_pair(l);
      const Vec4& y = inputs[l];
      const Vec4& xo = outputs[l];
      const auto& o = outs[l];
      const double* h = hidden.data() + static_cast<std::size_t>(l) * H;

      double d_out[4];
      Vec4 gy = g;
      for (int k = 0; k < 2; ++k) {
        const double th = std::tanh(o[k] / kScaleBound);
        const double ls = kScaleBound * th;
        const double e = std::exp(-ls);
        const double d_ls = -g[t[k]] * xo[t[k]] + 1.0;
        d_out[k] = d_ls * (1.0 - th * th);
        d_out[2 + k] = -g[t[k]] * e;
        gy[t[k]] = g[t[k]] * e;
      }
      for (int k = 0; k < 4; ++k) gb2[k] += d_out[k];
      for (int j = 0; j < H; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          gw2[k * H + j] += d_out[k] * h[j];
          acc += V.w2[k * H + j] * d_out[k];
        }
        dh[j] = acc * (1.0 - h[j] * h[j]);
      }
      double gc0 = 0.0;
      double gc1 = 0.0;
      for (int j = 0; j < H; ++j) {
        gw1[2 * j] += dh[j] * y[c[0]];
        gw1[2 * j + 1] += dh[j] * y[c[1]];
        gb1[j] += dh[j];
        gc0 += V.w1[2 * j] * dh[j];
        gc1 += V.w1[2 * j + 1] * dh[j];
      }
      gy[c[0]] += gc0;
      gy[c[1]] += gc1;
      g = gy;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (want_grad)
    for (auto& v : grad) v *= inv_n;
  return total * inv_n;
}

namespace {

void write_body(ByteWriter& w, const FlowModel& model) {
  for (double v : model.shift()) w.f64(v);
  for (double v : model.scale()) w.f64(v);
  w.u64(model.n_params());
  for (double v : model.params()) w.f64(v);
}

void write_arch(ByteWriter& w, const FlowModel& model) {
  w.u16(static_cast<std::uint16_t>(kFlowDim));
  w.u16(static_cast<std::uint16_t>(model.n_layers()));
  w.u16(static_cast<std::uint16_t>(model.arch().hidden));
  for (int l = 0; l < model.n_layers(); ++l) {
    w.u8(static_cast<std::uint8_t>(TransformKind::kAffine));
    const auto c = FlowModel::conditioning_pair(l);
    w.u8(static_cast<std::uint8_t>((1u << c[0]) | (1u << c[1])));
  }
}

}  // namespace

Digest FlowModel::checksum() const {
  ByteWriter w;
  w.text("GPNF-checksum");
  write_arch(w, *this);
  write_body(w, *this);
  return sha256(w.data());
}

std::vector<std::uint8_t> serialize_flow(const FlowModel& model, const Digest& config_hash) {
  ByteWriter w;
  w.text("GPNF");
  w.u16(kFlowFormatVersion);
  write_arch(w, model);
  w.bytes(config_hash);
  w.u16(kToolVersionMajor);
  w.u16(kToolVersionMinor);
  w.u16(kToolVersionPatch);
  write_body(w, model);
  return std::move(w.data());
}

FlowModel deserialize_flow(std::span<const std::uint8_t> bytes, Digest* config_hash) {
  ByteReader r(bytes, "flow model");
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "GPNF")) throw FormatError("flow model: bad magic bytes");
  const std::uint16_t version = r.u16();
  if (version != kFlowFormatVersion) {
    throw FormatError("flow model: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kFlowFormatVersion) + ")");
  }
  const std::uint16_t dim = r.u16();
  if (dim != kFlowDim) throw FormatError("flow model: dimension " + std::to_string(dim) + " is not 4");
  FlowArchitecture arch;
  arch.n_layers = r.u16();
  arch.hidden = r.u16();
  if (arch.n_layers < 1 || arch.n_layers > 64 || arch.hidden < 1 || arch.hidden > kMaxHidden) {
    throw FormatError("flow model: implausible architecture");
  }
  for (int l = 0; l < arch.n_layers; ++l) {
    const std::uint8_t kind = r.u8();
    if (kind != static_cast<std::uint8_t>(TransformKind::kAffine)) {
      throw FormatError("flow model: unsupported transform kind " + std::to_string(kind));
    }
    const auto c = FlowModel::conditioning_pair(l);
    if (r.u8() != ((1u << c[0]) | (1u << c[1]))) throw FormatError("flow model: unexpected coupling mask");
  }
  const auto hash = r.bytes(32);
  if (config_hash) std::copy(hash.begin(), hash.end(), config_hash->begin());
  r.u16();
  r.u16();
  r.u16();
  FlowModel model(arch);
  Vec4 shift, scale;
  for (auto& v : shift) v = r.f64();
  for (auto& v : scale) v = r.f64();
  try {
    model.set_whitening(shift, scale);
  } catch (const ParameterError& e) {
    throw FormatError(std::string("flow model: ") + e.what());
  }
  const std::uint64_t n = r.u64();
  if (n != model.n_params()) throw FormatError("flow model: parameter count does not match architecture");
  for (auto& v : model.params()) v = r.f64();
  if (r.remaining() != 0) throw FormatError("flow model: trailing bytes");
  return model;
}

void save_flow(const FlowModel& model, const std::string& path, const Digest& config_hash) {
  write_file_bytes(path, serialize_flow(model, config_hash));
}

FlowModel load_flow(const std::string& path, Digest* config_hash) {
  const auto bytes = read_file_bytes(path);
  return deserialize_flow(bytes, config_hash);
}

}  // namespace genplan
