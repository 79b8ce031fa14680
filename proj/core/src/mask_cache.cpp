#include "genplan/mask_cache.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "genplan/errors.hpp"
#include "genplan/parallel.hpp"
#include "genplan/version.hpp"

namespace genplan {
namespace {

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

}  // namespace

InputGrid::InputGrid(int bins) : bins_(bins) {
  if (bins < 1 || bins > 255) throw ParameterError("input grid needs 1..255 bins per dimension");
  n_cells_ = static_cast<std::size_t>(bins) * bins * bins * bins;
  const double inf = std::numeric_limits<double>::infinity();
  edges_.assign(static_cast<std::size_t>(bins) + 1, 0.0);
  edges_.front() = -inf;
  edges_.back() = inf;
  // Lower half from the quantile function, upper half mirrored so the grid
  // is exactly symmetric about 0.
  for (int j = 1; 2 * j < bins; ++j) {
    const double e = normal_quantile(static_cast<double>(j) / bins);
    edges_[static_cast<std::size_t>(j)] = e;
    edges_[static_cast<std::size_t>(bins - j)] = -e;
  }
  centroids_.assign(static_cast<std::size_t>(bins), 0.0);
  for (int j = 0; 2 * j + 1 < bins; ++j) {
    const double c = normal_quantile((j + 0.5) / bins);
    centroids_[static_cast<std::size_t>(j)] = c;
    centroids_[static_cast<std::size_t>(bins - 1 - j)] = -c;
  }
}

int InputGrid::bin_of(double v) const {
  // Number of interior edges <= v; a value on an edge belongs to the bin on
  // its right.
  const auto first = edges_.begin() + 1;
  const auto last = edges_.end() - 1;
  return static_cast<int>(std::upper_bound(first, last, v) - first);
}

std::uint32_t InputGrid::cell_of(const Vec4& z) const {
  return flatten({bin_of(z[0]), bin_of(z[1]), bin_of(z[2]), bin_of(z[3])});
}

std::array<int, 4> InputGrid::unflatten(std::uint32_t cell) const {
  std::array<int, 4> b{};
  for (int d = 3; d >= 0; --d) {
    b[static_cast<std::size_t>(d)] = static_cast<int>(cell % static_cast<std::uint32_t>(bins_));
    cell /= static_cast<std::uint32_t>(bins_);
  }
  return b;
}

std::uint32_t InputGrid::flatten(const std::array<int, 4>& b) const {
  std::uint32_t cell = 0;
  for (int d = 0; d < 4; ++d) cell = cell * static_cast<std::uint32_t>(bins_) + static_cast<std::uint32_t>(b[d]);
  return cell;
}

Vec4 InputGrid::centroid(std::uint32_t cell) const {
  const auto b = unflatten(cell);
  return {bin_centroid(b[0]), bin_centroid(b[1]), bin_centroid(b[2]), bin_centroid(b[3])};
}

void AtomicGrid::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min) || nx < 1 || ny < 1 || !(r_atom > 0.0)) {
    throw ConfigError("atomic grid: need x_max > x_min, y_max > y_min, nx, ny >= 1 and r_atom > 0");
  }
}

std::size_t BitArray::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void BitArray::or_with(std::span<const std::uint64_t> words) {
  if (words.size() != words_.size()) throw ParameterError("BitArray::or_with: size mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= words[i];
}

PrimitiveParams to_primitive(const Vec4& theta, double kappa_max) {
  PrimitiveParams p;
  p.alpha = std::isfinite(theta[0]) ? std::max(theta[0], kMinPrimitiveAlpha) : kMinPrimitiveAlpha;
  auto k = [&](double v) { return std::isfinite(v) ? std::clamp(v, -kappa_max, kappa_max) : 0.0; };
  p.kappa1 = k(theta[1]);
  p.kappa2 = k(theta[2]);
  p.kappa3 = k(theta[3]);
  return p;
}

MaskCache::MaskCache(int bins, const AtomicGrid& agrid, const Digest& flow_checksum, const CacheBuildOptions& opts)
    : bins_(bins),
      n_cells_(static_cast<std::size_t>(bins) * bins * bins * bins),
      agrid_(agrid),
      flow_checksum_(flow_checksum),
      ds_(opts.ds),
      reconstruct_samples_(opts.reconstruct_samples),
      kappa_max_(opts.kappa_max),
      words_per_map_((n_cells_ + 63) / 64),
      bits_(agrid.size() * words_per_map_, 0) {}

std::size_t MaskCache::map_popcount(std::uint32_t atomic) const {
  std::size_t n = 0;
  for (auto w : map_words(atomic)) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void MaskCache::require_model(const FlowModel& model) const {
  if (model.checksum() != flow_checksum_) {
    throw ConfigError("mask cache was built for a different flow model (checksum " + to_hex(flow_checksum_) +
                      ", model " + to_hex(model.checksum()) + ")");
  }
}

MaskCache build_cache(const FlowModel& model, const InputGrid& igrid, const AtomicGrid& agrid,
                      const CacheBuildOptions& opts) {
  agrid.validate();
  if (!(opts.ds > 0.0) || opts.reconstruct_samples < 2) {
    throw ConfigError("cache build: ds must be positive and reconstruct_samples >= 2");
  }
  if (model.arch().n_layers < 1) throw ConfigError("cache build: model has no layers");
  MaskCache cache(igrid.bins(), agrid, model.checksum(), opts);

  const double r = agrid.r_atom;
  const double sx = agrid.spacing_x();
  const double sy = agrid.spacing_y();
  const double margin = 1e-9;
  const std::size_t n_cells = igrid.n_cells();
  const std::size_t n_chunks = (n_cells + 63) / 64;

  // One chunk = the 64 cells sharing a word in every map, so each worker owns
  // whole words and the result does not depend on scheduling.
  parallel_for(n_chunks, opts.workers, [&](std::size_t chunk) {
    std::vector<std::uint32_t> hit_maps;
    std::vector<std::uint8_t> seen(agrid.size(), 0);
    const std::size_t begin = chunk * 64;
    const std::size_t end = std::min(n_cells, begin + 64);
    for (std::size_t cell = begin; cell < end; ++cell) {
      const auto z = igrid.centroid(static_cast<std::uint32_t>(cell));
      const PrimitiveParams theta = to_primitive(model.forward(z).value, opts.kappa_max);
      const PosePath path = reconstruct(theta, opts.reconstruct_samples);
      hit_maps.clear();
      for_each_resampled_point(path, opts.ds, [&](double px, double py) {
        if (px < agrid.x_min - r - margin || px > agrid.x_max + r + margin || py < agrid.y_min - r - margin ||
            py > agrid.y_max + r + margin) {
          return false;
        }
        const int ix0 = std::max(0, static_cast<int>(std::floor((px - r - agrid.x_min) / sx - 0.5)) - 1);
        const int ix1 = std::min(agrid.nx - 1, static_cast<int>(std::ceil((px + r - agrid.x_min) / sx - 0.5)) + 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor((py - r - agrid.y_min) / sy - 0.5)) - 1);
        const int iy1 = std::min(agrid.ny - 1, static_cast<int>(std::ceil((py + r - agrid.y_min) / sy - 0.5)) + 1);
        for (int ix = ix0; ix <= ix1; ++ix) {
          for (int iy = iy0; iy <= iy1; ++iy) {
            const std::uint32_t a = agrid.index(ix, iy);
            if (seen[a]) continue;
            const Point2 g = agrid.point(a);
            if (point_in_disc(px, py, g.x, g.y, r)) {
              seen[a] = 1;
              hit_maps.push_back(a);
            }
          }
        }
        return false;
      });
      for (auto a : hit_maps) {
        cache.mutable_map_words(a)[cell >> 6] |= std::uint64_t{1} << (cell & 63);
        seen[a] = 0;
      }
    }
  });
  return cache;
}

double covering_radius(const AtomicGrid& agrid, double r_obs) {
  const double h = 0.5 * std::hypot(agrid.spacing_x(), agrid.spacing_y());
  return h + std::max(0.0, r_obs - agrid.r_atom + h);
}

std::vector<std::uint32_t> decompose(const World& world, const Pose2& vehicle, const AtomicGrid& agrid) {
  std::vector<std::uint32_t> selected;
  const double sx = agrid.spacing_x();
  const double sy = agrid.spacing_y();
  for (const auto& o : world.obstacles()) {
    const Point2 c = to_body(vehicle, o.cx, o.cy);
    const double ox = std::max({agrid.x_min - c.x, 0.0, c.x - agrid.x_max});
    const double oy = std::max({agrid.y_min - c.y, 0.0, c.y - agrid.y_max});
    if (ox * ox + oy * oy >= o.r * o.r) continue;  // open disc misses the ROI
    const double cx = std::clamp(c.x, agrid.x_min, agrid.x_max);
    const double cy = std::clamp(c.y, agrid.y_min, agrid.y_max);
    const double rc = covering_radius(agrid, o.r) * (1.0 + 1e-9);
    const int ix0 = std::max(0, static_cast<int>(std::floor((cx - rc - agrid.x_min) / sx - 0.5)));
    const int ix1 = std::min(agrid.nx - 1, static_cast<int>(std::ceil((cx + rc - agrid.x_min) / sx - 0.5)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((cy - rc - agrid.y_min) / sy - 0.5)));
    const int iy1 = std::min(agrid.ny - 1, static_cast<int>(std::ceil((cy + rc - agrid.y_min) / sy - 0.5)));
    for (int ix = ix0; ix <= ix1; ++ix) {
      for (int iy = iy0; iy <= iy1; ++iy) {
        const std::uint32_t a = agrid.index(ix, iy);
        const Point2 g = agrid.point(a);
        if (std::hypot(g.x - cx, g.y - cy) <= rc) selected.push_back(a);
      }
    }
  }
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  return selected;
}

BitArray rejected_cells(const MaskCache& cache, std::span<const std::uint32_t> atomic) {
  BitArray out(cache.n_cells());
  for (auto a : atomic) {
    if (a >= cache.atomic_grid().size()) throw ParameterError("rejected_cells: atomic index out of range");
    out.or_with(cache.map_words(a));
  }
  return out;
}

std::size_t cache_file_size(const MaskCache& cache) {
  return kCacheHeaderBytes + cache.atomic_grid().size() * ((cache.n_cells() + 7) / 8);
}

std::vector<std::uint8_t> serialize_cache(const MaskCache& cache) {
  ByteWriter w;
  const AtomicGrid& g = cache.atomic_grid();
  w.text("GPMC");
  w.u16(kCacheFormatVersion);
  w.u32(static_cast<std::uint32_t>(cache.bins()));
  w.u32(kFlowDim);
  w.u32(static_cast<std::uint32_t>(g.nx));
  w.u32(static_cast<std::uint32_t>(g.ny));
  w.f64(g.x_min);
  w.f64(g.x_max);
  w.f64(g.y_min);
  w.f64(g.y_max);
  w.f64(g.r_atom);
  w.bytes(cache.flow_checksum());
  w.f64(cache.ds());
  w.u32(static_cast<std::uint32_t>(cache.reconstruct_samples()));
  w.f64(cache.kappa_max());
  w.bytes(cache.config_hash());
  w.u16(kToolVersionMajor);
  w.u16(kToolVersionMinor);
  w.u16(kToolVersionPatch);
  const std::size_t map_bytes = (cache.n_cells() + 7) / 8;
  auto& buf = w.data();
  buf.reserve(buf.size() + g.size() * map_bytes);
  for (std::uint32_t a = 0; a < g.size(); ++a) {
    const auto words = cache.map_words(a);
    for (std::size_t b = 0; b < map_bytes; ++b) {
      buf.push_back(static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8))));
    }
  }
  return std::move(buf);
}

MaskCache deserialize_cache(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "mask cache");
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "GPMC")) throw FormatError("mask cache: bad magic bytes");
  const std::uint16_t version = r.u16();
  if (version != kCacheFormatVersion) {
    throw FormatError("mask cache: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCacheFormatVersion) + ")");
  }
  const std::uint32_t bins = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim != kFlowDim) throw FormatError("mask cache: dimension " + std::to_string(dim) + " is not 4");
  if (bins < 1 || bins > 255) throw FormatError("mask cache: implausible bin count");
  AtomicGrid g;
  g.nx = static_cast<int>(r.u32());
  g.ny = static_cast<int>(r.u32());
  g.x_min = r.f64();
  g.x_max = r.f64();
  g.y_min = r.f64();
  g.y_max = r.f64();
  g.r_atom = r.f64();
  if (g.nx < 1 || g.ny < 1 || g.nx > 100000 || g.ny > 100000) throw FormatError("mask cache: implausible grid size");
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("mask cache: ") + e.what());
  }
  Digest checksum{};
  const auto cs = r.bytes(32);
  std::copy(cs.begin(), cs.end(), checksum.begin());
  CacheBuildOptions opts;
  opts.ds = r.f64();
  opts.reconstruct_samples = r.u32();
  opts.kappa_max = r.f64();
  Digest config{};
  const auto ch = r.bytes(32);
  std::copy(ch.begin(), ch.end(), config.begin());
  r.u16();
  r.u16();
  r.u16();
  MaskCache cache(static_cast<int>(bins), g, checksum, opts);
  cache.set_config_hash(config);
  const std::size_t map_bytes = (cache.n_cells() + 7) / 8;
  if (r.remaining() != g.size() * map_bytes) {
    throw FormatError("mask cache: payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(g.size() * map_bytes) + " (truncated or corrupt file)");
  }
  for (std::uint32_t a = 0; a < g.size(); ++a) {
    const auto src = r.bytes(map_bytes);
    auto words = cache.mutable_map_words(a);
    for (std::size_t b = 0; b < map_bytes; ++b) words[b / 8] |= static_cast<std::uint64_t>(src[b]) << (8 * (b % 8));
  }
  return cache;
}

void save_cache(const MaskCache& cache, const std::string& path) { write_file_bytes(path, serialize_cache(cache)); }

MaskCache load_cache(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize_cache(bytes);
}

}  // namespace genplan
