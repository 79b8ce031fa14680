#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genplan/flow_model.hpp"
#include "genplan/geometry.hpp"
#include "genplan/io.hpp"
#include "genplan/world.hpp"

namespace genplan {

// Equal-probability partition of the 4-D prior space. Each dimension is cut
// at the standard-normal quantiles Phi^-1(j / K), j = 1..K-1, so every one
// of the K^4 cells carries prior mass exactly K^-4. Cells are flattened
// row-major: index = ((i0 * K + i1) * K + i2) * K + i3.
class InputGrid {
 public:
  explicit InputGrid(int bins = 12);

  int bins() const { return bins_; }
  std::size_t n_cells() const { return n_cells_; }
  // K + 1 edges, edges()[0] = -inf and edges()[K] = +inf.
  const std::vector<double>& edges() const { return edges_; }
  // Probability midpoint Phi^-1((j + 0.5) / K) of bin j.
  double bin_centroid(int bin) const { return centroids_[static_cast<std::size_t>(bin)]; }

  int bin_of(double v) const;
  std::uint32_t cell_of(const Vec4& z) const;
  Vec4 centroid(std::uint32_t cell) const;
  std::array<int, 4> unflatten(std::uint32_t cell) const;
  std::uint32_t flatten(const std::array<int, 4>& bins) const;

 private:
  int bins_;
  std::size_t n_cells_;
  std::vector<double> edges_;
  std::vector<double> centroids_;
};

// Body-frame grid of atomic obstacle positions. Grid points sit at bin
// centres: x_i = x_min + (i + 0.5) * (x_max - x_min) / nx, likewise for y,
// and atomic index = ix * ny + iy.
struct AtomicGrid {
  double x_min = 0.75;
  double x_max = 1.75;
  double y_min = -0.5;
  double y_max = 0.5;
  int nx = 40;
  int ny = 40;
  double r_atom = 0.15;

  double spacing_x() const { return (x_max - x_min) / nx; }
  double spacing_y() const { return (y_max - y_min) / ny; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  Point2 point(std::uint32_t index) const {
    const int ix = static_cast<int>(index / static_cast<std::uint32_t>(ny));
    const int iy = static_cast<int>(index % static_cast<std::uint32_t>(ny));
    return {x_min + (ix + 0.5) * spacing_x(), y_min + (iy + 0.5) * spacing_y()};
  }
  std::uint32_t index(int ix, int iy) const { return static_cast<std::uint32_t>(ix * ny + iy); }
  void validate() const;

  friend bool operator==(const AtomicGrid&, const AtomicGrid&) = default;
};

// Fixed-size bit set over cells, LSB-first within 64-bit words.
class BitArray {
 public:
  BitArray() = default;
  explicit BitArray(std::size_t n_bits) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

  std::size_t size() const { return n_bits_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  std::size_t popcount() const;
  void or_with(std::span<const std::uint64_t> words);
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BitArray&, const BitArray&) = default;

 private:
  std::size_t n_bits_ = 0;
  std::vector<std::uint64_t> words_;
};

// Default number of reconstruction samples per primitive for both cache
// building and online collision checks.
inline constexpr std::size_t kReconstructSamples = 64;
inline constexpr double kMinPrimitiveAlpha = 0.05;

// Maps a raw flow output to a valid primitive: alpha floored at
// kMinPrimitiveAlpha, curvatures clamped to +-kappa_max.
PrimitiveParams to_primitive(const Vec4& theta, double kappa_max = kDefaultKappaMax);

struct CacheBuildOptions {
  double ds = kDefaultCheckSpacing;
  std::size_t reconstruct_samples = kReconstructSamples;
  double kappa_max = kDefaultKappaMax;
  unsigned workers = 0;  // 0: hardware concurrency
};

// Per-atomic-map bit arrays over input-grid cells. Bit j of map i is set iff
// the primitive decoded from cell j's centroid collides with the atomic
// obstacle at grid point i.
class MaskCache {
 public:
  MaskCache() = default;
  MaskCache(int bins, const AtomicGrid& agrid, const Digest& flow_checksum, const CacheBuildOptions& opts);

  int bins() const { return bins_; }
  std::size_t n_cells() const { return n_cells_; }
  const AtomicGrid& atomic_grid() const { return agrid_; }
  const Digest& flow_checksum() const { return flow_checksum_; }
  const Digest& config_hash() const { return config_hash_; }
  void set_config_hash(const Digest& h) { config_hash_ = h; }
  double ds() const { return ds_; }
  std::size_t reconstruct_samples() const { return reconstruct_samples_; }
  double kappa_max() const { return kappa_max_; }
  std::size_t words_per_map() const { return words_per_map_; }

  std::span<const std::uint64_t> map_words(std::uint32_t atomic) const {
    return {bits_.data() + atomic * words_per_map_, words_per_map_};
  }
  std::span<std::uint64_t> mutable_map_words(std::uint32_t atomic) {
    return {bits_.data() + atomic * words_per_map_, words_per_map_};
  }
  bool bit(std::uint32_t atomic, std::uint32_t cell) const {
    return (bits_[atomic * words_per_map_ + (cell >> 6)] >> (cell & 63)) & 1u;
  }
  std::size_t map_popcount(std::uint32_t atomic) const;

  // Throws ConfigError unless this cache was built for `model`.
  void require_model(const FlowModel& model) const;

  friend bool operator==(const MaskCache&, const MaskCache&) = default;

 private:
  int bins_ = 0;
  std::size_t n_cells_ = 0;
  AtomicGrid agrid_;
  Digest flow_checksum_{};
  Digest config_hash_{};
  double ds_ = kDefaultCheckSpacing;
  std::size_t reconstruct_samples_ = kReconstructSamples;
  double kappa_max_ = kDefaultKappaMax;
  std::size_t words_per_map_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Builds the cache; deterministic regardless of worker count.
MaskCache build_cache(const FlowModel& model, const InputGrid& igrid, const AtomicGrid& agrid,
                      const CacheBuildOptions& opts = {});

// Selection radius around the (ROI-clamped) obstacle centre for an obstacle
// of radius r_obs: h + max(0, r_obs - r_atom + h), h = half the grid-cell
// diagonal.
double covering_radius(const AtomicGrid& agrid, double r_obs);

// Atomic maps whose union over-covers every obstacle's part inside the ROI,
// with obstacles expressed in the body frame of `vehicle`. Sorted, unique.
std::vector<std::uint32_t> decompose(const World& world, const Pose2& vehicle, const AtomicGrid& agrid);

// Bitwise OR of the selected maps.
BitArray rejected_cells(const MaskCache& cache, std::span<const std::uint32_t> atomic);

// Cache file (little-endian):
//   "GPMC" | u16 version | u32 K | u32 dim | u32 nx | u32 ny
//   | f64 x_min, x_max, y_min, y_max, r_atom | 32-byte flow checksum
//   | f64 ds | u32 reconstruct samples | f64 kappa_max | 32-byte config hash
//   | u16 x3 tool version
//   | nx*ny bit arrays of ceil(K^4 / 8) bytes each, atomic-index order,
//     bit j of a map at byte j / 8, bit position j % 8.
inline constexpr std::uint16_t kCacheFormatVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 4 + 2 + 4 * 4 + 5 * 8 + 32 + 8 + 4 + 8 + 32 + 3 * 2;

std::size_t cache_file_size(const MaskCache& cache);
std::vector<std::uint8_t> serialize_cache(const MaskCache& cache);
MaskCache deserialize_cache(std::span<const std::uint8_t> bytes);
void save_cache(const MaskCache& cache, const std::string& path);
MaskCache load_cache(const std::string& path);

}  // namespace genplan
