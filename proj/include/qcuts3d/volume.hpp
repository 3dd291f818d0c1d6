#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcuts3d/error.hpp"

namespace qcuts3d {

/// Grid extents. Voxels are stored with x varying fastest.
struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t count() const noexcept { return nx * ny * nz; }
  std::size_t extent(int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool valid() const noexcept { return nx >= 1 && ny >= 1 && nz >= 1; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + nx * (y + ny * z);
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);

template <typename T>
class VoxelGrid {
 public:
  using value_type = T;

  VoxelGrid() = default;

  explicit VoxelGrid(Dims dims, T fill = T{}) : dims_(dims) {
    check_dims(dims);
    data_.assign(dims.count(), fill);
  }

  VoxelGrid(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims);
    if (data_.size() != dims.count()) {
      throw ArgumentError("voxel count " + std::to_string(data_.size()) +
                          " does not match dims " + to_string(dims));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[dims_.index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[dims_.index(x, y, z)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  static void check_dims(const Dims& dims) {
    if (!dims.valid()) throw ArgumentError("dims must all be >= 1, got " + to_string(dims));
  }

  Dims dims_{};
  std::vector<T> data_;
};

using Spacing = std::array<double, 3>;

/// Grayscale intensities in [0,1].
class Volume : public VoxelGrid<float> {
 public:
  using VoxelGrid::VoxelGrid;

  std::optional<Spacing> spacing;
};

/// Binary solid/pore labels: 0 = pore, 1 = solid.
class SegmentationMask : public VoxelGrid<std::uint8_t> {
 public:
  using VoxelGrid::VoxelGrid;

  static constexpr std::uint8_t pore = 0;
  static constexpr std::uint8_t solid = 1;

  std::size_t solid_count() const noexcept;
  double solid_fraction() const noexcept;
};

/// Real-valued per-voxel solid likelihood in [0,1].
class SaliencyField : public VoxelGrid<float> {
 public:
  using VoxelGrid::VoxelGrid;
};

using Codebook = std::map<int, std::string>;

/// Multiphase ground truth. Every voxel label must be present in the codebook.
class LabelVolume : public VoxelGrid<std::uint8_t> {
 public:
  LabelVolume() = default;
  LabelVolume(Dims dims, std::vector<std::uint8_t> labels, Codebook codebook);

  const Codebook& codebook() const noexcept { return codebook_; }
  bool has_code(int code) const { return codebook_.count(code) != 0; }

 private:
  Codebook codebook_;
};

enum class ElementType { u8, u16, u32, f32 };

enum class AxisOrder { xyz, zyx };

std::size_t element_size(ElementType type) noexcept;
const char* to_string(ElementType type) noexcept;
ElementType parse_element_type(const std::string& text);

/// Contents of the JSON sidecar that accompanies every raw file.
struct RawHeader {
  Dims dims;
  ElementType dtype = ElementType::u8;
  AxisOrder axis_order = AxisOrder::xyz;
  std::optional<Spacing> spacing;
  std::string kind = "volume";  // volume | mask | labels | field | supervoxels
  Codebook codebook;            // labels only
};

/// `foo.raw` -> `foo.json`
std::filesystem::path sidecar_path(const std::filesystem::path& raw_path);

RawHeader read_sidecar(const std::filesystem::path& json_path);
void write_sidecar(const std::filesystem::path& json_path, const RawHeader& header);

/// Loads raw intensities and maps them into [0,1] by dividing by the element
/// type's maximum. f32 input must already lie in [0,1].
Volume load_volume(const std::filesystem::path& raw_path, const RawHeader& header);
Volume load_volume(const std::filesystem::path& raw_path);

/// Quantizes to `dtype` (rounding to nearest) and writes raw + sidecar.
void save_volume(const Volume& volume, const std::filesystem::path& raw_path,
                 ElementType dtype = ElementType::f32);

void save_mask(const SegmentationMask& mask, const std::filesystem::path& raw_path);
SegmentationMask load_mask(const std::filesystem::path& raw_path);

void save_labels(const LabelVolume& labels, const std::filesystem::path& raw_path);
LabelVolume load_labels(const std::filesystem::path& raw_path);

void save_field(const SaliencyField& field, const std::filesystem::path& raw_path);
SaliencyField load_field(const std::filesystem::path& raw_path);

struct ContrastResult {
  Volume volume;
  bool degenerate = false;  // percentiles coincided; volume returned unchanged
  double low_value = 0.0;
  double high_value = 0.0;
};

inline constexpr double kDefaultPercentileLow = 0.5;
inline constexpr double kDefaultPercentileHigh = 99.5;

/// Percentile linear stretch: values at or below the low percentile go to 0,
/// at or above the high percentile go to 1, linear in between.
ContrastResult contrast_adjust(const Volume& volume, double percentile_low = kDefaultPercentileLow,
                               double percentile_high = kDefaultPercentileHigh);

/// Percentile with linear interpolation between order statistics.
double percentile(std::span<const float> values, double p);

SegmentationMask binarize_ground_truth(const LabelVolume& truth, int solid_code);

}  // namespace qcuts3d
