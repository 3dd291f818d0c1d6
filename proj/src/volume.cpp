#include "qcuts3d/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace qcuts3d {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::format: return "format";
    case ErrorKind::data: return "data";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::io: return "io";
    case ErrorKind::placement: return "placement";
    case ErrorKind::configuration: return "configuration";
  }
  return "unknown";
}

std::string to_string(const Dims& dims) {
  return std::to_string(dims.nx) + "x" + std::to_string(dims.ny) + "x" + std::to_string(dims.nz);
}

std::size_t SegmentationMask::solid_count() const noexcept {
  return static_cast<std::size_t>(std::count(data().begin(), data().end(), solid));
}

double SegmentationMask::solid_fraction() const noexcept {
  return size() == 0 ? 0.0 : static_cast<double>(solid_count()) / static_cast<double>(size());
}

LabelVolume::LabelVolume(Dims dims, std::vector<std::uint8_t> labels, Codebook codebook)
    : VoxelGrid(dims, std::move(labels)), codebook_(std::move(codebook)) {
  std::array<bool, 256> seen{};
  for (std::uint8_t label : data()) seen[label] = true;
  for (int code = 0; code < 256; ++code) {
    if (seen[code] && !has_code(code)) {
      throw DataError("label " + std::to_string(code) + " is not in the phase codebook");
    }
  }
}

std::size_t element_size(ElementType type) noexcept {
  switch (type) {
    case ElementType::u8: return 1;
    case ElementType::u16: return 2;
    case ElementType::u32: return 4;
    case ElementType::f32: return 4;
  }
  return 0;
}

const char* to_string(ElementType type) noexcept {
  switch (type) {
    case ElementType::u8: return "u8";
    case ElementType::u16: return "u16";
    case ElementType::u32: return "u32";
    case ElementType::f32: return "f32";
  }
  return "?";
}

ElementType parse_element_type(const std::string& text) {
  if (text == "u8") return ElementType::u8;
  if (text == "u16") return ElementType::u16;
  if (text == "u32") return ElementType::u32;
  if (text == "f32") return ElementType::f32;
  throw FormatError("unsupported element type '" + text + "'");
}

fs::path sidecar_path(const fs::path& raw_path) {
  fs::path p = raw_path;
  return p.replace_extension(".json");
}

namespace {

Dims parse_dims(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("sidecar 'dims' must be [nx, ny, nz]");
  Dims d;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 1) {
      throw FormatError("sidecar 'dims' entries must be positive integers");
    }
  }
  d.nx = j[0].get<std::size_t>();
  d.ny = j[1].get<std::size_t>();
  d.nz = j[2].get<std::size_t>();
  return d;
}

std::vector<char> read_bytes(const fs::path& path, std::size_t expected) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("cannot open " + path.string());
  auto size = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (size != expected) {
    throw FormatError(path.string() + ": file size " + std::to_string(size) +
                      " does not match declared dims (expected " + std::to_string(expected) +
                      " bytes)");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes(expected);
  if (expected > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(expected))) {
    throw IoError("short read from " + path.string());
  }
  return bytes;
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void store_le(char* p, T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  std::memcpy(p, &v, sizeof(T));
}

// Decodes the raw payload into doubles in x-fastest order.
std::vector<double> decode(const std::vector<char>& bytes, const RawHeader& h) {
  const std::size_t n = h.dims.count();
  const std::size_t es = element_size(h.dtype);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* p = bytes.data() + i * es;
    switch (h.dtype) {
      case ElementType::u8: out[i] = static_cast<unsigned char>(*p); break;
      case ElementType::u16: out[i] = load_le<std::uint16_t>(p); break;
      case ElementType::u32: out[i] = load_le<std::uint32_t>(p); break;
      case ElementType::f32: out[i] = load_le<float>(p); break;
    }
  }
  if (h.axis_order == AxisOrder::zyx) {
    // file stores z fastest: offset = z + nz*(y + ny*x)
    std::vector<double> reordered(n);
    const Dims& d = h.dims;
    std::size_t src = 0;
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t z = 0; z < d.nz; ++z) reordered[d.index(x, y, z)] = out[src++];
    out.swap(reordered);
  }
  return out;
}

std::vector<double> load_raw(const fs::path& raw_path, const RawHeader& h) {
  if (!h.dims.valid()) throw FormatError("invalid dims " + to_string(h.dims));
  auto bytes = read_bytes(raw_path, h.dims.count() * element_size(h.dtype));
  return decode(bytes, h);
}

RawHeader require_sidecar(const fs::path& raw_path) {
  return read_sidecar(sidecar_path(raw_path));
}

}  // namespace

RawHeader read_sidecar(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw FormatError("missing sidecar " + json_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("malformed sidecar " + json_path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("sidecar must be a JSON object");
  RawHeader h;
  if (!j.contains("dims")) throw FormatError("sidecar lacks 'dims'");
  h.dims = parse_dims(j["dims"]);
  if (!j.contains("dtype") || !j["dtype"].is_string()) throw FormatError("sidecar lacks 'dtype'");
  h.dtype = parse_element_type(j["dtype"].get<std::string>());
  if (j.contains("axis_order")) {
    const auto order = j["axis_order"].get<std::string>();
    if (order == "xyz") {
      h.axis_order = AxisOrder::xyz;
    } else if (order == "zyx") {
      h.axis_order = AxisOrder::zyx;
    } else {
      throw FormatError("unsupported axis_order '" + order + "'");
    }
  }
  if (j.contains("spacing") && !j["spacing"].is_null()) {
    const auto& s = j["spacing"];
    if (!s.is_array() || s.size() != 3) throw FormatError("sidecar 'spacing' must have 3 entries");
    h.spacing = Spacing{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
  }
  if (j.contains("kind")) h.kind = j["kind"].get<std::string>();
  if (j.contains("codebook")) {
    for (const auto& [key, value] : j["codebook"].items()) {
      h.codebook[std::stoi(key)] = value.get<std::string>();
    }
  }
  return h;
}

void write_sidecar(const fs::path& json_path, const RawHeader& h) {
  json j;
  j["dims"] = {h.dims.nx, h.dims.ny, h.dims.nz};
  j["dtype"] = to_string(h.dtype);
  j["axis_order"] = h.axis_order == AxisOrder::xyz ? "xyz" : "zyx";
  if (h.spacing) j["spacing"] = {(*h.spacing)[0], (*h.spacing)[1], (*h.spacing)[2]};
  j["kind"] = h.kind;
  if (!h.codebook.empty()) {
    json cb = json::object();
    for (const auto& [code, name] : h.codebook) cb[std::to_string(code)] = name;
    j["codebook"] = cb;
  }
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + json_path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + json_path.string());
}

Volume load_volume(const fs::path& raw_path, const RawHeader& h) {
  if (h.dtype == ElementType::u32) throw FormatError("u32 is not a supported intensity type");
  const auto raw = load_raw(raw_path, h);
  double scale = 1.0;
  if (h.dtype == ElementType::u8) scale = 255.0;
  if (h.dtype == ElementType::u16) scale = 65535.0;
  std::vector<float> voxels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (!std::isfinite(v)) throw DataError("non-finite intensity at voxel " + std::to_string(i));
    if (h.dtype == ElementType::f32 && (v < 0.0 || v > 1.0)) {
      throw DataError("f32 intensity outside [0,1] at voxel " + std::to_string(i));
    }
    voxels[i] = static_cast<float>(v / scale);
  }
  Volume vol(h.dims, std::move(voxels));
  vol.spacing = h.spacing;
  return vol;
}

Volume load_volume(const fs::path& raw_path) { return load_volume(raw_path, require_sidecar(raw_path)); }

void save_volume(const Volume& volume, const fs::path& raw_path, ElementType dtype) {
  if (dtype == ElementType::u32) throw ArgumentError("u32 is not a supported intensity type");
  const std::size_t n = volume.size();
  const std::size_t es = element_size(dtype);
  std::vector<char> bytes(n * es);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(static_cast<double>(volume[i]), 0.0, 1.0);
    char* p = bytes.data() + i * es;
    switch (dtype) {
      case ElementType::u8: *p = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))); break;
      case ElementType::u16: store_le<std::uint16_t>(p, static_cast<std::uint16_t>(std::lround(v * 65535.0))); break;
      case ElementType::f32: store_le<float>(p, volume[i]); break;
      case ElementType::u32: break;
    }
  }
  write_bytes(raw_path, bytes.data(), bytes.size());
  RawHeader h;
  h.dims = volume.dims();
  h.dtype = dtype;
  h.spacing = volume.spacing;
  h.kind = "volume";
  write_sidecar(sidecar_path(raw_path), h);
}

void save_mask(const SegmentationMask& mask, const fs::path& raw_path) {
  write_bytes(raw_path, mask.data().data(), mask.size());
  RawHeader h;
  h.dims = mask.dims();
  h.dtype = ElementType::u8;
  h.kind = "mask";
  write_sidecar(sidecar_path(raw_path), h);
}

SegmentationMask load_mask(const fs::path& raw_path) {
  const RawHeader h = require_sidecar(raw_path);
  if (h.dtype != ElementType::u8) throw FormatError("mask files must be u8");
  const auto raw = load_raw(raw_path, h);
  std::vector<std::uint8_t> labels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != 0.0 && raw[i] != 1.0) {
      throw DataError("mask value " + std::to_string(raw[i]) + " is not 0 or 1");
    }
    labels[i] = static_cast<std::uint8_t>(raw[i]);
  }
  return SegmentationMask(h.dims, std::move(labels));
}

void save_labels(const LabelVolume& labels, const fs::path& raw_path) {
  write_bytes(raw_path, labels.data().data(), labels.size());
  RawHeader h;
  h.dims = labels.dims();
  h.dtype = ElementType::u8;
  h.kind = "labels";
  h.codebook = labels.codebook();
  write_sidecar(sidecar_path(raw_path), h);
}

LabelVolume load_labels(const fs::path& raw_path) {
  const RawHeader h = require_sidecar(raw_path);
  if (h.dtype != ElementType::u8) throw FormatError("label files must be u8");
  if (h.codebook.empty()) throw FormatError("label sidecar lacks a 'codebook'");
  const auto raw = load_raw(raw_path, h);
  std::vector<std::uint8_t> labels(raw.begin(), raw.end());
  return LabelVolume(h.dims, std::move(labels), h.codebook);
}

void save_field(const SaliencyField& field, const fs::path& raw_path) {
  std::vector<char> bytes(field.size() * 4);
  for (std::size_t i = 0; i < field.size(); ++i) store_le<float>(bytes.data() + 4 * i, field[i]);
  write_bytes(raw_path, bytes.data(), bytes.size());
  RawHeader h;
  h.dims = field.dims();
  h.dtype = ElementType::f32;
  h.kind = "field";
  write_sidecar(sidecar_path(raw_path), h);
}

SaliencyField load_field(const fs::path& raw_path) {
  const RawHeader h = require_sidecar(raw_path);
  if (h.dtype != ElementType::f32) throw FormatError("saliency fields must be f32");
  const auto raw = load_raw(raw_path, h);
  std::vector<float> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]) || raw[i] < 0.0 || raw[i] > 1.0) {
      throw DataError("saliency value outside [0,1] at voxel " + std::to_string(i));
    }
    values[i] = static_cast<float>(raw[i]);
  }
  return SaliencyField(h.dims, std::move(values));
}

double percentile(std::span<const float> values, double p) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ArgumentError("percentile must lie in [0,100]");
  std::vector<float> copy(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(copy.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(lo), copy.end());
  const double v_lo = copy[lo];
  if (frac == 0.0 || lo + 1 >= copy.size()) return v_lo;
  // the next order statistic is the minimum of the upper partition
  const double v_hi = *std::min_element(copy.begin() + static_cast<std::ptrdiff_t>(lo) + 1, copy.end());
  return v_lo + frac * (v_hi - v_lo);
}

ContrastResult contrast_adjust(const Volume& volume, double percentile_low, double percentile_high) {
  if (!(percentile_low >= 0.0 && percentile_low < percentile_high && percentile_high <= 100.0)) {
    throw ArgumentError("percentiles must satisfy 0 <= low < high <= 100");
  }
  ContrastResult result{volume, false, 0.0, 0.0};
  result.low_value = percentile(volume.values(), percentile_low);
  result.high_value = percentile(volume.values(), percentile_high);
  const double lo = result.low_value;
  const double hi = result.high_value;
  if (!(hi > lo)) {
    result.degenerate = true;
    return result;
  }
  const double range = hi - lo;
  for (float& v : result.volume.values()) {
    const double t = (static_cast<double>(v) - lo) / range;
    v = static_cast<float>(std::clamp(t, 0.0, 1.0));
  }
  return result;
}

SegmentationMask binarize_ground_truth(const LabelVolume& truth, int solid_code) {
  if (!truth.has_code(solid_code)) {
    throw ArgumentError("solid code " + std::to_string(solid_code) + " is not in the codebook");
  }
  SegmentationMask mask(truth.dims());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    mask[i] = truth[i] == solid_code ? SegmentationMask::solid : SegmentationMask::pore;
  }
  return mask;
}

}  // namespace qcuts3d
