// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparsecal/model.hpp"

namespace sparsecal {

// Binary layout, all integers little-endian:
//   magic       8 bytes  "SPCLCKPT"
//   version     u32      kCheckpointVersion
//   arch        u32 length + UTF-8 bytes
//   count       u32      number of tensor records
//   record × count:
//     name      u32 length + bytes
//     rank      u32, then rank × u32 extents
//     bytes     u64      payload length, must equal 4 · Π extents
//     payload   f32 values, row-major
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'C', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct Checkpoint {
  std::string arch;
  std::vector<TensorRecord> records;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, version mismatch, or inconsistent lengths.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Records: "input.norm" [2] = (mean, stddev), then "<layer>.weight" and
/// "<layer>.bias" per layer.
Checkpoint to_checkpoint(const Model& model);
/// Widens the stored floats back to doubles. Throws FormatError when records
/// are missing or mis-shaped for the architecture.
Model model_from_checkpoint(const Checkpoint& ckpt);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// True when the file starts with the checkpoint magic.
bool is_checkpoint_file(const std::filesystem::path& path);

namespace io {

// Little-endian primitives shared by the binary containers.
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v);
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
void put_string(std::vector<std::uint8_t>& out, const std::string& s);

/// Bounds-checked cursor; throws FormatError on overrun.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string string();
  void expect(std::span<const char> magic, const char* what);
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n);
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace io
}  // namespace sparsecal
