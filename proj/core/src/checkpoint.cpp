// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sparsecal/error.hpp"

namespace sparsecal {
namespace io {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> Reader::take(std::size_t n) {
  if (n > bytes_.size() - pos_) throw FormatError("unexpected end of data");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint16_t Reader::u16() {
  auto b = take(2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t Reader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t Reader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::string() {
  const std::uint32_t n = u32();
  auto b = take(n);
  return {b.begin(), b.end()};
}

void Reader::expect(std::span<const char> magic, const char* what) {
  auto b = take(magic.size());
  if (std::memcmp(b.data(), magic.data(), magic.size()) != 0) throw FormatError(std::string("bad ") + what + " magic");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

}  // namespace io

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  io::put_u32(out, kCheckpointVersion);
  io::put_string(out, ckpt.arch);
  io::put_u32(out, static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& rec : ckpt.records) {
    if (numel(rec.shape) != rec.values.size()) throw ContractError("record " + rec.name + " shape/value mismatch");
    io::put_string(out, rec.name);
    io::put_u32(out, static_cast<std::uint32_t>(rec.shape.size()));
    for (auto d : rec.shape) io::put_u32(out, static_cast<std::uint32_t>(d));
    io::put_u64(out, rec.values.size() * sizeof(float));
    for (float v : rec.values) io::put_f32(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::Reader in(bytes);
  in.expect(kCheckpointMagic, "checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.arch = in.string();
  const std::uint32_t count = in.u32();
  for (std::uint32_t r = 0; r < count; ++r) {
    TensorRecord rec;
    rec.name = in.string();
    const std::uint32_t rank = in.u32();
    if (rank == 0 || rank > 8) throw FormatError("record " + rec.name + " has invalid rank");
    for (std::uint32_t d = 0; d < rank; ++d) {
      rec.shape.push_back(in.u32());
      if (rec.shape.back() == 0) throw FormatError("record " + rec.name + " has a zero extent");
    }
    const std::uint64_t payload = in.u64();
    if (payload != numel(rec.shape) * sizeof(float)) throw FormatError("record " + rec.name + " byte length mismatch");
    if (payload > in.remaining()) throw FormatError("record " + rec.name + " payload truncated");
    rec.values.resize(numel(rec.shape));
    for (auto& v : rec.values) v = in.f32();
    ckpt.records.push_back(std::move(rec));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint records");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

namespace {

TensorRecord record_of(const std::string& name, const Tensor& t) {
  TensorRecord rec{name, t.shape(), {}};
  rec.values.reserve(t.size());
  for (double v : t.data()) rec.values.push_back(static_cast<float>(v));
  return rec;
}

Tensor tensor_of(const TensorRecord& rec) {
  std::vector<double> data(rec.values.begin(), rec.values.end());
  return Tensor(rec.shape, std::move(data));
}

const TensorRecord& find_record(const Checkpoint& ckpt, const std::string& name) {
  for (const auto& rec : ckpt.records)
    if (rec.name == name) return rec;
  throw FormatError("checkpoint is missing record " + name);
}

}  // namespace

Checkpoint to_checkpoint(const Model& model) {
  Checkpoint ckpt;
  ckpt.arch = to_string(model.spec.arch);
  ckpt.records.push_back({"input.norm", {2}, {static_cast<float>(model.norm.mean), static_cast<float>(model.norm.stddev)}});
  for (std::size_t l = 0; l < model.spec.layers.size(); ++l) {
    const std::string& name = model.spec.layers[l].name;
    ckpt.records.push_back(record_of(name + ".weight", model.weights[l]));
    ckpt.records.push_back(record_of(name + ".bias", model.biases[l]));
  }
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Arch arch;
  try {
    arch = parse_arch(ckpt.arch);
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  Model model;
  model.spec = ModelSpec::make(arch);
  const auto& norm = find_record(ckpt, "input.norm");
  if (norm.values.size() != 2) throw FormatError("input.norm must hold two values");
  model.norm = {norm.values[0], norm.values[1]};
  for (const auto& layer : model.spec.layers) {
    const auto& w = find_record(ckpt, layer.name + ".weight");
    const auto& b = find_record(ckpt, layer.name + ".bias");
    if (w.shape != layer.weight_shape || b.shape != Shape{layer.out_features()}) {
      throw FormatError("layer " + layer.name + " has unexpected stored shapes");
    }
    model.weights.push_back(tensor_of(w));
    model.biases.push_back(tensor_of(b));
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) { save_checkpoint(to_checkpoint(model), path); }

Model load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

bool is_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char head[8] = {};
  in.read(head, sizeof head);
  return in.gcount() == 8 && std::memcmp(head, kCheckpointMagic, 8) == 0;
}

}  // namespace sparsecal
