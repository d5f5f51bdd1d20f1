#include "vimp/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vimp::nn {

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("VIMPCKPT", 8);
  write_u16(os, 1);
  write_str(os, ckpt.config_json);
  write_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    write_str(os, t.name);
    write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    std::size_t numel = 1;
    for (int d : t.shape) {
      write_u32(os, static_cast<std::uint32_t>(d));
      numel *= static_cast<std::size_t>(d);
    }
    if (numel != t.data.size()) throw ValidationError("checkpoint tensor '" + t.name + "' shape mismatch");
    for (float v : t.data) write_f32(os, v);
  }
  if (!os) throw IoError("short write to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "VIMPCKPT", 8) != 0) throw FormatError(path + ": bad checkpoint magic");
  const std::uint16_t version = read_u16(is);
  if (version != 1) throw FormatError(path + ": unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_json = read_str(is);
  const std::uint32_t count = read_u32(is);
  ckpt.tensors.resize(count);
  for (auto& t : ckpt.tensors) {
    t.name = read_str(is);
    const std::uint32_t ndim = read_u32(is);
    std::size_t numel = 1;
    t.shape.resize(ndim);
    for (auto& d : t.shape) {
      d = static_cast<int>(read_u32(is));
      numel *= static_cast<std::size_t>(d);
    }
    t.data.resize(numel);
    for (auto& v : t.data) v = read_f32(is);
  }
  return ckpt;
}

}  // namespace vimp::nn
