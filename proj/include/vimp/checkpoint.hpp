#pragma once

#include <string>
#include <vector>

#include "vimp/tensor.hpp"

namespace vimp::nn {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string config_json;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

// File layout: magic VIMPCKPT, u16 version, config JSON string, tensor count,
// then per tensor (name, u32 ndim, u32 dims, f32 LE data).
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace vimp::nn
