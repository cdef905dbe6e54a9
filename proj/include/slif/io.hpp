#pragma once

#include <cstdint>
#include <string>

#include "slif/tensor.hpp"

namespace slif {

// Binary tensor container: magic "SLIF", two u32 little-endian counts
// (rows, cols), then row-major float32 payload.
void write_tensor_slif(const std::string& path, const Tensor& t);
Tensor read_tensor_slif(const std::string& path);

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

// Fixed-format float for manifest records; bit-identical across runs for
// bit-identical inputs.
std::string format_metric(double v);

void ensure_dir(const std::string& path);

}  // namespace slif
