#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dkmo/nn.hpp"

// Binary checkpoint of an ordered list of networks.
//
//   "DKMOCKPT" u32 version (=1) u32 network_count
//   per network: u32 input_width, u32 layer_count, f64 bn_momentum, f64 bn_epsilon
//     per layer: u32 kind, u32 width, f64 rate
//     per layer, in order, its tables as (u32 rows, u32 cols, rows*cols f64
//     row-major): dense weight, bias; batch norm gamma, beta, running mean,
//     running variance.
//
// All integers and floats little-endian; values round-trip bit-exactly.
namespace dkmo::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, std::span<const Network> networks);
std::vector<Network> read_checkpoint(const std::filesystem::path& path);

// Bitwise equality of structure, parameters and running statistics.
bool identical(const Network& a, const Network& b);

}  // namespace dkmo::nn
