#pragma once

// Network checkpoint files ("MLFASNET", version 1). All integers and floats
// are little-endian.
//
//   char[8]  magic "MLFASNET"
//   u32      format version (1)
//   u32      activation (0 relu, 1 leaky_relu, 2 identity)
//   f64      leaky slope
//   u32      activate_output (0/1)
//   u32      layer count
//   per layer:
//     u32    kind tag (0 dense, 1 conv)
//     dense: u64 n_out, u64 n_in, f64[n_out*n_in] weights (row-major), f64[n_out] bias
//     conv:  u32 out_channels, in_channels, kernel_h, kernel_w, stride_h, stride_w,
//                pad_h, pad_w, in_h, in_w;
//            f64[out*in*kh*kw] kernels ([out][in][row][col]), f64[out] bias

#include <filesystem>
#include <iosfwd>

#include "mlfas/network.hpp"

namespace mlfas {

inline constexpr std::uint32_t checkpoint_version = 1;

void write_checkpoint(std::ostream& out, const Network& net);
Network read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace mlfas
