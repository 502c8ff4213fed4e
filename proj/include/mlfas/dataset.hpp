#pragma once

// Regression datasets and the "MLFASDAT" file format (version 1, little-endian):
//
//   char[8]  magic "MLFASDAT"
//   u32      format version (1)
//   u64      sample count
//   u32      grid size n
//   u32      input channel count
//   u64      training sample count (the first samples; the rest are validation)
//   u64      generator seed (0 when unknown)
//   per sample: f64[channels*n*n] input (channel-major, row-major grids),
//               f64[n*n] output

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>

#include "mlfas/network.hpp"
#include "mlfas/types.hpp"

namespace mlfas {

inline constexpr std::uint32_t dataset_version = 1;

/// Column-per-sample inputs and targets.
struct SampleSet {
  BatchMatrix inputs;
  BatchMatrix targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  Minibatch gather(std::span<const std::size_t> indices) const;
  Minibatch all() const { return {inputs, targets}; }
};

struct RegressionDataset {
  std::uint32_t grid = 0;
  std::uint32_t channels = 0;
  std::size_t train_count = 0;
  std::uint64_t seed = 0;
  BatchMatrix inputs;   // channels*grid*grid x count
  BatchMatrix outputs;  // grid*grid x count

  std::size_t count() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t input_size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t output_size() const { return static_cast<std::size_t>(outputs.rows()); }
  SampleSet train() const;
  SampleSet validation() const;
};

/// Throws FormatError if the fields are inconsistent.
void validate(const RegressionDataset& data);

void write_dataset(std::ostream& out, const RegressionDataset& data);
RegressionDataset read_dataset(std::istream& in);
void write_dataset(const std::filesystem::path& path, const RegressionDataset& data);
RegressionDataset read_dataset(const std::filesystem::path& path);

/// Bytes occupied by the fixed header.
inline constexpr std::size_t dataset_header_bytes = 8 + 4 + 8 + 4 + 4 + 8 + 8;

}  // namespace mlfas
