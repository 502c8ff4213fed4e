#include "mlfas/dataset.hpp"

#include <fstream>
#include <vector>

#include "binary_io.hpp"

namespace mlfas {

namespace {
constexpr char data_magic[9] = "MLFASDAT";
constexpr std::uint64_t max_values = std::uint64_t{1} << 34;
}  // namespace

Minibatch SampleSet::gather(std::span<const std::size_t> indices) const {
  Minibatch b{BatchMatrix(inputs.rows(), static_cast<Eigen::Index>(indices.size())),
              BatchMatrix(targets.rows(), static_cast<Eigen::Index>(indices.size()))};
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(indices[j]);
    b.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(col);
    b.targets.col(static_cast<Eigen::Index>(j)) = targets.col(col);
  }
  return b;
}

SampleSet RegressionDataset::train() const {
  const auto n = static_cast<Eigen::Index>(train_count);
  return {inputs.leftCols(n), outputs.leftCols(n)};
}

SampleSet RegressionDataset::validation() const {
  const auto n = static_cast<Eigen::Index>(count() - train_count);
  return {inputs.rightCols(n), outputs.rightCols(n)};
}

void validate(const RegressionDataset& data) {
  const std::size_t cells = static_cast<std::size_t>(data.grid) * data.grid;
  if (data.grid == 0 || data.channels == 0) throw FormatError("dataset grid and channel count must be positive");
  if (data.input_size() != cells * data.channels) throw FormatError("dataset input rows do not match channels*n*n");
  if (data.output_size() != cells) throw FormatError("dataset output rows do not match n*n");
  if (data.outputs.cols() != data.inputs.cols()) throw FormatError("dataset input and output counts differ");
  if (data.train_count > data.count()) throw FormatError("dataset train count exceeds sample count");
}

void write_dataset(std::ostream& out, const RegressionDataset& data) {
  validate(data);
  out.write(data_magic, 8);
  io::write_u32(out, dataset_version);
  io::write_u64(out, data.count());
  io::write_u32(out, data.grid);
  io::write_u32(out, data.channels);
  io::write_u64(out, data.train_count);
  io::write_u64(out, data.seed);
  for (std::size_t s = 0; s < data.count(); ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    io::write_f64s(out, data.inputs.col(col).data(), data.input_size());
    io::write_f64s(out, data.outputs.col(col).data(), data.output_size());
  }
  if (!out) throw IoError("failed writing dataset");
}

RegressionDataset read_dataset(std::istream& in) {
  io::expect_magic(in, data_magic);
  const std::uint32_t version = io::read_u32(in, "version");
  if (version != dataset_version) throw FormatError("unsupported dataset version " + std::to_string(version));
  RegressionDataset data;
  const std::uint64_t count = io::read_u64(in, "sample count");
  data.grid = io::read_u32(in, "grid size");
  data.channels = io::read_u32(in, "channel count");
  data.train_count = io::read_u64(in, "train count");
  data.seed = io::read_u64(in, "seed");
  const std::uint64_t cells = std::uint64_t{data.grid} * data.grid;
  if (count == 0 || cells == 0 || data.channels == 0 || count * cells * (data.channels + 1) > max_values) {
    throw FormatError("implausible dataset header");
  }
  if (data.train_count > count) throw FormatError("dataset train count exceeds sample count");
  data.inputs.resize(static_cast<Eigen::Index>(cells * data.channels), static_cast<Eigen::Index>(count));
  data.outputs.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(count));
  for (std::uint64_t s = 0; s < count; ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    io::read_f64s(in, data.inputs.col(col).data(), data.input_size(), "sample input");
    io::read_f64s(in, data.outputs.col(col).data(), data.output_size(), "sample output");
  }
  return data;
}

void write_dataset(const std::filesystem::path& path, const RegressionDataset& data) {
  validate(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(out, data);
}

RegressionDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace mlfas
