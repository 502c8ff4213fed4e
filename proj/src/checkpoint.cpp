#include "mlfas/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace mlfas {

namespace {
constexpr char net_magic[9] = "MLFASNET";
constexpr std::uint32_t dense_tag = 0;
constexpr std::uint32_t conv_tag = 1;
// Guards against absurd allocations from corrupted headers.
constexpr std::uint64_t max_entries = std::uint64_t{1} << 32;
}  // namespace

void write_checkpoint(std::ostream& out, const Network& net) {
  validate(net);
  out.write(net_magic, 8);
  io::write_u32(out, checkpoint_version);
  io::write_u32(out, static_cast<std::uint32_t>(net.activation.kind));
  io::write_f64(out, net.activation.slope);
  io::write_u32(out, net.activate_output ? 1 : 0);
  io::write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      io::write_u32(out, dense_tag);
      io::write_u64(out, static_cast<std::uint64_t>(d->weights.rows()));
      io::write_u64(out, static_cast<std::uint64_t>(d->weights.cols()));
      io::write_f64s(out, d->weights.data(), static_cast<std::size_t>(d->weights.size()));
      io::write_f64s(out, d->bias.data(), static_cast<std::size_t>(d->bias.size()));
    } else {
      const auto& c = std::get<ConvLayer>(layer);
      io::write_u32(out, conv_tag);
      for (int v : {c.out_channels, c.in_channels, c.kernel_h, c.kernel_w, c.stride_h, c.stride_w, c.pad_h, c.pad_w,
                    c.in_h, c.in_w}) {
        io::write_u32(out, static_cast<std::uint32_t>(v));
      }
      io::write_f64s(out, c.kernels.data(), c.kernels.size());
      io::write_f64s(out, c.bias.data(), static_cast<std::size_t>(c.bias.size()));
    }
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Network read_checkpoint(std::istream& in) {
  io::expect_magic(in, net_magic);
  const std::uint32_t version = io::read_u32(in, "version");
  if (version != checkpoint_version) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Network net;
  const std::uint32_t act = io::read_u32(in, "activation");
  if (act > 2) throw FormatError("unknown activation tag " + std::to_string(act));
  net.activation.kind = static_cast<ActivationKind>(act);
  net.activation.slope = io::read_f64(in, "activation slope");
  net.activate_output = io::read_u32(in, "output activation flag") != 0;
  const std::uint32_t count = io::read_u32(in, "layer count");
  if (count == 0) throw FormatError("checkpoint has no layers");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t tag = io::read_u32(in, "layer kind");
    if (tag == dense_tag) {
      const std::uint64_t rows = io::read_u64(in, "dense rows");
      const std::uint64_t cols = io::read_u64(in, "dense cols");
      if (rows == 0 || cols == 0 || rows * cols > max_entries) {
        throw FormatError("layer " + std::to_string(k) + ": implausible dense shape");
      }
      DenseLayer d{RowMatrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                   Vector(static_cast<Eigen::Index>(rows))};
      io::read_f64s(in, d.weights.data(), static_cast<std::size_t>(d.weights.size()), "dense weights");
      io::read_f64s(in, d.bias.data(), static_cast<std::size_t>(d.bias.size()), "dense bias");
      net.layers.emplace_back(std::move(d));
    } else if (tag == conv_tag) {
      int f[10];
      for (int& v : f) {
        const std::uint32_t raw = io::read_u32(in, "conv header");
        if (raw > (1u << 20)) throw FormatError("layer " + std::to_string(k) + ": implausible conv header");
        v = static_cast<int>(raw);
      }
      ConvLayer c;
      c.out_channels = f[0];
      c.in_channels = f[1];
      c.kernel_h = f[2];
      c.kernel_w = f[3];
      c.stride_h = f[4];
      c.stride_w = f[5];
      c.pad_h = f[6];
      c.pad_w = f[7];
      c.in_h = f[8];
      c.in_w = f[9];
      const std::uint64_t n = static_cast<std::uint64_t>(c.out_channels) * c.in_channels * c.kernel_h * c.kernel_w;
      if (n == 0 || n > max_entries) throw FormatError("layer " + std::to_string(k) + ": implausible kernel size");
      c.kernels.resize(n);
      c.bias.resize(c.out_channels);
      io::read_f64s(in, c.kernels.data(), c.kernels.size(), "conv kernels");
      io::read_f64s(in, c.bias.data(), static_cast<std::size_t>(c.bias.size()), "conv bias");
      net.layers.emplace_back(std::move(c));
    } else {
      throw FormatError("layer " + std::to_string(k) + ": unknown kind tag " + std::to_string(tag));
    }
  }
  try {
    validate(net);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint describes an invalid network: ") + e.what());
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, net);
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace mlfas
