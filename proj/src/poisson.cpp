#include "mlfas/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "mlfas/error.hpp"

namespace mlfas {

namespace {

double centre(std::size_t idx, std::size_t n) { return (static_cast<double>(idx) + 0.5) / static_cast<double>(n); }

template <typename F>
GridField tabulate(std::size_t n, F&& fn) {
  const auto size = static_cast<Eigen::Index>(n);
  GridField g(size, size);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fn(centre(j, n), centre(i, n));
    }
  }
  return g;
}

}  // namespace

KappaParams draw_kappa_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> k(0.5, 4.0);
  std::uniform_real_distribution<double> a(0.0, 0.5);
  std::uniform_real_distribution<double> rot(0.0, std::numbers::pi / 2.0);
  KappaParams p;
  p.kx = k(rng);
  p.ky = k(rng);
  p.ax = a(rng);
  p.ay = a(rng);
  p.alpha = rot(rng);
  return p;
}

double kappa_at(const KappaParams& p, double x, double y) {
  const double c = std::cos(p.alpha);
  const double s = std::sin(p.alpha);
  const double xr = c * (x - 0.5) - s * (y - 0.5) + 0.5;
  const double yr = s * (x - 0.5) + c * (y - 0.5) + 0.5;
  constexpr double pi = std::numbers::pi;
  return 1.1 + std::cos(p.kx * pi * (xr + p.ax)) * std::cos(p.ky * pi * (yr + p.ay));
}

GridField sample_kappa(const KappaParams& p, std::size_t n) {
  return tabulate(n, [&](double x, double y) { return kappa_at(p, x, y); });
}

GridField forcing(std::size_t n) {
  return tabulate(n, [](double x, double y) {
    return 32.0 * std::exp(-4.0 * ((x - 0.25) * (x - 0.25) + (y - 0.25) * (y - 0.25)));
  });
}

GridField x_coordinates(std::size_t n) {
  return tabulate(n, [](double x, double) { return x; });
}

GridField y_coordinates(std::size_t n) {
  return tabulate(n, [](double, double y) { return y; });
}

Eigen::SparseMatrix<double> assemble_poisson_operator(const GridField& kappa) {
  if (kappa.rows() != kappa.cols() || kappa.rows() == 0) throw ShapeError("kappa must be a nonempty square grid");
  if (!(kappa.array() > 0.0).all() || !kappa.allFinite()) throw ConfigError("kappa must be positive and finite");
  const Eigen::Index n = kappa.rows();
  const double inv_h2 = static_cast<double>(n * n);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(5 * n * n));
  auto id = [n](Eigen::Index i, Eigen::Index j) { return i * n + j; };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double kp = kappa(i, j);
      double diag = 0.0;
      const Eigen::Index nbr[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) {
          diag += 2.0 * kp * inv_h2;
          continue;
        }
        const double kq = kappa(q[0], q[1]);
        const double face = 2.0 * kp * kq / (kp + kq) * inv_h2;
        diag += face;
        entries.emplace_back(id(i, j), id(q[0], q[1]), -face);
      }
      entries.emplace_back(id(i, j), id(i, j), diag);
    }
  }
  Eigen::SparseMatrix<double> a(n * n, n * n);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

GridField solve_poisson(const GridField& kappa, const GridField& f, const PoissonSolveOptions& options) {
  if (f.rows() != kappa.rows() || f.cols() != kappa.cols()) throw ShapeError("forcing and kappa grids differ in size");
  const Eigen::Index n = kappa.rows();
  const Eigen::SparseMatrix<double> a = assemble_poisson_operator(kappa);
  const Vector rhs = Eigen::Map<const Vector>(f.data(), n * n);
  GridField u = GridField::Zero(n, n);
  if (rhs.squaredNorm() == 0.0) return u;

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations == 0 ? static_cast<Eigen::Index>(10 * n * n)
                                                  : static_cast<Eigen::Index>(options.max_iterations));
  cg.compute(a);
  const Vector sol = cg.solve(rhs);
  if (cg.info() != Eigen::Success || !(cg.error() <= options.tolerance)) {
    throw SolverError("conjugate gradients stopped after " + std::to_string(cg.iterations()) +
                      " iterations with relative residual " + std::to_string(cg.error()));
  }
  Eigen::Map<Vector>(u.data(), n * n) = sol;
  return u;
}

std::size_t validation_count(std::size_t count, double val_fraction) {
  if (count < 2) throw ConfigError("a dataset needs at least 2 samples");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(count) * val_fraction));
  return std::clamp<std::size_t>(v, 1, count - 1);
}

RegressionDataset generate_dataset(const GenerateOptions& options) {
  if (options.grid == 0) throw ConfigError("grid size must be positive");
  const std::size_t n = options.grid;
  const std::size_t cells = n * n;
  RegressionDataset data;
  data.grid = static_cast<std::uint32_t>(n);
  data.channels = options.include_forcing ? 4 : 3;
  data.train_count = options.count - validation_count(options.count, options.val_fraction);
  data.seed = options.seed;
  data.inputs.resize(static_cast<Eigen::Index>(cells * data.channels), static_cast<Eigen::Index>(options.count));
  data.outputs.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(options.count));

  const GridField f = forcing(n);
  const GridField xs = x_coordinates(n);
  const GridField ys = y_coordinates(n);
  std::vector<const GridField*> fixed_channels;
  if (options.include_forcing) fixed_channels.push_back(&f);
  fixed_channels.push_back(&xs);
  fixed_channels.push_back(&ys);

  std::exception_ptr failure;
  std::size_t failed_sample = 0;
  const auto count = static_cast<std::ptrdiff_t>(options.count);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    try {
      std::seed_seq seq{static_cast<std::uint64_t>(options.seed & 0xffffffffu),
                        static_cast<std::uint64_t>(options.seed >> 32), static_cast<std::uint64_t>(s)};
      std::mt19937_64 rng(seq);
      const GridField kappa = sample_kappa(draw_kappa_params(rng), n);
      const GridField u = solve_poisson(kappa, f);
      auto in = data.inputs.col(s);
      in.head(static_cast<Eigen::Index>(cells)) = Eigen::Map<const Vector>(kappa.data(), static_cast<Eigen::Index>(cells));
      for (std::size_t c = 0; c < fixed_channels.size(); ++c) {
        in.segment(static_cast<Eigen::Index>((c + 1) * cells), static_cast<Eigen::Index>(cells)) =
            Eigen::Map<const Vector>(fixed_channels[c]->data(), static_cast<Eigen::Index>(cells));
      }
      data.outputs.col(s) = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(cells));
    } catch (...) {
#pragma omp critical(mlfas_generate_failure)
      if (!failure || static_cast<std::size_t>(s) < failed_sample) {
        failure = std::current_exception();
        failed_sample = static_cast<std::size_t>(s);
      }
    }
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw SolverError("sample " + std::to_string(failed_sample) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace mlfas
