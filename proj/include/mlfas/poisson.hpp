#pragma once

// Variable-coefficient Poisson problems -div(kappa grad u) = f on the unit
// square with u = 0 on the boundary, discretized on an n x n cell-centred grid
// (h = 1/n). Grid fields are n x n row-major matrices: entry (i, j) sits at
// x = (j + 0.5) h, y = (i + 0.5) h.

#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/SparseCore>

#include "mlfas/dataset.hpp"
#include "mlfas/types.hpp"

namespace mlfas {

using GridField = RowMatrix;

struct KappaParams {
  double kx = 1.0;     // (0.5, 4)
  double ky = 1.0;     // (0.5, 4)
  double ax = 0.0;     // (0, 0.5)
  double ay = 0.0;     // (0, 0.5)
  double alpha = 0.0;  // rotation, (0, pi/2)
};

KappaParams draw_kappa_params(std::mt19937_64& rng);

/// kappa = 1.1 + cos(kx pi (x' + ax)) cos(ky pi (y' + ay)) with (x', y') the
/// point rotated by alpha about (0.5, 0.5).
double kappa_at(const KappaParams& p, double x, double y);
GridField sample_kappa(const KappaParams& p, std::size_t n);

/// f = 32 exp(-4 ((x - 0.25)^2 + (y - 0.25)^2)).
GridField forcing(std::size_t n);

/// Cell-centre coordinate grids.
GridField x_coordinates(std::size_t n);
GridField y_coordinates(std::size_t n);

/// Five-point operator with harmonic-mean face coefficients; boundary faces
/// use the half-cell distance to the wall. Unknowns in row-major grid order.
Eigen::SparseMatrix<double> assemble_poisson_operator(const GridField& kappa);

struct PoissonSolveOptions {
  double tolerance = 1e-10;  // relative residual
  std::size_t max_iterations = 0;  // 0 selects 10 n^2
};

/// Conjugate-gradient solve. Throws SolverError if the tolerance is not reached.
GridField solve_poisson(const GridField& kappa, const GridField& f, const PoissonSolveOptions& options = {});

struct GenerateOptions {
  std::size_t count = 2000;
  std::size_t grid = 16;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  /// Adds the forcing as a fourth input channel: [kappa, f, x, y].
  bool include_forcing = false;
};

/// Samples are generated independently (sub-stream per sample index) and in
/// parallel; the result does not depend on the thread count.
RegressionDataset generate_dataset(const GenerateOptions& options);

/// Validation sample count for a split: round(count * val_fraction), at least
/// one and leaving at least one training sample.
std::size_t validation_count(std::size_t count, double val_fraction);

}  // namespace mlfas
