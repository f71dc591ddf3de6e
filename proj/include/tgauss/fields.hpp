#pragma once

// Separable Gaussian random fields on coordinate grids.
//
// A field x(z_1, ..., z_N) with mean m_1(z_1)...m_N(z_N) and covariance
// s_1(z_1, z_1')...s_N(z_N, z_N') sampled on the Cartesian product of per-axis
// grids is exactly a tensor Gaussian. The kernels below are evaluated on the
// grid and converted to identifiable parameters. Whether the chosen axes make
// the field separable (e.g. polar vs Cartesian sampling of a radial field) is
// the caller's call; only grid membership is checked here.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tgauss/distribution.hpp"
#include "tgauss/errors.hpp"
#include "tgauss/kernels.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

struct ConstantMean {
  double value = 0.0;
};

struct LinearMean {
  double intercept = 0.0;
  double slope = 0.0;
};

// offset + amplitude * exp(-(z - center)^2 / (2 width^2))
struct GaussianBumpMean {
  double offset = 0.0;
  double amplitude = 1.0;
  double center = 0.0;
  double width = 1.0;
};

// scale^2 * exp(-(z - z')^2 / (2 length^2)) + nugget * [z == z']
struct SquaredExponentialCov {
  double scale = 1.0;
  double length = 1.0;
  double nugget = 0.0;
};

// scale^2 * [z == z']
struct WhiteCov {
  double scale = 1.0;
};

using MeanKernel = std::variant<ConstantMean, LinearMean, GaussianBumpMean>;
using CovKernel = std::variant<SquaredExponentialCov, WhiteCov>;

struct AxisKernel {
  MeanKernel mean;
  CovKernel cov;
};

inline double evaluate(const MeanKernel& k, double z) {
  return std::visit(
      [z](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ConstantMean>) {
          return f.value;
        } else if constexpr (std::is_same_v<T, LinearMean>) {
          return f.intercept + f.slope * z;
        } else {
          const double d = (z - f.center) / f.width;
          return f.offset + f.amplitude * std::exp(-0.5 * d * d);
        }
      },
      k);
}

inline double evaluate(const CovKernel& k, double z1, double z2) {
  return std::visit(
      [z1, z2](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        const double same = z1 == z2 ? 1.0 : 0.0;
        if constexpr (std::is_same_v<T, SquaredExponentialCov>) {
          const double d = (z1 - z2) / f.length;
          return f.scale * f.scale * std::exp(-0.5 * d * d) + f.nugget * same;
        } else {
          return f.scale * f.scale * same;
        }
      },
      k);
}

/// Per-axis coordinates, strictly increasing along each axis.
class CoordinateGrid {
 public:
  explicit CoordinateGrid(std::vector<std::vector<double>> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw ShapeError("grid needs at least one axis");
    for (std::size_t n = 0; n < coords_.size(); ++n) {
      if (coords_[n].empty())
        throw ShapeError("axis " + std::to_string(n + 1) + " has no coordinates");
      for (std::size_t i = 1; i < coords_[n].size(); ++i)
        if (!(coords_[n][i] > coords_[n][i - 1]))
          throw InvalidParameters("coordinates of axis " + std::to_string(n + 1) +
                                  " are not strictly increasing at position " +
                                  std::to_string(i + 1));
    }
  }

  std::size_t axes() const noexcept { return coords_.size(); }
  const std::vector<double>& axis(std::size_t n) const { return coords_.at(n); }

  Shape shape() const {
    Shape s;
    for (const auto& c : coords_) s.push_back(c.size());
    return s;
  }

 private:
  std::vector<std::vector<double>> coords_;
};

struct FieldParams {
  TensorGaussianParams params;
  bool degenerate_mean = false;  // some axis mean vanished; alpha = 0
  std::vector<Vector> raw_means;
  std::vector<Matrix> raw_covs;  // Gram matrices R_n
};

/// Evaluates the kernels on the grid and converts to the identifiable form:
/// sigma2 = prod tr(R_n), Theta_n = R_n / tr(R_n), alpha = prod ||m_n||,
/// mu_n = m_n / ||m_n|| (largest entry positive, residual sign on mu_1).
inline FieldParams field_to_params(const std::vector<AxisKernel>& kernels,
                                   const CoordinateGrid& grid) {
  if (kernels.size() != grid.axes())
    throw ShapeError("got " + std::to_string(kernels.size()) + " kernels for " +
                     std::to_string(grid.axes()) + " grid axes");
  FieldParams out;
  TensorGaussianParams& p = out.params;
  p.shape = grid.shape();
  p.alpha = 1.0;
  p.sigma2 = 1.0;
  bool flip = false;
  for (std::size_t n = 0; n < kernels.size(); ++n) {
    const auto& z = grid.axis(n);
    const auto in = static_cast<Eigen::Index>(z.size());
    Vector m(in);
    Matrix r(in, in);
    for (Eigen::Index i = 0; i < in; ++i) {
      m[i] = evaluate(kernels[n].mean, z[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < in; ++j)
        r(i, j) = evaluate(kernels[n].cov, z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)]);
    }
    try {
      cholesky(r);
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite("covariance kernel of axis " + std::to_string(n + 1) +
                                " is not positive definite on the grid: " + e.what());
    }
    out.raw_means.push_back(m);
    out.raw_covs.push_back(r);

    const double tr = r.trace();
    p.sigma2 *= tr;
    p.thetas.push_back(r / tr);

    const double norm = m.norm();
    if (norm == 0.0) {
      out.degenerate_mean = true;
      Vector e = Vector::Zero(in);
      e[0] = 1.0;
      p.mus.push_back(e);
      continue;
    }
    Vector mu = m / norm;
    const Vector before = mu;
    apply_sign_convention(mu);
    if (mu != before) flip = !flip;
    p.mus.push_back(mu);
    p.alpha *= norm;
  }
  if (out.degenerate_mean) {
    p.alpha = 0.0;
  } else if (flip) {
    p.mus[0] = -p.mus[0];
  }
  return out;
}

struct GridSample {
  std::vector<double> coords;  // one coordinate per axis
  double value = 0.0;
};

/// Places each value at the multi-index of its coordinates. The samples must
/// cover the grid's Cartesian product exactly once, in any order.
inline DenseTensor coherent_tensorize(const std::vector<GridSample>& samples,
                                      const CoordinateGrid& grid) {
  const Shape shape = grid.shape();
  const std::size_t k = element_count(shape);
  std::vector<std::map<double, std::size_t>> lookup(grid.axes());
  for (std::size_t n = 0; n < grid.axes(); ++n)
    for (std::size_t i = 0; i < grid.axis(n).size(); ++i) lookup[n][grid.axis(n)[i]] = i;

  std::vector<double> data(k, 0.0);
  std::vector<bool> filled(k, false);
  const DenseTensor probe = DenseTensor::zeros(shape);
  std::vector<std::size_t> idx(grid.axes());
  for (const auto& s : samples) {
    if (s.coords.size() != grid.axes())
      throw CoherenceError("sample has " + std::to_string(s.coords.size()) +
                           " coordinates, grid has " + std::to_string(grid.axes()) + " axes");
    for (std::size_t n = 0; n < grid.axes(); ++n) {
      const auto it = lookup[n].find(s.coords[n]);
      if (it == lookup[n].end())
        throw CoherenceError("coordinate " + std::to_string(s.coords[n]) + " is not on axis " +
                             std::to_string(n + 1) + " of the grid");
      idx[n] = it->second;
    }
    const std::size_t pos = probe.linear_index(idx);
    if (filled[pos]) throw CoherenceError("duplicate sample at one grid point");
    filled[pos] = true;
    data[pos] = s.value;
  }
  if (samples.size() != k)
    throw CoherenceError("grid has " + std::to_string(k) + " points but " +
                         std::to_string(samples.size()) + " samples were given");
  return DenseTensor(shape, std::move(data));
}

}  // namespace tgauss
