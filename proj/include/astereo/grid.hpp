#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace astereo {

/// Dense 2-D sample grid. Rows are image rows (y), columns are image columns (x).
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using CGrid = Grid<std::complex<Scalar>>;

using Gridd = Grid<double>;
using Gridf = Grid<float>;
using CGridd = CGrid<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LifecycleError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

template <typename Derived>
bool all_finite(const Eigen::ArrayBase<Derived>& a) {
  return a.isFinite().all();
}

/// Normalized cross-correlation of two equally shaped grids. Returns 0 when either is constant.
template <typename Scalar>
Scalar normalized_cross_correlation(const Grid<Scalar>& a, const Grid<Scalar>& b) {
  require_same_shape(a, b, "normalized_cross_correlation");
  const Grid<Scalar> da = a - a.mean();
  const Grid<Scalar> db = b - b.mean();
  const Scalar denom = std::sqrt((da * da).sum() * (db * db).sum());
  if (denom <= Scalar(0)) return Scalar(0);
  return (da * db).sum() / denom;
}

}  // namespace astereo
