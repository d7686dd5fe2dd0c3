#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace grouprec {

// All numerics run in 64-bit floating point; determinism matters more than speed here.
using Scalar = double;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// Binary relation matrix. Entries are 0/1 stored as int32 so that sparse
// products count path multiplicities without overflow; binarize() collapses
// counts back to incidence.
using SpBool = Eigen::SparseMatrix<std::int32_t, Eigen::RowMajor>;

/// Input-data problem (bad file, dangling id, malformed record). CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad invocation or config (missing field, unknown flag value). CLI exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite gradient/loss). CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace grouprec
