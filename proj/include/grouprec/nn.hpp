#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grouprec/rng.hpp"
#include "grouprec/types.hpp"

namespace grouprec::nn {

// ====================================================================
// activations / elementary ops (expression-friendly, no temporaries forced)
// ====================================================================

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Derivative mask of relu taken at pre-activation x (1 where x > 0).
template <class Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& x) {
  return (x.array() > typename Derived::Scalar(0))
      .template cast<typename Derived::Scalar>()
      .matrix();
}

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return (typename Derived::Scalar(1) /
          (typename Derived::Scalar(1) + (-x.array()).exp()))
      .matrix();
}

/// y = W x + b with shape validation; throws std::invalid_argument on mismatch.
Vec affine(const Mat& W, const Vec& x, const Vec& b);

/// Numerically safe softmax (max-subtracted). Output sums to 1 exactly up to
/// floating error; empty input yields an empty vector.
Vec softmax(const Vec& scores);

/// log with the argument floored at `floor` so -inf never enters a loss.
Scalar log_floored(Scalar x, Scalar floor = 1e-12);

// ====================================================================
// parameters and the optimizer
// ====================================================================

/// One named tensor plus its gradient and Adam moment buffers. Vectors are
/// stored as n-by-1 matrices so every tensor goes through the same machinery.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  bool decay = false;  // coupled L2 applies to weight matrices, not biases
  long step = 0;       // per-tensor Adam timestep

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols, bool weight_decay)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        adam_m(Mat::Zero(rows, cols)),
        adam_v(Mat::Zero(rows, cols)),
        decay(weight_decay) {}

  void zero_grad() { grad.setZero(); }
};

struct AdamConfig {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  Scalar weight_decay = 0.0;  // added to the gradient of decaying tensors
};

/// One bias-corrected Adam update on a single tensor. Throws NumericalError
/// naming the tensor if its gradient contains a non-finite entry.
void adam_step(Parameter& p, const AdamConfig& cfg);

/// Glorot/uniform init in +-sqrt(6/(fan_in+fan_out)) for weight matrices;
/// bias vectors (cols == 1 && !decay) are left at zero.
void glorot_init(Parameter& p, Rng& rng);

// ====================================================================
// finite-difference gradient checking
// ====================================================================

struct GradCheckEntry {
  std::string name;
  Scalar max_rel_err = 0.0;
  Scalar max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  Scalar max_rel_err = 0.0;
  bool passed(Scalar tol) const { return max_rel_err < tol; }
};

/// Central-difference check of every entry of every tensor.
/// `loss_fn` must recompute the loss from current parameter values and
/// `backward_fn` must fill .grad on all parameters; relative error uses
/// |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<Scalar()>& loss_fn,
                           const std::function<void()>& backward_fn,
                           std::vector<Parameter*> params, Scalar h = 1e-5);

}  // namespace grouprec::nn
