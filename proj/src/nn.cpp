#include "grouprec/nn.hpp"

#include <cmath>
#include <sstream>

namespace grouprec::nn {

Vec affine(const Mat& W, const Vec& x, const Vec& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    std::ostringstream os;
    os << "affine shape mismatch: W is " << W.rows() << "x" << W.cols()
       << ", x is " << x.size() << ", b is " << b.size();
    throw std::invalid_argument(os.str());
  }
  return W * x + b;
}

Vec softmax(const Vec& scores) {
  if (scores.size() == 0) return Vec();
  const Scalar m = scores.maxCoeff();
  Vec e = (scores.array() - m).exp().matrix();
  return e / e.sum();
}

Scalar log_floored(Scalar x, Scalar floor) {
  return std::log(x < floor ? floor : x);
}

void adam_step(Parameter& p, const AdamConfig& cfg) {
  if (!p.grad.allFinite()) {
    throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
  }
  Mat g = p.grad;
  if (cfg.weight_decay != 0.0 && p.decay) g += cfg.weight_decay * p.value;

  p.step += 1;
  p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * g;
  p.adam_v = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const Scalar bc1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(p.step));
  const Scalar bc2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(p.step));
  // elementwise: value -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
  p.value.array() -= cfg.learning_rate * (p.adam_m.array() / bc1) /
                     ((p.adam_v.array() / bc2).sqrt() + cfg.epsilon);
}

void glorot_init(Parameter& p, Rng& rng) {
  const bool is_bias = p.value.cols() == 1 && !p.decay;
  if (is_bias) {
    p.value.setZero();
    return;
  }
  const Scalar fan_in = static_cast<Scalar>(p.value.cols());
  const Scalar fan_out = static_cast<Scalar>(p.value.rows());
  const Scalar bound = std::sqrt(6.0 / (fan_in + fan_out));
  // fixed column-major draw order
  for (Index c = 0; c < p.value.cols(); ++c)
    for (Index r = 0; r < p.value.rows(); ++r)
      p.value(r, c) = rng.uniform(-bound, bound);
}

GradCheckReport grad_check(const std::function<Scalar()>& loss_fn,
                           const std::function<void()>& backward_fn,
                           std::vector<Parameter*> params, Scalar h) {
  backward_fn();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    GradCheckEntry entry;
    entry.name = p.name;
    for (Index c = 0; c < p.value.cols(); ++c) {
      for (Index r = 0; r < p.value.rows(); ++r) {
        const Scalar saved = p.value(r, c);
        p.value(r, c) = saved + h;
        const Scalar lp = loss_fn();
        p.value(r, c) = saved - h;
        const Scalar lm = loss_fn();
        p.value(r, c) = saved;
        const Scalar numeric = (lp - lm) / (2.0 * h);
        const Scalar a = analytic[k](r, c);
        const Scalar denom =
            std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
        const Scalar rel = std::abs(a - numeric) / denom;
        if (rel > entry.max_rel_err) entry.max_rel_err = rel;
        if (std::abs(a) > entry.max_abs_analytic)
          entry.max_abs_analytic = std::abs(a);
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace grouprec::nn
