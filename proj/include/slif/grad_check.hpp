#pragma once

#include <vector>

#include "slif/errors.hpp"
#include "slif/tape.hpp"
#include "slif/tensor.hpp"

namespace slif {

// Validates reverse-mode gradients of a scalar tape program against central
// finite differences. The program is a generic callable
//
//   Id build(TapeT<U>& tape, const std::vector<Id>& param_ids)
//
// instantiated twice: in float to obtain the analytic gradients under
// production precision, and in double to evaluate the perturbed losses (a
// float-valued loss is far too coarse to difference at eps = 1e-4).
//
// Detached values are constants of the differentiated function, so the
// perturbed evaluations replay the baseline detach outputs; a branch behind
// a stop-gradient therefore shows an exactly-zero difference response.

struct GradReport {
  double max_rel_err = 0.0;
  std::vector<TensorT<double>> analytic;
  std::vector<TensorT<double>> fd;
};

template <class Builder>
GradReport grad_report(Builder&& build, const std::vector<Tensor>& params, double eps) {
  if (eps < 1e-6 || eps > 1e-3) throw ConfigError("grad_check: eps must lie in [1e-6, 1e-3]");

  GradReport report;

  {  // analytic pass
    TapeT<float> tape;
    std::vector<TapeT<float>::Id> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(tape.param(p));
    auto loss = build(tape, ids);
    if (tape.value(loss).numel() != 1) throw ShapeError("grad_check: program is not scalar");
    tape.backward(loss);
    for (auto id : ids) report.analytic.push_back(TensorT<double>::from(tape.grad(id)));
  }

  std::vector<TensorT<double>> theta;
  theta.reserve(params.size());
  for (const Tensor& p : params) theta.push_back(TensorT<double>::from(p));

  std::vector<TensorT<double>> frozen_detach;
  {  // baseline double pass records every detach output
    TapeT<double> tape;
    tape.record_detach_outputs(&frozen_detach);
    std::vector<TapeT<double>::Id> ids;
    for (const auto& p : theta) ids.push_back(tape.constant(p));
    build(tape, ids);
  }

  auto eval = [&](const std::vector<TensorT<double>>& point) {
    TapeT<double> tape;
    tape.replay_detach_outputs(&frozen_detach);
    std::vector<TapeT<double>::Id> ids;
    ids.reserve(point.size());
    for (const auto& p : point) ids.push_back(tape.constant(p));
    return tape.scalar(build(tape, ids));
  };

  for (size_t p = 0; p < theta.size(); ++p) {
    TensorT<double> g(theta[p].shape());
    for (int64_t i = 0; i < theta[p].numel(); ++i) {
      const double orig = theta[p][i];
      theta[p][i] = orig + eps;
      const double up = eval(theta);
      theta[p][i] = orig - eps;
      const double down = eval(theta);
      theta[p][i] = orig;
      g[i] = (up - down) / (2.0 * eps);
      const double a = report.analytic[p][i];
      const double rel = std::abs(a - g[i]) / std::max(1.0, std::abs(a));
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
    report.fd.push_back(std::move(g));
  }
  return report;
}

// Max over all parameter coordinates of |analytic - central difference|
// relative to max(1, |analytic|).
template <class Builder>
double grad_check(Builder&& build, const std::vector<Tensor>& params, double eps) {
  return grad_report(build, params, eps).max_rel_err;
}

}  // namespace slif
