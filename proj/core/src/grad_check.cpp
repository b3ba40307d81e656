#include "mgruip/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mgruip {

template <>
GradCheckOptions default_grad_check_options<float>() {
  return GradCheckOptions{};
}

template <>
GradCheckOptions default_grad_check_options<double>() {
  GradCheckOptions o;
  o.step = 1e-5;
  o.tolerance = 1e-4;
  o.floor = 1e-6;
  return o;
}

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckReport finite_difference_check(std::span<const std::pair<std::string, Tensor<T>*>> params,
                                        std::span<const Tensor<T>* const> analytic,
                                        const std::function<double()>& loss,
                                        const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ContractError("finite_difference_check: parameter and gradient lists differ in length");
  }
  GradCheckReport report;
  double sum = 0.0;
  const T h = static_cast<T>(options.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i].second;
    const Tensor<T>& g = *analytic[i];
    if (!p.same_shape(g)) {
      throw ContractError("finite_difference_check: gradient shape differs for " + params[i].first);
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T saved = p[j];
      p[j] = saved + h;
      const double up = loss();
      p[j] = saved - h;
      const double down = loss();
      p[j] = saved;
      // Divide by the step actually representable in T.
      const double actual = static_cast<double>((saved + h) - (saved - h));
      const double numeric = (up - down) / actual;
      const double err = relative_error(static_cast<double>(g[j]), numeric, options.floor);
      sum += err;
      ++report.checked;
      if (err > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = err;
        report.worst_parameter = params[i].first + "[" + std::to_string(j) + "]";
        report.worst_analytic = static_cast<double>(g[j]);
        report.worst_numeric = numeric;
      }
    }
  }
  if (report.checked > 0) report.mean_rel_error = sum / static_cast<double>(report.checked);
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

template <typename T>
GradCheckReport grad_check(const NetworkTopology& topology, const NetworkParams<T>& params,
                           std::span<const Tensor<T>> frames, std::span<const std::vector<int>> labels,
                           const GradCheckOptions& options,
                           const std::function<void(NetworkParams<T>&)>& tamper) {
  const std::size_t count = params.parameter_count();
  if (count > options.max_parameters) {
    throw ValidationError("gradcheck refused: " + std::to_string(count) + " parameters exceed the limit of " +
                          std::to_string(options.max_parameters) +
                          "; shrink n_c / n_p or the number of layers");
  }
  ReluTrace trace;
  ForwardResult<T> fwd = [&] {
    ScopedReluTrace record(trace);
    return forward_batch(topology, params, frames, options.mode);
  }();
  trace.replay = true;
  LossResult<T> base = masked_cross_entropy<T>(topology, fwd.logits, labels);
  NetworkParams<T> grads = backward_batch<T>(topology, params, fwd.cache, base.grad_logits);
  if (tamper) tamper(grads);

  NetworkParams<T> work = params;
  std::vector<std::pair<std::string, Tensor<T>*>> named;
  work.for_each_param([&](const std::string& name, Tensor<T>& t) { named.emplace_back(name, &t); });
  const std::vector<const Tensor<T>*> analytic = param_tensors(std::as_const(grads));

  std::size_t crossings = 0;
  auto loss = [&]() {
    ScopedReluTrace replay(trace);
    ForwardResult<T> r = forward_batch(topology, work, frames, options.mode);
    if (trace.cursor != trace.active.size()) throw ContractError("ReLU trace replay did not consume the recording");
    if (trace.flips > 0) ++crossings;
    return masked_cross_entropy<T>(topology, r.logits, labels).loss;
  };
  GradCheckReport report = finite_difference_check<T>(named, analytic, loss, options);
  report.kink_crossings = crossings;
  return report;
}

#define MGRUIP_INSTANTIATE_GRADCHECK(T)                                                               \
  template GradCheckReport finite_difference_check<T>(                                                \
      std::span<const std::pair<std::string, Tensor<T>*>>, std::span<const Tensor<T>* const>,         \
      const std::function<double()>&, const GradCheckOptions&);                                       \
  template GradCheckReport grad_check<T>(const NetworkTopology&, const NetworkParams<T>&,             \
                                         std::span<const Tensor<T>>, std::span<const std::vector<int>>, \
                                         const GradCheckOptions&,                                     \
                                         const std::function<void(NetworkParams<T>&)>&);

MGRUIP_INSTANTIATE_GRADCHECK(float)
MGRUIP_INSTANTIATE_GRADCHECK(double)

}  // namespace mgruip
