#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgruip/network.hpp"

namespace mgruip {

struct GradCheckOptions {
  double step = 1e-3;         // central-difference half width
  double tolerance = 1e-2;    // max allowed relative error
  double floor = 1e-2;        // denominator floor for near-zero gradients
  std::size_t max_parameters = 5000;
  BnMode mode = BnMode::train;
};

/// Step 1e-3 / tolerance 1e-2 for float, step 1e-5 / tolerance 1e-4 for double.
template <typename T>
GradCheckOptions default_grad_check_options();

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor) noexcept;

struct GradCheckReport {
  std::size_t checked = 0;
  /// Perturbed passes in which some ReLU input changed sign; grad_check
  /// evaluates those on the unperturbed on/off pattern.
  std::size_t kink_crossings = 0;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::string worst_parameter;  // "name[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

/// Central differences of `loss` over every scalar of `params`, compared with
/// `analytic` (same layout). `params` are perturbed in place and restored.
template <typename T>
GradCheckReport finite_difference_check(std::span<const std::pair<std::string, Tensor<T>*>> params,
                                        std::span<const Tensor<T>* const> analytic,
                                        const std::function<double()>& loss,
                                        const GradCheckOptions& options);

/// Checks backward_batch against finite differences of the masked
/// cross-entropy on one batch. Perturbed passes replay the ReLU on/off
/// pattern of the unperturbed pass, so a step that straddles a kink still
/// differences the smooth piece whose gradient backprop computes. `tamper` may modify the analytic gradients
/// before comparison (used to confirm the check can fail). Throws
/// ValidationError when the network exceeds options.max_parameters.
template <typename T>
GradCheckReport grad_check(const NetworkTopology& topology, const NetworkParams<T>& params,
                           std::span<const Tensor<T>> frames, std::span<const std::vector<int>> labels,
                           const GradCheckOptions& options,
                           const std::function<void(NetworkParams<T>&)>& tamper = {});

}  // namespace mgruip
