#pragma once

#include <cstddef>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "mgruip/batch_norm.hpp"
#include "mgruip/tensor.hpp"

namespace mgruip {

enum class CellType { gru, mgru, mgruip };

std::string_view to_string(CellType type) noexcept;

/// On/off state of every candidate ReLU in call order. While a trace is
/// installed with ScopedReluTrace, cells on this thread either append to it
/// (recording) or use its states in place of the sign test (replaying), which
/// pins a forward pass to one smooth piece of the loss.
struct ReluTrace {
  std::vector<bool> active;
  bool replay = false;
  std::size_t cursor = 0;
  std::size_t flips = 0;  // replayed states that disagreed with the sign test
};

class ScopedReluTrace {
 public:
  explicit ScopedReluTrace(ReluTrace& trace) noexcept;
  ~ScopedReluTrace();
  ScopedReluTrace(const ScopedReluTrace&) = delete;
  ScopedReluTrace& operator=(const ScopedReluTrace&) = delete;

 private:
  ReluTrace* previous_;
};

/// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out) noexcept;

/// Standard GRU: update and reset gates, tanh candidate, no normalization.
template <typename T>
struct GruParams {
  Tensor<T> W_z, W_r, W_h;  // units x inputs
  Tensor<T> U_z, U_r, U_h;  // units x units
  Tensor<T> b_z, b_r, b_h;  // 1 x units

  static GruParams zeros(std::size_t inputs, std::size_t units);
  static GruParams init(std::size_t inputs, std::size_t units, std::mt19937_64& rng);

  std::size_t inputs() const noexcept { return W_z.cols(); }
  std::size_t units() const noexcept { return W_z.rows(); }

  template <class F>
  void for_each_param(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_param(F&& f) const { visit(*this, f); }
  template <class F>
  void for_each_buffer(F&&) const {}
  template <class F>
  void for_each_buffer(F&&) {}

  friend bool operator==(const GruParams&, const GruParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f("W_z", p.W_z); f("W_r", p.W_r); f("W_h", p.W_h);
    f("U_z", p.U_z); f("U_r", p.U_r); f("U_h", p.U_h);
    f("b_z", p.b_z); f("b_r", p.b_r); f("b_h", p.b_h);
  }
};

/// Minimal GRU: no reset gate; candidate is ReLU(BN(W_h x + U_h h) + b_h).
template <typename T>
struct MgruParams {
  Tensor<T> W_z, W_h;  // units x inputs
  Tensor<T> U_z, U_h;  // units x units
  Tensor<T> b_z, b_h;
  BatchNormState<T> bn;

  /// Every tensor zero, batch-norm state included (gradient / optimizer holder).
  static MgruParams zeros(std::size_t inputs, std::size_t units);
  static MgruParams init(std::size_t inputs, std::size_t units, std::mt19937_64& rng);

  std::size_t inputs() const noexcept { return W_z.cols(); }
  std::size_t units() const noexcept { return W_z.rows(); }

  template <class F>
  void for_each_param(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_param(F&& f) const { visit(*this, f); }
  template <class F>
  void for_each_buffer(F&& f) { f("bn.running_mean", bn.running_mean); f("bn.running_var", bn.running_var); }
  template <class F>
  void for_each_buffer(F&& f) const { f("bn.running_mean", bn.running_mean); f("bn.running_var", bn.running_var); }

  friend bool operator==(const MgruParams&, const MgruParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f("W_z", p.W_z); f("W_h", p.W_h);
    f("U_z", p.U_z); f("U_h", p.U_h);
    f("b_z", p.b_z); f("b_h", p.b_h);
    f("bn.gamma", p.bn.gamma); f("bn.beta", p.bn.beta);
  }
};

/// mGRU with a linear input projection: v = W_v [x ; h_prev] (+ context),
/// both the gate and the candidate read only v.
template <typename T>
struct MgruipParams {
  Tensor<T> W_v;  // projection x (inputs + units)
  Tensor<T> W_z;  // units x projection
  Tensor<T> W_h;  // units x projection
  Tensor<T> b_z, b_h;
  BatchNormState<T> bn;

  /// Every tensor zero, batch-norm state included (gradient / optimizer holder).
  static MgruipParams zeros(std::size_t inputs, std::size_t units, std::size_t projection);
  static MgruipParams init(std::size_t inputs, std::size_t units, std::size_t projection,
                           std::mt19937_64& rng);

  std::size_t inputs() const noexcept { return W_v.cols() - W_z.rows(); }
  std::size_t units() const noexcept { return W_z.rows(); }
  std::size_t projection() const noexcept { return W_v.rows(); }

  template <class F>
  void for_each_param(F&& f) { visit(*this, f); }
  template <class F>
  void for_each_param(F&& f) const { visit(*this, f); }
  template <class F>
  void for_each_buffer(F&& f) { f("bn.running_mean", bn.running_mean); f("bn.running_var", bn.running_var); }
  template <class F>
  void for_each_buffer(F&& f) const { f("bn.running_mean", bn.running_mean); f("bn.running_var", bn.running_var); }

  friend bool operator==(const MgruipParams&, const MgruipParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f("W_v", p.W_v); f("W_z", p.W_z); f("W_h", p.W_h);
    f("b_z", p.b_z); f("b_h", p.b_h);
    f("bn.gamma", p.bn.gamma); f("bn.beta", p.bn.beta);
  }
};

template <typename T>
using CellParams = std::variant<GruParams<T>, MgruParams<T>, MgruipParams<T>>;

template <typename T>
CellType cell_type(const CellParams<T>& p) noexcept {
  return static_cast<CellType>(p.index());
}

template <typename T>
struct GruCache {
  Tensor<T> x, h_prev, z, r, hr, candidate;
};

template <typename T>
struct MgruCache {
  Tensor<T> x, h_prev, z, pre_relu, candidate;
  BatchNormCache<T> bn;
};

template <typename T>
struct MgruipCache {
  Tensor<T> xh;  // [x ; h_prev]
  Tensor<T> h_prev, v, z, pre_relu, candidate;
  BatchNormCache<T> bn;
};

template <typename T>
using CellCache = std::variant<GruCache<T>, MgruCache<T>, MgruipCache<T>>;

template <typename T>
struct GruStep {
  Tensor<T> h;
  GruCache<T> cache;
};

template <typename T>
struct MgruStep {
  Tensor<T> h;
  MgruCache<T> cache;
};

template <typename T>
struct MgruipStep {
  Tensor<T> h;
  Tensor<T> v;
  MgruipCache<T> cache;
};

/// One time step for a batch (rows of x and h_prev are sequences).
template <typename T>
GruStep<T> gru_step(const GruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev);

/// Train bn_mode normalizes over the batch rows and needs at least two of them.
template <typename T>
MgruStep<T> mgru_step(const MgruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev,
                      BnMode bn_mode);

/// `context` (batch x projection) is added to v before the gate and candidate;
/// nullptr means no context module.
template <typename T>
MgruipStep<T> mgruip_step(const MgruipParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev,
                          const Tensor<T>* context, BnMode bn_mode);

template <typename T>
struct CellInputGrads {
  Tensor<T> dx;
  Tensor<T> dh_prev;
  Tensor<T> dcontext;  // gradient wrt v, i.e. wrt the added context term; mgruip only
};

/// Reverse mode of one step. Parameter gradients are accumulated into `grads`.
template <typename T>
CellInputGrads<T> gru_backward(const GruParams<T>& p, const GruCache<T>& cache, const Tensor<T>& dh,
                               GruParams<T>& grads);

template <typename T>
CellInputGrads<T> mgru_backward(const MgruParams<T>& p, const MgruCache<T>& cache,
                                const Tensor<T>& dh, MgruParams<T>& grads);

/// `dv_external` is the gradient reaching v from consumers outside this step
/// (temporal encoding in the layer above); may be nullptr.
template <typename T>
CellInputGrads<T> mgruip_backward(const MgruipParams<T>& p, const MgruipCache<T>& cache,
                                  const Tensor<T>& dh, const Tensor<T>* dv_external,
                                  MgruipParams<T>& grads);

/// Type-dispatching backward; throws ContractError when params, cache and
/// gradient holders are of different cell types.
template <typename T>
CellInputGrads<T> cell_backward(const CellParams<T>& p, const CellCache<T>& cache, const Tensor<T>& dh,
                                const Tensor<T>* dv_external, CellParams<T>& grads);

}  // namespace mgruip
