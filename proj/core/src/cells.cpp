#include "mgruip/cells.hpp"

#include <cmath>
#include <string>

namespace mgruip {

std::string_view to_string(CellType type) noexcept {
  switch (type) {
    case CellType::gru: return "gru";
    case CellType::mgru: return "mgru";
    case CellType::mgruip: return "mgruip";
  }
  return "?";
}

namespace {
thread_local ReluTrace* active_trace = nullptr;
}  // namespace

ScopedReluTrace::ScopedReluTrace(ReluTrace& trace) noexcept : previous_(active_trace) {
  trace.cursor = 0;
  trace.flips = 0;
  if (!trace.replay) trace.active.clear();
  active_trace = &trace;
}

ScopedReluTrace::~ScopedReluTrace() { active_trace = previous_; }

double glorot_bound(std::size_t fan_in, std::size_t fan_out) noexcept {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

template <typename T>
Tensor<T> glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return Tensor<T>::uniform(rows, cols, static_cast<T>(glorot_bound(cols, rows)), rng);
}

void check_batch(std::size_t x_rows, std::size_t h_rows) {
  if (x_rows != h_rows) {
    throw DimensionError("input batch " + std::to_string(x_rows) + " != state batch " +
                         std::to_string(h_rows));
  }
}

// Interpolation h = z * h_prev + (1 - z) * candidate.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& z, const Tensor<T>& h_prev, const Tensor<T>& candidate) {
  Tensor<T> h(z.rows(), z.cols());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = z[i] * h_prev[i] + (T{1} - z[i]) * candidate[i];
  return h;
}

// Gradients of the interpolation: returns (dz_pre, dcandidate) where dz_pre is
// already taken through the sigmoid; dh_prev receives the direct term.
template <typename T>
void interpolate_backward(const Tensor<T>& dh, const Tensor<T>& z, const Tensor<T>& h_prev,
                          const Tensor<T>& candidate, Tensor<T>& dz_pre, Tensor<T>& dcandidate,
                          Tensor<T>& dh_prev) {
  dz_pre = Tensor<T>(dh.rows(), dh.cols());
  dcandidate = Tensor<T>(dh.rows(), dh.cols());
  dh_prev = Tensor<T>(dh.rows(), dh.cols());
  for (std::size_t i = 0; i < dh.size(); ++i) {
    const T dz = dh[i] * (h_prev[i] - candidate[i]);
    dz_pre[i] = dz * z[i] * (T{1} - z[i]);
    dcandidate[i] = dh[i] * (T{1} - z[i]);
    dh_prev[i] = dh[i] * z[i];
  }
}

template <typename T>
Tensor<T> relu_mask(Tensor<T> grad, const Tensor<T>& pre) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(pre[i] > T{0})) grad[i] = T{0};
  return grad;
}

template <typename T>
Tensor<T> candidate_relu(const Tensor<T>& pre) {
  ReluTrace* trace = active_trace;
  if (trace == nullptr) return relu(pre);
  Tensor<T> out(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const bool on = pre[i] > T{0};
    bool use = on;
    if (trace->replay) {
      if (trace->cursor >= trace->active.size()) throw ContractError("ReLU trace replay ran past the recording");
      use = trace->active[trace->cursor++];
      if (use != on) ++trace->flips;
    } else {
      trace->active.push_back(on);
    }
    out[i] = use ? pre[i] : T{0};
  }
  return out;
}

}  // namespace

template <typename T>
GruParams<T> GruParams<T>::zeros(std::size_t inputs, std::size_t units) {
  GruParams p;
  p.W_z = p.W_r = p.W_h = Tensor<T>(units, inputs);
  p.U_z = p.U_r = p.U_h = Tensor<T>(units, units);
  p.b_z = p.b_r = p.b_h = Tensor<T>(1, units);
  return p;
}

template <typename T>
GruParams<T> GruParams<T>::init(std::size_t inputs, std::size_t units, std::mt19937_64& rng) {
  GruParams p = zeros(inputs, units);
  p.W_z = glorot<T>(units, inputs, rng);
  p.W_r = glorot<T>(units, inputs, rng);
  p.W_h = glorot<T>(units, inputs, rng);
  p.U_z = glorot<T>(units, units, rng);
  p.U_r = glorot<T>(units, units, rng);
  p.U_h = glorot<T>(units, units, rng);
  return p;
}

template <typename T>
MgruParams<T> MgruParams<T>::zeros(std::size_t inputs, std::size_t units) {
  MgruParams p;
  p.W_z = p.W_h = Tensor<T>(units, inputs);
  p.U_z = p.U_h = Tensor<T>(units, units);
  p.b_z = p.b_h = Tensor<T>(1, units);
  p.bn = BatchNormState<T>::make(units);
  p.bn.gamma.set_zero();
  p.bn.running_var.set_zero();
  return p;
}

template <typename T>
MgruParams<T> MgruParams<T>::init(std::size_t inputs, std::size_t units, std::mt19937_64& rng) {
  MgruParams p = zeros(inputs, units);
  p.bn = BatchNormState<T>::make(units);
  p.W_z = glorot<T>(units, inputs, rng);
  p.W_h = glorot<T>(units, inputs, rng);
  p.U_z = glorot<T>(units, units, rng);
  p.U_h = glorot<T>(units, units, rng);
  return p;
}

template <typename T>
MgruipParams<T> MgruipParams<T>::zeros(std::size_t inputs, std::size_t units, std::size_t projection) {
  MgruipParams p;
  p.W_v = Tensor<T>(projection, inputs + units);
  p.W_z = p.W_h = Tensor<T>(units, projection);
  p.b_z = p.b_h = Tensor<T>(1, units);
  p.bn = BatchNormState<T>::make(units);
  p.bn.gamma.set_zero();
  p.bn.running_var.set_zero();
  return p;
}

template <typename T>
MgruipParams<T> MgruipParams<T>::init(std::size_t inputs, std::size_t units, std::size_t projection,
                                      std::mt19937_64& rng) {
  MgruipParams p = zeros(inputs, units, projection);
  p.bn = BatchNormState<T>::make(units);
  p.W_v = glorot<T>(projection, inputs + units, rng);
  p.W_z = glorot<T>(units, projection, rng);
  p.W_h = glorot<T>(units, projection, rng);
  return p;
}

template <typename T>
GruStep<T> gru_step(const GruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev) {
  expect_shape(x, x.rows(), p.inputs(), "gru_step input");
  expect_shape(h_prev, h_prev.rows(), p.units(), "gru_step state");
  check_batch(x.rows(), h_prev.rows());

  GruStep<T> out;
  auto& c = out.cache;
  c.x = x;
  c.h_prev = h_prev;
  c.z = sigmoid(add_row(matmul_nt(x, p.W_z) + matmul_nt(h_prev, p.U_z), p.b_z));
  c.r = sigmoid(add_row(matmul_nt(x, p.W_r) + matmul_nt(h_prev, p.U_r), p.b_r));
  c.hr = hadamard(h_prev, c.r);
  c.candidate = tanh(add_row(matmul_nt(x, p.W_h) + matmul_nt(c.hr, p.U_h), p.b_h));
  out.h = interpolate(c.z, h_prev, c.candidate);
  return out;
}

template <typename T>
MgruStep<T> mgru_step(const MgruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev,
                      BnMode bn_mode) {
  expect_shape(x, x.rows(), p.inputs(), "mgru_step input");
  expect_shape(h_prev, h_prev.rows(), p.units(), "mgru_step state");
  check_batch(x.rows(), h_prev.rows());

  MgruStep<T> out;
  auto& c = out.cache;
  c.x = x;
  c.h_prev = h_prev;
  c.z = sigmoid(add_row(matmul_nt(x, p.W_z) + matmul_nt(h_prev, p.U_z), p.b_z));
  const Tensor<T> u = matmul_nt(x, p.W_h) + matmul_nt(h_prev, p.U_h);
  c.pre_relu = add_row(batch_norm_forward(u, p.bn, bn_mode, &c.bn), p.b_h);
  c.candidate = candidate_relu(c.pre_relu);
  out.h = interpolate(c.z, h_prev, c.candidate);
  return out;
}

template <typename T>
MgruipStep<T> mgruip_step(const MgruipParams<T>& p, const Tensor<T>& x, const Tensor<T>& h_prev,
                          const Tensor<T>* context, BnMode bn_mode) {
  expect_shape(x, x.rows(), p.inputs(), "mgruip_step input");
  expect_shape(h_prev, h_prev.rows(), p.units(), "mgruip_step state");
  check_batch(x.rows(), h_prev.rows());

  MgruipStep<T> out;
  auto& c = out.cache;
  c.xh = hconcat(x, h_prev);
  c.h_prev = h_prev;
  c.v = matmul_nt(c.xh, p.W_v);
  if (context != nullptr) {
    expect_shape(*context, x.rows(), p.projection(), "mgruip_step context term");
    c.v += *context;
  }
  c.z = sigmoid(add_row(matmul_nt(c.v, p.W_z), p.b_z));
  const Tensor<T> u = matmul_nt(c.v, p.W_h);
  c.pre_relu = add_row(batch_norm_forward(u, p.bn, bn_mode, &c.bn), p.b_h);
  c.candidate = candidate_relu(c.pre_relu);
  out.h = interpolate(c.z, h_prev, c.candidate);
  out.v = c.v;
  return out;
}

template <typename T>
CellInputGrads<T> gru_backward(const GruParams<T>& p, const GruCache<T>& c, const Tensor<T>& dh,
                               GruParams<T>& g) {
  if (!dh.same_shape(c.h_prev)) {
    throw ContractError("gru_backward: gradient " + shape_of(dh) + " vs cached state " +
                        shape_of(c.h_prev));
  }
  Tensor<T> da_z, dcand, dh_prev;
  interpolate_backward(dh, c.z, c.h_prev, c.candidate, da_z, dcand, dh_prev);

  Tensor<T> da_h = dcand;
  for (std::size_t i = 0; i < da_h.size(); ++i) da_h[i] *= T{1} - c.candidate[i] * c.candidate[i];

  const Tensor<T> dhr = matmul(da_h, p.U_h);
  Tensor<T> da_r(dh.rows(), dh.cols());
  for (std::size_t i = 0; i < da_r.size(); ++i) {
    da_r[i] = dhr[i] * c.h_prev[i] * c.r[i] * (T{1} - c.r[i]);
    dh_prev[i] += dhr[i] * c.r[i];
  }

  g.W_z += matmul_tn(da_z, c.x);
  g.W_r += matmul_tn(da_r, c.x);
  g.W_h += matmul_tn(da_h, c.x);
  g.U_z += matmul_tn(da_z, c.h_prev);
  g.U_r += matmul_tn(da_r, c.h_prev);
  g.U_h += matmul_tn(da_h, c.hr);
  g.b_z += sum_rows(da_z);
  g.b_r += sum_rows(da_r);
  g.b_h += sum_rows(da_h);

  CellInputGrads<T> out;
  out.dx = matmul(da_z, p.W_z) + matmul(da_r, p.W_r) + matmul(da_h, p.W_h);
  dh_prev += matmul(da_z, p.U_z);
  dh_prev += matmul(da_r, p.U_r);
  out.dh_prev = std::move(dh_prev);
  return out;
}

template <typename T>
CellInputGrads<T> mgru_backward(const MgruParams<T>& p, const MgruCache<T>& c, const Tensor<T>& dh,
                                MgruParams<T>& g) {
  if (!dh.same_shape(c.h_prev)) {
    throw ContractError("mgru_backward: gradient " + shape_of(dh) + " vs cached state " +
                        shape_of(c.h_prev));
  }
  Tensor<T> da_z, dcand, dh_prev;
  interpolate_backward(dh, c.z, c.h_prev, c.candidate, da_z, dcand, dh_prev);

  const Tensor<T> dpre = relu_mask(dcand, c.pre_relu);
  g.b_h += sum_rows(dpre);
  BatchNormGrads<T> bn = batch_norm_backward(c.bn, p.bn, dpre);
  g.bn.gamma += bn.dgamma;
  g.bn.beta += bn.dbeta;
  const Tensor<T>& du = bn.dx;

  g.W_z += matmul_tn(da_z, c.x);
  g.W_h += matmul_tn(du, c.x);
  g.U_z += matmul_tn(da_z, c.h_prev);
  g.U_h += matmul_tn(du, c.h_prev);
  g.b_z += sum_rows(da_z);

  CellInputGrads<T> out;
  out.dx = matmul(da_z, p.W_z) + matmul(du, p.W_h);
  dh_prev += matmul(da_z, p.U_z);
  dh_prev += matmul(du, p.U_h);
  out.dh_prev = std::move(dh_prev);
  return out;
}

template <typename T>
CellInputGrads<T> mgruip_backward(const MgruipParams<T>& p, const MgruipCache<T>& c,
                                  const Tensor<T>& dh, const Tensor<T>* dv_external,
                                  MgruipParams<T>& g) {
  if (!dh.same_shape(c.h_prev)) {
    throw ContractError("mgruip_backward: gradient " + shape_of(dh) + " vs cached state " +
                        shape_of(c.h_prev));
  }
  Tensor<T> da_z, dcand, dh_prev;
  interpolate_backward(dh, c.z, c.h_prev, c.candidate, da_z, dcand, dh_prev);

  const Tensor<T> dpre = relu_mask(dcand, c.pre_relu);
  g.b_h += sum_rows(dpre);
  BatchNormGrads<T> bn = batch_norm_backward(c.bn, p.bn, dpre);
  g.bn.gamma += bn.dgamma;
  g.bn.beta += bn.dbeta;
  const Tensor<T>& du = bn.dx;

  g.W_z += matmul_tn(da_z, c.v);
  g.W_h += matmul_tn(du, c.v);
  g.b_z += sum_rows(da_z);

  Tensor<T> dv = matmul(da_z, p.W_z) + matmul(du, p.W_h);
  if (dv_external != nullptr) {
    if (!dv_external->same_shape(dv)) {
      throw ContractError("mgruip_backward: external projection gradient " + shape_of(*dv_external));
    }
    dv += *dv_external;
  }
  g.W_v += matmul_tn(dv, c.xh);
  const Tensor<T> dxh = matmul(dv, p.W_v);

  CellInputGrads<T> out;
  const std::size_t n_i = p.inputs();
  out.dx = slice_cols(dxh, 0, n_i);
  dh_prev += slice_cols(dxh, n_i, p.units());
  out.dh_prev = std::move(dh_prev);
  out.dcontext = std::move(dv);
  return out;
}

template <typename T>
CellInputGrads<T> cell_backward(const CellParams<T>& p, const CellCache<T>& cache, const Tensor<T>& dh,
                                const Tensor<T>* dv_external, CellParams<T>& grads) {
  if (p.index() != cache.index() || p.index() != grads.index()) {
    throw ContractError("cell_backward: parameter, cache and gradient cell types differ");
  }
  switch (cell_type(p)) {
    case CellType::gru:
      return gru_backward(std::get<GruParams<T>>(p), std::get<GruCache<T>>(cache), dh,
                          std::get<GruParams<T>>(grads));
    case CellType::mgru:
      return mgru_backward(std::get<MgruParams<T>>(p), std::get<MgruCache<T>>(cache), dh,
                           std::get<MgruParams<T>>(grads));
    case CellType::mgruip:
      return mgruip_backward(std::get<MgruipParams<T>>(p), std::get<MgruipCache<T>>(cache), dh,
                             dv_external, std::get<MgruipParams<T>>(grads));
  }
  throw ContractError("cell_backward: unknown cell type");
}

#define MGRUIP_INSTANTIATE_CELLS(T)                                                                \
  template struct GruParams<T>;                                                                    \
  template struct MgruParams<T>;                                                                   \
  template struct MgruipParams<T>;                                                                 \
  template GruStep<T> gru_step<T>(const GruParams<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template MgruStep<T> mgru_step<T>(const MgruParams<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                    BnMode);                                                       \
  template MgruipStep<T> mgruip_step<T>(const MgruipParams<T>&, const Tensor<T>&,                  \
                                        const Tensor<T>&, const Tensor<T>*, BnMode);               \
  template CellInputGrads<T> gru_backward<T>(const GruParams<T>&, const GruCache<T>&,              \
                                             const Tensor<T>&, GruParams<T>&);                     \
  template CellInputGrads<T> mgru_backward<T>(const MgruParams<T>&, const MgruCache<T>&,           \
                                              const Tensor<T>&, MgruParams<T>&);                   \
  template CellInputGrads<T> mgruip_backward<T>(const MgruipParams<T>&, const MgruipCache<T>&,     \
                                                const Tensor<T>&, const Tensor<T>*,                \
                                                MgruipParams<T>&);                                 \
  template CellInputGrads<T> cell_backward<T>(const CellParams<T>&, const CellCache<T>&,           \
                                              const Tensor<T>&, const Tensor<T>*, CellParams<T>&);

MGRUIP_INSTANTIATE_CELLS(float)
MGRUIP_INSTANTIATE_CELLS(double)

}  // namespace mgruip
