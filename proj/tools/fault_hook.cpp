#include <algorithm>
#include <cmath>

#include "cli.hpp"

namespace mgruip::cli {

template <typename T>
std::function<void(NetworkParams<T>&)> gradient_fault() {
#ifdef MGRUIP_INJECT_GRADIENT_FAULT
  // Flip the sign of the largest gradient entry.
  return [](NetworkParams<T>& grads) {
    T* worst = nullptr;
    grads.for_each_param([&](const std::string&, Tensor<T>& t) {
      for (T& v : t.values()) {
        if (worst == nullptr || std::abs(v) > std::abs(*worst)) worst = &v;
      }
    });
    if (worst != nullptr) *worst = -*worst;
  };
#else
  return {};
#endif
}

template std::function<void(NetworkParams<float>&)> gradient_fault<float>();
template std::function<void(NetworkParams<double>&)> gradient_fault<double>();

}  // namespace mgruip::cli
