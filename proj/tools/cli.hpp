#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "mgruip/network.hpp"

namespace mgruip::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kNumeric = 3 };

/// Entry point shared by the executable and the tests. Errors end up as one
/// line on `err`: "error: <class>: <message>".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Gradient corruption applied before the finite-difference comparison. Empty
/// in normal builds; the fault-injection build used by the tests flips a sign.
template <typename T>
std::function<void(NetworkParams<T>&)> gradient_fault();

/// Independent generator seeds derived from the single config seed.
enum class SeedStream : std::uint64_t { task = 1, init = 2, shuffle = 3, held_out = 4, gradcheck = 5 };
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) noexcept;

}  // namespace mgruip::cli
