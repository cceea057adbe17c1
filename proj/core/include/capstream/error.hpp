#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capstream {

enum class Errc {
  InvalidParameter,
  InsufficientData,
  InvalidPair,
  InvalidBand,
  InvalidWindow,
  Ordering,
  Capacity,
  InvalidInput,
  Model,
  TrainingDiverged,
  Protocol,
  Io,
  Config,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool condition, Errc code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace capstream
