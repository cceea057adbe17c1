#include "capstream/error.hpp"

namespace capstream {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidParameter: return "invalid-parameter";
    case Errc::InsufficientData: return "insufficient-data";
    case Errc::InvalidPair: return "invalid-pair";
    case Errc::InvalidBand: return "invalid-band";
    case Errc::InvalidWindow: return "invalid-window";
    case Errc::Ordering: return "ordering";
    case Errc::Capacity: return "capacity";
    case Errc::InvalidInput: return "invalid-input";
    case Errc::Model: return "model";
    case Errc::TrainingDiverged: return "training-diverged";
    case Errc::Protocol: return "protocol";
    case Errc::Io: return "io";
    case Errc::Config: return "config";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace capstream
