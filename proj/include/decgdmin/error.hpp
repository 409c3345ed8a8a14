#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace decgdmin {

enum class Errc {
  RankDeficient,
  SingularSystem,
  NotSymmetric,
  InvalidDimensions,
  TooManyNodes,
  IsolatedNode,
  NotAnalyzable,
  NoContraction,
  ShapeMismatch,
  RankCollapse,
  NotOrthonormal,
  Disconnected,
  ConfigInvalid,
  MissingField,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::InvalidDimensions: return "InvalidDimensions";
    case Errc::TooManyNodes: return "TooManyNodes";
    case Errc::IsolatedNode: return "IsolatedNode";
    case Errc::NotAnalyzable: return "NotAnalyzable";
    case Errc::NoContraction: return "NoContraction";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::RankCollapse: return "RankCollapse";
    case Errc::NotOrthonormal: return "NotOrthonormal";
    case Errc::Disconnected: return "Disconnected";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingField: return "MissingField";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace decgdmin
