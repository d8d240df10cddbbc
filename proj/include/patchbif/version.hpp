#pragma once
// Library and per-module version identifiers, stamped into every output row.

#include <string>

namespace patchbif {

inline constexpr const char* kLibraryVersion = "1.0.0";

inline std::string module_versions() {
  return "specfun=1.0.0;linops=1.0.0;bifurcation=1.0.0;functional=1.0.0;"
         "continuation=1.0.0;cli=1.0.0";
}

}  // namespace patchbif
