#pragma once
// Error taxonomy shared by every module.
//
// std::domain_error        — a precondition on arguments is violated
// accuracy_error           — a certified tolerance could not be met
// invariant_failure        — a mathematical invariant fails on computed data
// nonconvergence_error     — an iteration exhausted its budget
// internal_inconsistency   — a state the algebra says is impossible

#include <cstdio>
#include <stdexcept>
#include <string>

namespace patchbif {

// Scientific-notation formatting for diagnostics; std::to_string truncates
// small magnitudes to 0.000000.
inline std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

class accuracy_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class invariant_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class nonconvergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class internal_inconsistency : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace patchbif
