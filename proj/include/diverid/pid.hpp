#pragma once

#include <limits>

namespace diverid {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double out_min = -std::numeric_limits<double>::infinity();
  double out_max = std::numeric_limits<double>::infinity();
};

/// PID with a clamped output. Anti-windup: the integral is frozen while the
/// output is saturated in the direction the error would push it further.
class PidController {
 public:
  PidController() = default;
  explicit PidController(const PidGains& gains);

  /// Throws InvalidArgument when dt <= 0 or error is not finite.
  double step(double error, double dt);
  void reset();

  const PidGains& gains() const { return gains_; }
  double integral() const { return integral_; }

 private:
  PidGains gains_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

}  // namespace diverid
