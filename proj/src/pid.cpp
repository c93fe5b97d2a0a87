#include "diverid/pid.hpp"

#include <algorithm>
#include <cmath>

#include "diverid/errors.hpp"

namespace diverid {

PidController::PidController(const PidGains& gains) : gains_(gains) {
  if (!(gains.out_min < gains.out_max)) throw InvalidArgument("PID output limits must satisfy min < max");
  if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) || !std::isfinite(gains.kd)) {
    throw InvalidArgument("PID gains must be finite");
  }
}

double PidController::step(double error, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("PID dt must be > 0");
  if (!std::isfinite(error)) throw InvalidArgument("PID error must be finite");
  const double derivative = has_prev_ ? (error - prev_error_) / dt : 0.0;
  prev_error_ = error;
  has_prev_ = true;

  const double candidate = integral_ + error * dt;
  const double raw = gains_.kp * error + gains_.ki * candidate + gains_.kd * derivative;
  const double out = std::clamp(raw, gains_.out_min, gains_.out_max);
  const bool pushing_high = raw > gains_.out_max && error * gains_.ki > 0.0;
  const bool pushing_low = raw < gains_.out_min && error * gains_.ki < 0.0;
  if (!pushing_high && !pushing_low) integral_ = candidate;
  return out;
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

}  // namespace diverid
