#pragma once

#include <string>

#include "mript/degradation.hpp"

namespace mript::model {

/// Degradation task identity: drives head-tail routing and prompt encoding.
struct TaskLabel {
  degradation::MaskFamily family = degradation::MaskFamily::kCartesianRandom;
  double acceleration = 4.0;

  friend bool operator==(const TaskLabel&, const TaskLabel&) = default;
};

/// "random@4x" style label used in logs and reports.
std::string to_string(const TaskLabel& label);

/// Compact ratio text: 4 -> "4", 2.5 -> "2.5".
std::string format_ratio(double ratio);

}  // namespace mript::model
