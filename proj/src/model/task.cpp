#include <cmath>
#include <cstdio>

#include "mript/task.hpp"

namespace mript::model {

std::string format_ratio(double ratio) {
  char buf[32];
  if (std::abs(ratio - std::round(ratio)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(ratio)));
  } else {
    std::snprintf(buf, sizeof buf, "%g", ratio);
  }
  return buf;
}

std::string to_string(const TaskLabel& label) {
  return std::string(degradation::family_name(label.family)) + "@" +
         format_ratio(label.acceleration) + "x";
}

}  // namespace mript::model
