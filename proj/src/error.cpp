#include "metroflow/error.hpp"

namespace metroflow {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::construction: return "construction";
    case ErrorCategory::data: return "data";
    case ErrorCategory::reference: return "reference";
    case ErrorCategory::config: return "config";
    case ErrorCategory::training: return "training";
    case ErrorCategory::io: return "io";
    case ErrorCategory::diagnostic: return "diagnostic";
  }
  return "unknown";
}

}  // namespace metroflow
