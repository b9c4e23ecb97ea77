#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metroflow {

enum class ErrorCategory {
  shape,
  contract,
  construction,
  data,
  reference,
  config,
  training,
  io,
  diagnostic,
};

std::string_view to_string(ErrorCategory category);

// Every library failure is an Error; the category is what the CLI reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& message)
      : Error(ErrorCategory::training, message), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace metroflow
