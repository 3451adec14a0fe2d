#pragma once

#include <stdexcept>
#include <string>

namespace notevec {

/// Broad failure classes. The CLI prints them as `error:<category>:`.
enum class ErrorCategory {
  io,
  schema,
  format,
  parameter,
  lookup,
  domain,
  empty_vocabulary,
  training,
  undefined_auc,
};

const char* to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace notevec
