#include "notevec/error.h"

namespace notevec {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::format: return "format";
    case ErrorCategory::parameter: return "parameter";
    case ErrorCategory::lookup: return "lookup";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::empty_vocabulary: return "empty_vocabulary";
    case ErrorCategory::training: return "training";
    case ErrorCategory::undefined_auc: return "undefined_auc";
  }
  return "unknown";
}

}  // namespace notevec
