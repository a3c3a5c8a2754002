#include "mtjit/support/error.hpp"

namespace mtjit {

namespace {
const char *severity_name(Severity s) {
  switch (s) {
  case Severity::Error:
    return "error";
  case Severity::Warning:
    return "warning";
  case Severity::Note:
    return "note";
  }
  return "error";
}
} // namespace

std::string Diagnostic::render() const {
  return tu_name + ":" + std::to_string(offset) + ": " + severity_name(severity) + ": " + message;
}

std::string render_all(const std::vector<Diagnostic> &diags) {
  std::string out;
  for (const auto &d : diags) {
    out += d.render();
    out += '\n';
  }
  return out;
}

SyntaxError::SyntaxError(std::string tu, std::uint32_t offset, std::string message)
    : Error(Diagnostic{tu, offset, Severity::Error, message}.render()),
      diag_{std::move(tu), offset, Severity::Error, std::move(message)} {}

SemaError::SemaError(std::vector<Diagnostic> diags)
    : Error(render_all(diags)), diags_(std::move(diags)) {}

} // namespace mtjit
