#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtjit {

enum class Severity : std::uint8_t { Error, Warning, Note };

struct Diagnostic {
  std::string tu_name;
  std::uint32_t offset = 0;
  Severity severity = Severity::Error;
  std::string message;

  /// `tu_name:offset: severity: message`
  std::string render() const;
  bool operator==(const Diagnostic &) const = default;
};

std::string render_all(const std::vector<Diagnostic> &diags);

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Lexical or grammatical failure; `offset` is a byte offset into the source.
class SyntaxError : public Error {
public:
  SyntaxError(std::string tu, std::uint32_t offset, std::string message);
  const Diagnostic &diagnostic() const { return diag_; }

private:
  Diagnostic diag_;
};

/// One or more semantic diagnostics.
class SemaError : public Error {
public:
  explicit SemaError(std::vector<Diagnostic> diags);
  const std::vector<Diagnostic> &diagnostics() const { return diags_; }

private:
  std::vector<Diagnostic> diags_;
};

/// Malformed binary payload (fat object, program image, serialized AST/IR).
class FormatError : public Error {
public:
  using Error::Error;
};

class LinkError : public Error {
public:
  using Error::Error;
};

/// Runtime trap raised by the interpreter.
class Trap : public Error {
public:
  using Error::Error;
};

/// Failure inside jit_entry: type-string errors, instantiation diagnostics,
/// nested-jit use. The message is rendered with source context.
class JitError : public Error {
public:
  using Error::Error;
};

} // namespace mtjit
