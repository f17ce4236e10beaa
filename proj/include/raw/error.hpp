#pragma once

#include <stdexcept>
#include <string>

namespace raw {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct SpecError : Error {
  explicit SpecError(const std::string& w) : Error("spec", w) {}
};
struct InputError : Error {
  explicit InputError(const std::string& w) : Error("input", w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format", w) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error("divergence", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
/// No misclassified inputs were available to build watermarks from.
struct NoWatermarkMaterial : Error {
  explicit NoWatermarkMaterial(const std::string& w) : Error("no_watermark_material", w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace raw
