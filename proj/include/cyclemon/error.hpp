#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cyclemon {

// Error families map onto CLI exit codes: Usage -> 2, Data -> 3, Numeric -> 4.
enum class ErrorKind { Usage, Data, Numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string name, const std::string& message)
      : std::runtime_error(name + ": " + message),
        kind_(kind),
        name_(std::move(name)) {}

  ErrorKind kind() const { return kind_; }
  // Stable identifier, e.g. "MissingSensorFile".
  const std::string& name() const { return name_; }

private:
  ErrorKind kind_;
  std::string name_;
};

[[noreturn]] inline void raise(ErrorKind kind, std::string name,
                               const std::string& message) {
  throw Error(kind, std::move(name), message);
}

[[noreturn]] inline void raise_data(std::string name, const std::string& message) {
  raise(ErrorKind::Data, std::move(name), message);
}

[[noreturn]] inline void raise_numeric(std::string name, const std::string& message) {
  raise(ErrorKind::Numeric, std::move(name), message);
}

[[noreturn]] inline void raise_usage(std::string name, const std::string& message) {
  raise(ErrorKind::Usage, std::move(name), message);
}

}  // namespace cyclemon
