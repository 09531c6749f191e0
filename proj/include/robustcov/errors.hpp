#pragma once

#include <stdexcept>
#include <string>

namespace robustcov {

/// Coarse error classes; the CLI maps them onto process exit codes.
enum class ErrorKind {
    Config,    // bad parameters, invalid ranges, unusable option combinations
    Data,      // unreadable or inconsistent input data
    Numerical, // a computation could not be completed
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string name, const std::string& message)
        : std::runtime_error(message), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const { return kind_; }
    /// Stable machine-readable error name, e.g. "MalformedCsv".
    const std::string& name() const { return name_; }

  private:
    ErrorKind kind_;
    std::string name_;
};

inline Error config_error(const std::string& name, const std::string& msg) {
    return Error(ErrorKind::Config, name, msg);
}
inline Error data_error(const std::string& name, const std::string& msg) {
    return Error(ErrorKind::Data, name, msg);
}
inline Error numerical_error(const std::string& name, const std::string& msg) {
    return Error(ErrorKind::Numerical, name, msg);
}

} // namespace robustcov
