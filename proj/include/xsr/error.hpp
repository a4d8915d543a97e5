#pragma once

#include <stdexcept>
#include <string>

namespace xsr {

// Malformed or inconsistent input data (files, manifests, headers).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered during training or optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations and shape mismatches raise std::invalid_argument.
[[noreturn]] inline void fail_arg(const std::string& what) { throw std::invalid_argument(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail_arg(what);
}

}  // namespace xsr
