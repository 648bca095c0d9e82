#pragma once

#include <stdexcept>
#include <string>

namespace pairqe {

// Bad command-line usage (flag combinations the parser cannot catch).
class usage_error : public std::runtime_error {
 public:
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input: config files, CSV schema or cell values.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// A fit did not converge or the problem is degenerate.
class fit_error : public std::runtime_error {
 public:
  explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

// A quadrature or other numerical routine failed to reach its tolerance.
class numerics_error : public std::runtime_error {
 public:
  explicit numerics_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pairqe
