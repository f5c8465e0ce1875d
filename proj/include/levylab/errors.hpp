#ifndef LEVYLAB_ERRORS_HPP
#define LEVYLAB_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace levylab {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter is outside its admissible domain (alpha, sigma, step sizes, ...).
// The message names the offending field.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Input data is unusable: empty, too short, or degenerate (e.g. exact zeros
// where logarithms are required).
class DataError : public Error {
 public:
  using Error::Error;
};

// A binary or text file does not match its declared format. The message
// carries the byte offset or line number where parsing failed.
class FormatError : public Error {
 public:
  using Error::Error;
};

// An iteration produced a non-finite state. Carries the step index at which
// the blow-up was detected and the last finite state for diagnostics.
class BlowupError : public Error {
 public:
  BlowupError(std::string msg, std::size_t step, std::vector<double> last_state)
      : Error(std::move(msg)), step(step), last_finite_state(std::move(last_state)) {}

  std::size_t step;
  std::vector<double> last_finite_state;
};

}  // namespace levylab

#endif  // LEVYLAB_ERRORS_HPP
