#pragma once

#include <stdexcept>
#include <string>

namespace lagphase {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments: non-finite entries, dimension mismatches, malformed input.
struct invalid_input : error {
  using error::error;
};

// A value (typically a phase) falls outside the operator range (-n*pi/2, n*pi/2).
struct out_of_range_error : error {
  using error::error;
};

// Repeated eigenvalues where a divided-difference formula is requested.
struct degenerate_spectrum_error : error {
  using error::error;
};

// Inputs that contradict each other (e.g. a spectrum whose phase does not
// match the phase argument).
struct inconsistent_input : error {
  using error::error;
};

struct sampling_exhausted_error : error {
  using error::error;
};

struct degenerate_grid_error : error {
  using error::error;
};

struct grid_mismatch_error : error {
  using error::error;
};

struct invalid_bump_error : error {
  using error::error;
};

struct empty_overlap_error : error {
  using error::error;
};

// Config file problems; carries the 1-based line number when known.
struct config_error : error {
  int line = 0;
  config_error(const std::string& msg, int line_no = 0)
      : error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

}  // namespace lagphase
