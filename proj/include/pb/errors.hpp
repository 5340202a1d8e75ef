#pragma once

#include <stdexcept>
#include <string>

namespace pb {

// Error taxonomy maps onto CLI exit codes: usage/config -> 1,
// data/format -> 2, anything else -> 3.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dim_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

struct usage_error : error {
  using error::error;
};

struct data_error : error {
  using error::error;
};

struct format_error : error {
  using error::error;
};

}  // namespace pb
