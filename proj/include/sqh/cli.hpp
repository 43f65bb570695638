#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqh/numerics.hpp"
#include "sqh/superposition.hpp"

namespace sqh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

// Thrown for anything the user can fix: bad flags, config keys, values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "min:max:points".
numerics::Grid1D parse_grid(const std::string& spec);

// "re,im:re,im:re,im" into magnitude and phase per coefficient.
std::array<superposition::Coefficient, superposition::kModes> parse_coeffs(const std::string& spec);

// Flat key=value lines ('#' comments) or a flat JSON object, by content.
// Keys are returned with '_' mapped to '-'.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path);

// Entry point behind the sqh executable.  Diagnostics go to err with an "E:"
// prefix; human summaries go to out.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sqh::cli
