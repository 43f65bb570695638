#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sqh::numerics {

// Floor used when taking logarithms of densities: ln(max(n, eps_log * max n)).
inline constexpr double kEpsLog = 1e-30;

struct Grid1D {
    double q_min = -8.0;
    double q_max = 8.0;
    std::size_t n_points = 2048;

    // Validating constructor; throws std::invalid_argument.
    static Grid1D make(double q_min, double q_max, std::size_t n_points);

    double dq() const { return (q_max - q_min) / static_cast<double>(n_points - 1); }
    double x(std::size_t i) const { return q_min + dq() * static_cast<double>(i); }
    std::vector<double> nodes() const;

    bool operator==(const Grid1D&) const = default;
};

// Values sampled on every node of a grid.  ScalarField and DensityField share
// the representation; density invariants are enforced by the functions that
// produce them.
struct Field {
    Grid1D grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid1D& g, double fill = 0.0) : grid(g), values(g.n_points, fill) {}
    Field(const Grid1D& g, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double max() const;
};
using ScalarField = Field;
using DensityField = Field;

template <class F>
Field sample(const Grid1D& g, F&& f)
{
    Field out(g);
    for (std::size_t i = 0; i < g.n_points; ++i) out.values[i] = f(g.x(i));
    return out;
}

// Finite-difference weights (Fornberg) for derivative `order` at x0 over the
// stencil nodes xs.
std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int order);

// Central differences in the interior, one-sided stencils of the same formal
// accuracy at the ends.  accuracy is the even order of the truncation error
// (2 gives the classic 3-point stencils with 2nd-order one-sided ends).
Field derivative(const Field& f, int order, int accuracy = 2);

// Trapezoid rule.
double integrate(const Field& f);
double integrate(const Grid1D& g, const std::vector<double>& v);

struct NormalizeResult {
    Field density;
    double raw_integral = 0.0;
    bool truncated = false;  // raw integral below the truncation threshold
};

NormalizeResult normalize_checked(const Field& n, double truncation_threshold = 0.999);
Field normalize(const Field& n);

// ln(max(n, eps * max n)) node by node.
std::vector<double> log_floored(const Field& n, double eps = kEpsLog);

// Linear interpolation, clamped to the end values outside the grid.
double interpolate(const Field& f, double x);

double l1_distance(const Field& a, const Field& b);
double mean(const Field& n);
double variance(const Field& n);
double moment(const Field& n, int k);

// Shortest round-trip decimal representation.
std::string fmt_double(double v);

// CSV with '#' header lines, then a column header row, then rows.
void write_csv(std::ostream& os,
               const std::vector<std::pair<std::string, std::string>>& header,
               const std::vector<std::string>& columns,
               const std::vector<const std::vector<double>*>& data);

std::vector<std::pair<std::string, std::string>> grid_header(const Grid1D& g);

}  // namespace sqh::numerics
