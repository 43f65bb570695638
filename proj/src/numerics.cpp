#include "sqh/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sqh::numerics {

Grid1D Grid1D::make(double q_min, double q_max, std::size_t n_points)
{
    if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_min < q_max))
        throw std::invalid_argument("grid requires finite q_min < q_max");
    if (n_points < 8) throw std::invalid_argument("grid requires at least 8 points");
    return Grid1D{q_min, q_max, n_points};
}

std::vector<double> Grid1D::nodes() const
{
    std::vector<double> out(n_points);
    for (std::size_t i = 0; i < n_points; ++i) out[i] = x(i);
    return out;
}

Field::Field(const Grid1D& g, std::vector<double> v) : grid(g), values(std::move(v))
{
    if (values.size() != grid.n_points) throw std::invalid_argument("field size does not match grid");
}

double Field::max() const
{
    double m = -INFINITY;
    for (double v : values) m = std::max(m, v);
    return m;
}

std::vector<double> fd_weights(double z, const std::vector<double>& x, int m)
{
    const int n = static_cast<int>(x.size()) - 1;
    std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = c[i][m];
    return w;
}

Field derivative(const Field& f, int order, int accuracy)
{
    if (order != 1 && order != 2) throw std::invalid_argument("derivative order must be 1 or 2");
    if (accuracy < 2 || accuracy % 2 != 0) throw std::invalid_argument("accuracy must be even and >= 2");
    const std::size_t n = f.size();
    while (static_cast<std::size_t>(order + accuracy) > n && accuracy > 2) accuracy -= 2;

    const int p = accuracy / 2;
    const int s = order + accuracy;  // one-sided stencil length
    const double scale = std::pow(f.grid.dq(), -order);
    Field out(f.grid);

    std::vector<double> central_x;
    for (int k = -p; k <= p; ++k) central_x.push_back(k);
    const auto wc = fd_weights(0.0, central_x, order);

    std::vector<double> side_x(s);
    for (int k = 0; k < s; ++k) side_x[k] = k;

    const auto& v = f.values;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<long>(i);
        double acc = 0.0;
        if (ii >= p && ii + p < static_cast<long>(n)) {
            for (int k = 0; k < 2 * p + 1; ++k) acc += wc[k] * v[i - p + k];
        } else if (ii < p) {
            const auto w = fd_weights(static_cast<double>(i), side_x, order);
            for (int k = 0; k < s; ++k) acc += w[k] * v[k];
        } else {
            const std::size_t start = n - s;
            const auto w = fd_weights(static_cast<double>(i - start), side_x, order);
            for (int k = 0; k < s; ++k) acc += w[k] * v[start + k];
        }
        out.values[i] = acc * scale;
    }
    return out;
}

double integrate(const Grid1D& g, const std::vector<double>& v)
{
    if (v.empty()) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
    return s * g.dq();
}

double integrate(const Field& f) { return integrate(f.grid, f.values); }

NormalizeResult normalize_checked(const Field& n, double truncation_threshold)
{
    const double z = integrate(n);
    if (!(z > 0.0) || !std::isfinite(z)) throw std::invalid_argument("cannot normalize a density with non-positive integral");
    NormalizeResult r{n, z, z < truncation_threshold};
    for (double& v : r.density.values) v /= z;
    return r;
}

Field normalize(const Field& n) { return normalize_checked(n).density; }

std::vector<double> log_floored(const Field& n, double eps)
{
    const double floor = eps * std::max(n.max(), 0.0);
    std::vector<double> out(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double v = std::max(n.values[i], floor);
        out[i] = v > 0.0 ? std::log(v) : std::log(std::numeric_limits<double>::min());
    }
    return out;
}

double interpolate(const Field& f, double x)
{
    const auto& g = f.grid;
    if (x <= g.q_min) return f.values.front();
    if (x >= g.q_max) return f.values.back();
    const double u = (x - g.q_min) / g.dq();
    auto i = static_cast<std::size_t>(u);
    if (i >= g.n_points - 1) i = g.n_points - 2;
    const double t = u - static_cast<double>(i);
    return (1.0 - t) * f.values[i] + t * f.values[i + 1];
}

double l1_distance(const Field& a, const Field& b)
{
    if (!(a.grid == b.grid)) throw std::invalid_argument("l1_distance: grid mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a.values[i] - b.values[i]);
    return integrate(a.grid, d);
}

double moment(const Field& n, int k)
{
    std::vector<double> w(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) w[i] = n.values[i] * std::pow(n.grid.x(i), k);
    return integrate(n.grid, w) / integrate(n);
}

double mean(const Field& n) { return moment(n, 1); }

double variance(const Field& n)
{
    const double m = mean(n);
    std::vector<double> w(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double d = n.grid.x(i) - m;
        w[i] = n.values[i] * d * d;
    }
    return integrate(n.grid, w) / integrate(n);
}

std::string fmt_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os,
               const std::vector<std::pair<std::string, std::string>>& header,
               const std::vector<std::string>& columns,
               const std::vector<const std::vector<double>*>& data)
{
    for (const auto& [k, v] : header) os << "# " << k << " = " << v << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    const std::size_t rows = data.empty() ? 0 : data.front()->size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < data.size(); ++c) os << (c ? "," : "") << fmt_double((*data[c])[r]);
        os << '\n';
    }
}

std::vector<std::pair<std::string, std::string>> grid_header(const Grid1D& g)
{
    return {{"q_min", fmt_double(g.q_min)},
            {"q_max", fmt_double(g.q_max)},
            {"n_points", std::to_string(g.n_points)},
            {"dq", fmt_double(g.dq())}};
}

}  // namespace sqh::numerics
