#include "paperprint/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace paperprint {

Grid& Grid::operator+=(const Grid& other)
{
    require_same_shape(*this, other, "Grid::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

Grid& Grid::operator-=(const Grid& other)
{
    require_same_shape(*this, other, "Grid::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= other.data_[i];
    return *this;
}

Grid& Grid::operator*=(double k)
{
    for (double& v : data_)
        v *= k;
    return *this;
}

double mean(const Grid& g)
{
    if (g.empty())
        throw std::invalid_argument("mean: empty grid");
    auto v = g.values();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const Grid& g)
{
    const double m = mean(g);
    double acc = 0.0;
    for (double v : g.values())
        acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(g.size()));
}

double min_value(const Grid& g)
{
    auto v = g.values();
    return *std::min_element(v.begin(), v.end());
}

double max_value(const Grid& g)
{
    auto v = g.values();
    return *std::max_element(v.begin(), v.end());
}

bool all_finite(const Grid& g)
{
    auto v = g.values();
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Grid crop(const Grid& g, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols)
{
    if (row0 + rows > g.rows() || col0 + cols > g.cols())
        throw std::out_of_range("crop: window exceeds grid");
    Grid out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out(r, c) = g(row0 + r, col0 + c);
    return out;
}

Grid center_crop(const Grid& g, std::size_t rows, std::size_t cols)
{
    if (rows > g.rows() || cols > g.cols())
        throw std::out_of_range("center_crop: window exceeds grid");
    return crop(g, (g.rows() - rows) / 2, (g.cols() - cols) / 2, rows, cols);
}

int quarter_turns_from_degrees(int degrees)
{
    switch (degrees) {
    case 0: return 0;
    case 90: return 1;
    case 180: return 2;
    case 270: return 3;
    default: throw std::invalid_argument("orientation must be 0, 90, 180 or 270 degrees");
    }
}

Grid rotate_quarter_turns(const Grid& g, int quarter_turns)
{
    const int q = ((quarter_turns % 4) + 4) % 4;
    const std::size_t R = g.rows();
    const std::size_t C = g.cols();
    switch (q) {
    case 0:
        return g;
    case 1: {
        Grid out(C, R);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                out(c, R - 1 - r) = g(r, c);
        return out;
    }
    case 2: {
        Grid out(R, C);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                out(R - 1 - r, C - 1 - c) = g(r, c);
        return out;
    }
    default: {
        Grid out(C, R);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                out(C - 1 - c, r) = g(r, c);
        return out;
    }
    }
}

void require_same_shape(const Grid& a, const Grid& b, const char* what)
{
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": grid shapes differ (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}

} // namespace paperprint
