#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace paperprint {

/// Row-major 2-D grid of doubles. Row index is y (down), column index is x.
class Grid
{
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }
    Grid(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("Grid: payload size does not match shape");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool same_shape(const Grid& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    Grid& operator+=(const Grid& other);
    Grid& operator-=(const Grid& other);
    Grid& operator*=(double k);

    friend Grid operator+(Grid a, const Grid& b) { return a += b; }
    friend Grid operator-(Grid a, const Grid& b) { return a -= b; }
    friend Grid operator*(Grid a, double k) { return a *= k; }
    friend Grid operator*(double k, Grid a) { return a *= k; }

    bool operator==(const Grid& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double mean(const Grid& g);
/// Population (1/n) standard deviation.
double stddev(const Grid& g);
double min_value(const Grid& g);
double max_value(const Grid& g);
bool all_finite(const Grid& g);

Grid crop(const Grid& g, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols);
Grid center_crop(const Grid& g, std::size_t rows, std::size_t cols);

/// Spatial rotation of the grid content by a multiple of 90 degrees,
/// counter-clockwise in (x = col, y = row) coordinates, i.e. the point
/// (x, y) moves to (-y, x) for 90 degrees. Non-square grids swap shape.
Grid rotate_quarter_turns(const Grid& g, int quarter_turns);

/// Orientation in degrees must be one of 0, 90, 180, 270.
int quarter_turns_from_degrees(int degrees);

void require_same_shape(const Grid& a, const Grid& b, const char* what);

} // namespace paperprint
