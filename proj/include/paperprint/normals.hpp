#pragma once

#include <Eigen/Core>

#include "paperprint/grid.hpp"

namespace paperprint {

/// Per-pixel unit surface normals. Invariants: |n| = 1 within 1e-9 and
/// n_z > 0 (n_z == 0 is admitted only for pixels clamped by z-completion).
struct NormalField
{
    Grid nx;
    Grid ny;
    Grid nz;
    double pixel_pitch = 1.0; ///< µm per pixel

    std::size_t rows() const { return nx.rows(); }
    std::size_t cols() const { return nx.cols(); }

    Eigen::Vector3d at(std::size_t r, std::size_t c) const { return {nx(r, c), ny(r, c), nz(r, c)}; }
    void set(std::size_t r, std::size_t c, const Eigen::Vector3d& n)
    {
        nx(r, c) = n.x();
        ny(r, c) = n.y();
        nz(r, c) = n.z();
    }

    static NormalField constant(std::size_t rows, std::size_t cols, const Eigen::Vector3d& n, double pitch = 1.0)
    {
        return {Grid(rows, cols, n.x()), Grid(rows, cols, n.y()), Grid(rows, cols, n.z()), pitch};
    }
};

/// Throws std::invalid_argument unless components share a shape and every
/// normal is unit length within tol.
void validate_normals(const NormalField& nf, double tol = 1e-9);

} // namespace paperprint
