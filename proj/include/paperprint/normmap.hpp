#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "paperprint/grid.hpp"
#include "paperprint/normals.hpp"
#include "paperprint/optics.hpp"

namespace paperprint::normmap {

enum class MapSource { scanner, confocal, deblurred };

/// Scaled in-plane normal components (n_x^(s), n_y^(s)).
struct NormMap
{
    Grid nx_scaled;
    Grid ny_scaled;
    MapSource source = MapSource::scanner;
};

enum class KernelKind { deblur, blur };

/// Odd-sized square convolution kernel; entry (i, j) is the tap at row
/// offset i - k/2 and column offset j - k/2.
struct Kernel2D
{
    Grid coefficients;
    KernelKind kind = KernelKind::blur;

    std::size_t size() const { return coefficients.rows(); }
};

/// Opposed-scan difference estimator. Requires exactly one scan per
/// orientation 0/90/180/270; 90/180/270 are rotated back to the 0° frame.
NormMap estimate_normmap(std::span<const optics::ScanImage> scans);

/// Least-squares scale between scanner and confocal component deviations.
double estimate_alpha(double sx_s, double sy_s, double sx_c, double sy_c);

/// estimate_alpha from the component standard deviations of two maps.
double estimate_alpha(const NormMap& scanner, const NormMap& confocal);

NormMap normmap_from_normals(const NormalField& nf, MapSource source = MapSource::confocal);

struct Completion
{
    NormalField normals;
    std::size_t clamped = 0; ///< pixels whose radicand was negative
};

/// Divides by alpha and completes n_z. Pixels with a negative radicand are
/// projected onto the unit circle with n_z = 0 and counted.
Completion complete_z(const NormMap& nm, double alpha);

/// 2-D convolution (kernel flipped), same-size output, reflect padding.
Grid convolve_same(const Grid& map, const Kernel2D& k);

/// 20 log-spaced ridge penalties in [1e-6, 1e2].
std::vector<double> default_lambda_grid();

struct DeblurOptions
{
    int size = 7;
    std::vector<double> lambda_grid = default_lambda_grid();
    int folds = 10;
    std::uint64_t seed = 1;
};

struct DeblurFit
{
    Kernel2D kernel;
    double lambda = 0.0;
    std::vector<double> cv_mean; ///< per lambda, held-out mean squared error
    std::vector<double> cv_se;   ///< per lambda, standard error over folds
    double rms_residual = 0.0;   ///< RMS of C - H*S over the regression rows
    std::size_t regression_rows = 0;
};

/// Ridge-regression deblur filter H with C ≈ H * S. The penalty applies to
/// the per-row mean squared loss; lambda is chosen by k-fold CV with the
/// one-standard-error rule, then the filter is refit on all rows. Rows
/// whose window leaves the grid (a size/2 border) are excluded.
DeblurFit fit_deblur_filter(const Grid& S, const Grid& C, const DeblurOptions& opts = {});

/// Non-negative blur kernel H with S ≈ H * C (Lawson-Hanson active set).
Kernel2D fit_blur_filter_nnls(const Grid& C, const Grid& S, int size = 7);

/// Solves min |A x - b| s.t. x >= 0 given G = A^T A and g = A^T b.
/// Iterates until the KKT residual is at most kkt_tol.
Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, double kkt_tol = 1e-8);

struct GaussianKernelFit
{
    double mu_x = 0.0;
    double mu_y = 0.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double amplitude = 1.0; ///< scale between the blurred reference and S
    double cost = 0.0;      ///< residual sum of squares
    bool converged = false;
};

inline constexpr double kMinGaussianSigma = 0.05;

/// Unit-sum size x size sampled Gaussian with the given center and spread.
Kernel2D gaussian_kernel(double mu_x, double mu_y, double sigma_x, double sigma_y, int size = 7);

class GaussianFitError : public std::runtime_error
{
public:
    GaussianFitError(const std::string& what, GaussianKernelFit best) : std::runtime_error(what), best_(best) {}
    const GaussianKernelFit& best() const { return best_; }

private:
    GaussianKernelFit best_;
};

/// Parametric blur fit S ≈ amplitude * G(mu, sigma) * C with multistart
/// (sigma = 1, mu uniform in [-0.5, 0.5]) and sigma >= kMinGaussianSigma.
GaussianKernelFit fit_blur_gaussian(const Grid& C, const Grid& S, int restarts = 8, std::uint64_t seed = 1,
                                    int size = 7);

/// Gaussian parameters of a given kernel (least squares on its taps).
GaussianKernelFit kernel_gaussian_spread(const Kernel2D& k);

} // namespace paperprint::normmap
