#include "paperprint/normmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "paperprint/filter.hpp"
#include "paperprint/rng.hpp"

namespace paperprint::normmap {

NormMap estimate_normmap(std::span<const optics::ScanImage> scans)
{
    std::array<const optics::ScanImage*, 4> by_turn{};
    for (const auto& s : scans) {
        const int q = quarter_turns_from_degrees(s.orientation);
        if (by_turn[q])
            throw std::invalid_argument("estimate_normmap: duplicate orientation");
        by_turn[q] = &s;
    }
    for (const auto* s : by_turn)
        if (!s)
            throw std::invalid_argument("estimate_normmap: missing orientation");

    std::array<Grid, 4> aligned;
    for (int q = 0; q < 4; ++q)
        aligned[q] = rotate_quarter_turns(by_turn[q]->intensities, -q);
    for (int q = 1; q < 4; ++q)
        require_same_shape(aligned[0], aligned[q], "estimate_normmap");
    return {aligned[1] - aligned[3], aligned[0] - aligned[2], MapSource::scanner};
}

double estimate_alpha(double sx_s, double sy_s, double sx_c, double sy_c)
{
    if (!(sx_s > 0.0) || !(sy_s > 0.0) || !(sx_c > 0.0) || !(sy_c > 0.0))
        throw std::domain_error("estimate_alpha: standard deviations must be positive");
    return (sx_s * sx_c + sy_s * sy_c) / (sx_c * sx_c + sy_c * sy_c);
}

double estimate_alpha(const NormMap& scanner, const NormMap& confocal)
{
    return estimate_alpha(stddev(scanner.nx_scaled), stddev(scanner.ny_scaled), stddev(confocal.nx_scaled),
                          stddev(confocal.ny_scaled));
}

NormMap normmap_from_normals(const NormalField& nf, MapSource source)
{
    return {nf.nx, nf.ny, source};
}

Completion complete_z(const NormMap& nm, double alpha)
{
    constexpr double kRadicandTolerance = 1e-12;
    if (!(alpha > 0.0))
        throw std::domain_error("complete_z: alpha must be positive");
    require_same_shape(nm.nx_scaled, nm.ny_scaled, "complete_z");
    const std::size_t R = nm.nx_scaled.rows();
    const std::size_t C = nm.nx_scaled.cols();
    Completion out{{Grid(R, C), Grid(R, C), Grid(R, C), 1.0}, 0};
    for (std::size_t i = 0; i < nm.nx_scaled.size(); ++i) {
        double x = nm.nx_scaled.values()[i] / alpha;
        double y = nm.ny_scaled.values()[i] / alpha;
        const double rad = 1.0 - x * x - y * y;
        double z = 0.0;
        if (rad >= 0.0) {
            z = std::sqrt(rad);
        } else {
            const double r = std::hypot(x, y);
            x /= r;
            y /= r;
            if (rad < -kRadicandTolerance) // rounding on the unit circle is not a clamp
                ++out.clamped;
        }
        out.normals.nx.values()[i] = x;
        out.normals.ny.values()[i] = y;
        out.normals.nz.values()[i] = z;
    }
    return out;
}

namespace {

void require_odd_square(const Kernel2D& k, const char* what)
{
    if (k.coefficients.rows() != k.coefficients.cols() || k.coefficients.rows() % 2 == 0)
        throw std::invalid_argument(std::string(what) + ": kernel must be odd and square");
}

void require_fit_inputs(const Grid& a, const Grid& b, int size, const char* what)
{
    require_same_shape(a, b, what);
    if (size < 1 || size % 2 == 0)
        throw std::invalid_argument(std::string(what) + ": kernel size must be odd");
    if (a.rows() < 50 || a.cols() < 50)
        throw std::invalid_argument(std::string(what) + ": grids must be at least 50x50");
}

/// Regression design of a true convolution: row (r, c) holds
/// src(r - di, c - dj) for every tap offset (di, dj), interior pixels only.
struct Design
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Design build_design(const Grid& src, const Grid& target, int size)
{
    const std::size_t h = static_cast<std::size_t>(size / 2);
    const std::size_t R = src.rows();
    const std::size_t C = src.cols();
    const std::size_t n = (R - 2 * h) * (C - 2 * h);
    Design d{Eigen::MatrixXd(n, size * size), Eigen::VectorXd(n)};
    std::size_t row = 0;
    for (std::size_t r = h; r + h < R; ++r) {
        for (std::size_t c = h; c + h < C; ++c, ++row) {
            d.y(row) = target(r, c);
            for (int i = 0; i < size; ++i)
                for (int j = 0; j < size; ++j)
                    d.X(row, i * size + j) = src(r + h - i, c + h - j);
        }
    }
    return d;
}

Kernel2D kernel_from_vector(const Eigen::VectorXd& v, int size, KernelKind kind)
{
    Kernel2D k{Grid(size, size), kind};
    for (int i = 0; i < size * size; ++i)
        k.coefficients.values()[i] = v(i);
    return k;
}

void require_nonsingular(const Eigen::MatrixXd& G, const char* what)
{
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    if (!(hi > 0.0) || lo <= 1e-12 * hi)
        throw std::domain_error(std::string(what) + ": singular normal equations");
}

} // namespace

Grid convolve_same(const Grid& map, const Kernel2D& k)
{
    require_odd_square(k, "convolve_same");
    const long long K = static_cast<long long>(k.size());
    const long long h = K / 2;
    const std::size_t R = map.rows();
    const std::size_t C = map.cols();
    Grid out(R, C);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (long long i = 0; i < K; ++i) {
                const std::size_t rr = reflect_index(static_cast<long long>(r) + h - i, R);
                for (long long j = 0; j < K; ++j)
                    acc += k.coefficients(i, j) * map(rr, reflect_index(static_cast<long long>(c) + h - j, C));
            }
            out(r, c) = acc;
        }
    }
    return out;
}

std::vector<double> default_lambda_grid()
{
    std::vector<double> grid(20);
    for (int i = 0; i < 20; ++i)
        grid[i] = std::pow(10.0, -6.0 + 8.0 * i / 19.0);
    return grid;
}

DeblurFit fit_deblur_filter(const Grid& S, const Grid& C, const DeblurOptions& opts)
{
    require_fit_inputs(S, C, opts.size, "fit_deblur_filter");
    if (opts.folds < 2)
        throw std::invalid_argument("fit_deblur_filter: need at least 2 folds");
    if (opts.lambda_grid.empty())
        throw std::invalid_argument("fit_deblur_filter: empty lambda grid");
    for (double l : opts.lambda_grid)
        if (!(l >= 0.0))
            throw std::invalid_argument("fit_deblur_filter: lambda must be >= 0");

    const Design d = build_design(S, C, opts.size);
    const auto n = static_cast<std::size_t>(d.X.rows());
    const auto p = d.X.cols();
    const Eigen::MatrixXd G = d.X.transpose() * d.X;
    const Eigen::VectorXd b = d.X.transpose() * d.y;
    require_nonsingular(G, "fit_deblur_filter");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(opts.seed, {0xDEB1}));
    std::shuffle(order.begin(), order.end(), rng);

    const int K = opts.folds;
    std::vector<Eigen::MatrixXd> Gf(K, Eigen::MatrixXd::Zero(p, p));
    std::vector<Eigen::VectorXd> bf(K, Eigen::VectorXd::Zero(p));
    std::vector<double> yy(K, 0.0);
    std::vector<std::size_t> nf(K, 0);
    for (int f = 0; f < K; ++f) {
        std::vector<Eigen::Index> idx;
        for (std::size_t i = f; i < n; i += K)
            idx.push_back(static_cast<Eigen::Index>(order[i]));
        const Eigen::MatrixXd Xf = d.X(idx, Eigen::all);
        const Eigen::VectorXd yf = d.y(idx);
        Gf[f] = Xf.transpose() * Xf;
        bf[f] = Xf.transpose() * yf;
        yy[f] = yf.squaredNorm();
        nf[f] = idx.size();
    }

    DeblurFit fit;
    fit.regression_rows = n;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
    for (double lambda : opts.lambda_grid) {
        std::vector<double> errs(K);
        for (int f = 0; f < K; ++f) {
            const double ntr = static_cast<double>(n - nf[f]);
            const Eigen::VectorXd h = ((G - Gf[f]) / ntr + lambda * I).ldlt().solve((b - bf[f]) / ntr);
            errs[f] = (yy[f] - 2.0 * h.dot(bf[f]) + h.dot(Gf[f] * h)) / static_cast<double>(nf[f]);
        }
        const double m = std::accumulate(errs.begin(), errs.end(), 0.0) / K;
        double ss = 0.0;
        for (double e : errs)
            ss += (e - m) * (e - m);
        fit.cv_mean.push_back(m);
        fit.cv_se.push_back(std::sqrt(ss / (K - 1)) / std::sqrt(static_cast<double>(K)));
    }

    const auto best = static_cast<std::size_t>(
        std::min_element(fit.cv_mean.begin(), fit.cv_mean.end()) - fit.cv_mean.begin());
    const double limit = fit.cv_mean[best] + fit.cv_se[best];
    std::size_t pick = best;
    for (std::size_t i = 0; i < opts.lambda_grid.size(); ++i)
        if (fit.cv_mean[i] <= limit && opts.lambda_grid[i] > opts.lambda_grid[pick])
            pick = i;
    fit.lambda = opts.lambda_grid[pick];

    const double dn = static_cast<double>(n);
    const Eigen::VectorXd h = (G / dn + fit.lambda * I).ldlt().solve(b / dn);
    fit.kernel = kernel_from_vector(h, opts.size, KernelKind::deblur);
    fit.rms_residual = std::sqrt((d.y - d.X * h).squaredNorm() / dn);
    return fit;
}

Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& g, double kkt_tol)
{
    const Eigen::Index p = g.size();
    if (G.rows() != p || G.cols() != p)
        throw std::invalid_argument("nnls_gram: dimension mismatch");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
    std::vector<bool> passive(p, false);

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < p; ++j)
            if (passive[j])
                idx.push_back(j);
        z.setZero(p);
        if (idx.empty())
            return;
        const Eigen::MatrixXd Gp = G(idx, idx);
        const Eigen::VectorXd gp = g(idx);
        const Eigen::VectorXd zp = Gp.ldlt().solve(gp);
        for (std::size_t k = 0; k < idx.size(); ++k)
            z(idx[k]) = zp(static_cast<Eigen::Index>(k));
    };

    const int max_outer = static_cast<int>(10 * p + 50);
    for (int outer = 0; outer < max_outer; ++outer) {
        const Eigen::VectorXd w = g - G * x;
        Eigen::Index j_max = -1;
        double w_max = kkt_tol;
        for (Eigen::Index j = 0; j < p; ++j)
            if (!passive[j] && w(j) > w_max) {
                w_max = w(j);
                j_max = j;
            }
        if (j_max < 0)
            break;
        passive[j_max] = true;

        Eigen::VectorXd z;
        for (int inner = 0; inner <= 3 * p; ++inner) {
            solve_passive(z);
            double step = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < p; ++j)
                if (passive[j] && z(j) <= 0.0) {
                    feasible = false;
                    step = std::min(step, x(j) / (x(j) - z(j)));
                }
            if (feasible) {
                x = z;
                break;
            }
            x += step * (z - x);
            for (Eigen::Index j = 0; j < p; ++j)
                if (passive[j] && x(j) <= 1e-15) {
                    passive[j] = false;
                    x(j) = 0.0;
                }
        }
    }
    return x;
}

Kernel2D fit_blur_filter_nnls(const Grid& C, const Grid& S, int size)
{
    require_fit_inputs(C, S, size, "fit_blur_filter_nnls");
    const Design d = build_design(C, S, size);
    const double n = static_cast<double>(d.X.rows());
    const Eigen::MatrixXd G = d.X.transpose() * d.X / n;
    const Eigen::VectorXd g = d.X.transpose() * d.y / n;
    require_nonsingular(G, "fit_blur_filter_nnls");
    return kernel_from_vector(nnls_gram(G, g), size, KernelKind::blur);
}

Kernel2D gaussian_kernel(double mu_x, double mu_y, double sigma_x, double sigma_y, int size)
{
    if (size < 1 || size % 2 == 0)
        throw std::invalid_argument("gaussian_kernel: size must be odd");
    if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
        throw std::invalid_argument("gaussian_kernel: sigmas must be positive");
    const int h = size / 2;
    Kernel2D k{Grid(size, size), KernelKind::blur};
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double dy = (i - h) - mu_y;
        for (int j = 0; j < size; ++j) {
            const double dx = (j - h) - mu_x;
            const double v = std::exp(-0.5 * (dx * dx / (sigma_x * sigma_x) + dy * dy / (sigma_y * sigma_y)));
            k.coefficients(i, j) = v;
            sum += v;
        }
    }
    k.coefficients *= 1.0 / sum;
    return k;
}

namespace {

/// Residual r(theta) = M * (a * vec(G(mu, sigma))) - y, theta = (mu_x, mu_y,
/// sigma_x, sigma_y, a); minimized by projected Levenberg-Marquardt.
struct GaussianProblem
{
    Eigen::MatrixXd M;
    Eigen::VectorXd y;
    double offset = 0.0; ///< constant added to |r|^2 to report the true cost
    int size = 7;

    Eigen::VectorXd residual(const Eigen::Matrix<double, 5, 1>& t) const
    {
        const Kernel2D k = gaussian_kernel(t(0), t(1), t(2), t(3), size);
        const Eigen::Map<const Eigen::VectorXd> v(k.coefficients.values().data(), size * size);
        return M * (t(4) * v) - y;
    }
};

void project(Eigen::Matrix<double, 5, 1>& t, int size)
{
    const double h = size / 2;
    t(0) = std::clamp(t(0), -h, h);
    t(1) = std::clamp(t(1), -h, h);
    t(2) = std::clamp(t(2), kMinGaussianSigma, 4.0 * size);
    t(3) = std::clamp(t(3), kMinGaussianSigma, 4.0 * size);
}

GaussianKernelFit levenberg_marquardt(const GaussianProblem& prob, Eigen::Matrix<double, 5, 1> t)
{
    project(t, prob.size);
    Eigen::VectorXd r = prob.residual(t);
    double cost = r.squaredNorm();
    double damping = 1e-3;
    bool converged = false;
    for (int iter = 0; iter < 500 && !converged; ++iter) {
        Eigen::MatrixXd J(r.size(), 5);
        for (int k = 0; k < 5; ++k) {
            const double step = 1e-6 * std::max(1.0, std::abs(t(k)));
            Eigen::Matrix<double, 5, 1> tp = t, tm = t;
            tp(k) += step;
            tm(k) -= step;
            J.col(k) = (prob.residual(tp) - prob.residual(tm)) / (2.0 * step);
        }
        const Eigen::Matrix<double, 5, 5> A = J.transpose() * J;
        const Eigen::Matrix<double, 5, 1> grad = J.transpose() * r;

        // Gradient vanishing on the free coordinates (bounds may be active).
        double free_grad = 0.0;
        for (int k = 0; k < 5; ++k) {
            const bool at_lower = (k == 2 || k == 3) && t(k) <= kMinGaussianSigma && grad(k) > 0.0;
            if (!at_lower)
                free_grad = std::max(free_grad, std::abs(grad(k)));
        }
        if (free_grad <= 1e-12 * std::max(1.0, cost)) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (damping < 1e12) {
            Eigen::Matrix<double, 5, 5> D = A;
            for (int k = 0; k < 5; ++k)
                D(k, k) += damping * std::max(A(k, k), 1e-12);
            Eigen::Matrix<double, 5, 1> cand = t - D.ldlt().solve(grad);
            project(cand, prob.size);
            const Eigen::VectorXd rc = prob.residual(cand);
            const double cc = rc.squaredNorm();
            if (cc < cost) {
                const double rel = (cost - cc) / std::max(cost, 1e-300);
                const double move = (cand - t).norm();
                t = cand;
                r = rc;
                cost = cc;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (rel <= 1e-12 || move <= 1e-10)
                    converged = true;
                break;
            }
            damping *= 4.0;
        }
        if (!accepted)
            converged = true; // no descent direction left at machine precision
    }
    return {t(0), t(1), t(2), t(3), t(4), cost + prob.offset, converged};
}

} // namespace

GaussianKernelFit fit_blur_gaussian(const Grid& C, const Grid& S, int restarts, std::uint64_t seed, int size)
{
    if (restarts < 1)
        throw std::invalid_argument("fit_blur_gaussian: restarts must be >= 1");
    require_fit_inputs(C, S, size, "fit_blur_gaussian");
    const Design d = build_design(C, S, size);
    const double n = static_cast<double>(d.X.rows());
    const Eigen::MatrixXd G = d.X.transpose() * d.X / n;
    const Eigen::VectorXd g = d.X.transpose() * d.y / n;
    require_nonsingular(G, "fit_blur_gaussian");

    // |S - X k|^2 / n = |L^T k - L^-1 g|^2 + const with G = L L^T.
    const Eigen::LLT<Eigen::MatrixXd> llt(G);
    GaussianProblem prob;
    prob.M = llt.matrixU();
    prob.y = llt.matrixL().solve(g);
    prob.offset = d.y.squaredNorm() / n - prob.y.squaredNorm();
    prob.size = size;

    Rng rng(derive_seed(seed, {0xB1C5}));
    std::uniform_real_distribution<double> start_mu(-0.5, 0.5);
    GaussianKernelFit best;
    best.cost = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int i = 0; i < restarts; ++i) {
        Eigen::Matrix<double, 5, 1> t;
        t << start_mu(rng), start_mu(rng), 1.0, 1.0, 1.0;
        const Kernel2D k0 = gaussian_kernel(t(0), t(1), t(2), t(3), size);
        const Eigen::Map<const Eigen::VectorXd> v(k0.coefficients.values().data(), size * size);
        const double denom = v.dot(G * v);
        t(4) = denom > 0.0 ? v.dot(g) / denom : 1.0;
        const GaussianKernelFit fit = levenberg_marquardt(prob, t);
        const bool better = fit.converged && (!any_converged || fit.cost < best.cost);
        if (better || (!any_converged && !fit.converged && fit.cost < best.cost))
            best = fit;
        any_converged = any_converged || fit.converged;
    }
    if (!any_converged)
        throw GaussianFitError("fit_blur_gaussian: no restart converged", best);
    return best;
}

GaussianKernelFit kernel_gaussian_spread(const Kernel2D& k)
{
    require_odd_square(k, "kernel_gaussian_spread");
    const int size = static_cast<int>(k.size());
    GaussianProblem prob;
    prob.M = Eigen::MatrixXd::Identity(size * size, size * size);
    prob.y = Eigen::Map<const Eigen::VectorXd>(k.coefficients.values().data(), size * size);
    prob.size = size;
    Eigen::Matrix<double, 5, 1> t;
    t << 0.0, 0.0, 1.0, 1.0, prob.y.sum();
    GaussianKernelFit fit = levenberg_marquardt(prob, t);
    if (!fit.converged)
        throw GaussianFitError("kernel_gaussian_spread: fit did not converge", fit);
    return fit;
}

} // namespace paperprint::normmap
