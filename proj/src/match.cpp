#include "paperprint/match.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace paperprint::match {

double correlation(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("correlation: length mismatch");
    if (a.size() < 2)
        throw std::invalid_argument("correlation: need at least two values");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        throw std::domain_error("correlation: constant input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double correlation(const Grid& a, const Grid& b)
{
    require_same_shape(a, b, "correlation");
    return correlation(a.values(), b.values());
}

namespace {

void moments(std::span<const double> x, double& mu, double& sigma, const char* which)
{
    if (x.size() < 2)
        throw std::invalid_argument(std::string("hypothesis_stats: need at least 2 ") + which + " scores");
    double m = 0.0;
    for (double v : x)
        m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x)
        ss += (v - m) * (v - m);
    sigma = std::sqrt(ss / static_cast<double>(x.size()));
    mu = m;
    if (!(sigma > 0.0))
        throw std::domain_error(std::string("hypothesis_stats: zero variance in ") + which + " scores");
}

void require_ordered(const MatchStats& s)
{
    if (s.mu0 > s.mu1)
        throw std::domain_error("EER: unmatched mean exceeds matched mean (labels inverted?)");
    if (!(s.sigma0 > 0.0) || !(s.sigma1 > 0.0))
        throw std::domain_error("EER: standard deviations must be positive");
}

ErrorRate from_log10(double l10)
{
    return {std::pow(10.0, l10), l10};
}

} // namespace

MatchStats hypothesis_stats(std::span<const double> matched, std::span<const double> unmatched)
{
    MatchStats s;
    moments(unmatched, s.mu0, s.sigma0, "unmatched");
    moments(matched, s.mu1, s.sigma1, "matched");
    s.n0 = unmatched.size();
    s.n1 = matched.size();
    s.lambda0 = std::numbers::sqrt2 / s.sigma0;
    s.lambda1 = std::numbers::sqrt2 / s.sigma1;
    return s;
}

double log10_normal_cdf(double x)
{
    if (x >= 0.0)
        return std::log10(0.5 * std::erfc(-x / std::numbers::sqrt2));
    const double t = -x / std::numbers::sqrt2;
    if (t < 25.0)
        return std::log10(0.5 * std::erfc(t));
    // erfc(t) ~ exp(-t^2) / (t sqrt(pi)) (1 - 1/(2t^2) + 3/(4t^4) - 15/(8t^6) + 105/(16t^8))
    const double u = 1.0 / (2.0 * t * t);
    const double series = 1.0 - u + 3.0 * u * u - 15.0 * u * u * u + 105.0 * u * u * u * u;
    const double ln = -t * t - std::log(t * std::sqrt(std::numbers::pi)) + std::log(series) + std::log(0.5);
    return ln / std::numbers::ln10;
}

ErrorRate eer_gaussian(const MatchStats& s)
{
    require_ordered(s);
    return from_log10(log10_normal_cdf((s.mu0 - s.mu1) / (s.sigma0 + s.sigma1)));
}

ErrorRate eer_laplace(const MatchStats& s)
{
    require_ordered(s);
    const double ln = std::log(0.5) + std::numbers::sqrt2 * (s.mu0 - s.mu1) / (s.sigma0 + s.sigma1);
    return from_log10(ln / std::numbers::ln10);
}

ErrorRate eer_laplace_rates(double mu0, double mu1, double lambda0, double lambda1)
{
    if (mu0 > mu1)
        throw std::domain_error("EER: unmatched mean exceeds matched mean (labels inverted?)");
    if (!(lambda0 > 0.0) || !(lambda1 > 0.0))
        throw std::domain_error("EER: Laplace rates must be positive");
    const double ln = std::log(0.5) + (mu0 - mu1) * lambda0 * lambda1 / (lambda0 + lambda1);
    return from_log10(ln / std::numbers::ln10);
}

double empirical_eer(std::span<const double> matched, std::span<const double> unmatched)
{
    if (matched.empty() || unmatched.empty())
        throw std::invalid_argument("empirical_eer: both score lists must be nonempty");
    std::vector<double> m(matched.begin(), matched.end());
    std::vector<double> u(unmatched.begin(), unmatched.end());
    std::sort(m.begin(), m.end());
    std::sort(u.begin(), u.end());
    std::vector<double> thresholds(m);
    thresholds.insert(thresholds.end(), u.begin(), u.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::nextafter(thresholds.back(), INFINITY));

    const double nm = static_cast<double>(m.size());
    const double nu = static_cast<double>(u.size());
    double prev_far = 1.0, prev_frr = 0.0;
    for (double t : thresholds) {
        const double far = static_cast<double>(u.end() - std::lower_bound(u.begin(), u.end(), t)) / nu;
        const double frr = static_cast<double>(std::lower_bound(m.begin(), m.end(), t) - m.begin()) / nm;
        const double d = far - frr;
        if (d <= 0.0) {
            const double prev_d = prev_far - prev_frr;
            const double w = prev_d > 0.0 ? prev_d / (prev_d - d) : 1.0;
            return prev_far + w * (far - prev_far);
        }
        prev_far = far;
        prev_frr = frr;
    }
    return 0.5;
}

EERReport evaluate(std::span<const double> matched, std::span<const double> unmatched, std::string feature_kind,
                   std::optional<int> subband_index)
{
    EERReport r;
    r.stats = hypothesis_stats(matched, unmatched);
    r.eer_gaussian = eer_gaussian(r.stats);
    r.eer_laplace = eer_laplace(r.stats);
    r.eer_empirical = empirical_eer(matched, unmatched);
    r.feature_kind = std::move(feature_kind);
    r.subband_index = subband_index;
    return r;
}

} // namespace paperprint::match
