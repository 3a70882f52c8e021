#include "certsmooth/stats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace certsmooth {

SignificanceLevel::SignificanceLevel(double alpha) : alpha_(alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("significance level must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
}

double std_normal_cdf(double z) noexcept
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_sf(double z) noexcept
{
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace {

// Acklam's rational approximation for the lower half, polished with Halley steps.
double inv_lower_half(double p)
{
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

    const double sqrt_2pi = std::sqrt(2.0 * std::numbers::pi);
    for (int it = 0; it < 2; ++it) {
        const double e = std_normal_cdf(x) - p;
        const double u = e * sqrt_2pi * std::exp(0.5 * x * x);
        if (!std::isfinite(u)) {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

// Deviation of log(n!) from Stirling's formula.
double stirling_error(double n)
{
    static constexpr std::array<double, 16> table{
        0.0,
        0.08106146679532725821967026,
        0.04134069595540929409382208,
        0.02767792568499833914878929,
        0.02079067210376509311152277,
        0.01664469118982119216319487,
        0.01387612882307074799874573,
        0.01189670994589177009505572,
        0.01041126526197209649747857,
        0.009255462182712732917728637,
        0.008330563433362871256469319,
        0.007573675487951840794972024,
        0.006942840107209529865664153,
        0.006408994188004207068439631,
        0.005951370112758847735624416,
        0.00555473355196280137103869,
    };
    constexpr double s0 = 1.0 / 12.0;
    constexpr double s1 = 1.0 / 360.0;
    constexpr double s2 = 1.0 / 1260.0;
    constexpr double s3 = 1.0 / 1680.0;
    constexpr double s4 = 1.0 / 1188.0;

    if (n <= 15.0) {
        return table[static_cast<std::size_t>(n)];
    }
    const double nn = n * n;
    if (n > 500.0) return (s0 - s1 / nn) / n;
    if (n > 80.0) return (s0 - (s1 - s2 / nn) / nn) / n;
    if (n > 35.0) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

// x log(x / np) + np - x, accurate when x is close to np.
double deviance_term(double x, double np)
{
    if (std::abs(x - np) < 0.1 * (x + np)) {
        double v = (x - np) / (x + np);
        double s = (x - np) * v;
        double ej = 2.0 * x * v;
        v *= v;
        for (int j = 1; j < 1000; ++j) {
            ej *= v;
            const double s1 = s + ej / (2 * j + 1);
            if (s1 == s) {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    return x * std::log(x / np) + np - x;
}

void check_counts(std::uint64_t k, std::uint64_t n, const char* what)
{
    if (n == 0) {
        throw std::domain_error(std::string(what) + ": zero trials");
    }
    if (k > n) {
        throw std::domain_error(std::string(what) + ": successes exceed trials");
    }
}

} // namespace

double inv_std_normal_cdf(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("inv_std_normal_cdf: probability must lie in (0, 1), got " +
                                std::to_string(p));
    }
    if (p > 0.5) {
        return -inv_lower_half(1.0 - p);
    }
    return inv_lower_half(p);
}

double binomial_log_pmf(std::uint64_t k, std::uint64_t n, double p)
{
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (k > n) return neg_inf;
    const double q = 1.0 - p;
    if (p <= 0.0) return k == 0 ? 0.0 : neg_inf;
    if (p >= 1.0) return k == n ? 0.0 : neg_inf;
    if (n == 0) return 0.0;

    const double nd = static_cast<double>(n);
    if (k == 0) {
        return p < 0.1 ? -deviance_term(nd, nd * q) - nd * p : nd * std::log(q);
    }
    if (k == n) {
        return q < 0.1 ? -deviance_term(nd, nd * p) - nd * q : nd * std::log(p);
    }
    const double kd = static_cast<double>(k);
    const double rest = nd - kd;
    const double lc = stirling_error(nd) - stirling_error(kd) - stirling_error(rest) -
                      deviance_term(kd, nd * p) - deviance_term(rest, nd * q);
    const double lf = std::log(2.0 * std::numbers::pi) + std::log(kd) + std::log1p(-kd / nd);
    return lc - 0.5 * lf;
}

double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p)
{
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;

    // Terms are summed relative to the largest one in [k, n].
    const double nd = static_cast<double>(n);
    const auto mode = static_cast<std::uint64_t>(std::floor((nd + 1.0) * p));
    const std::uint64_t start = std::max(k, std::min(mode, n));
    const double odds = p / (1.0 - p);
    constexpr double eps = 1e-17;

    double sum = 1.0;
    double term = 1.0;
    for (std::uint64_t i = start; i < n; ++i) {
        term *= static_cast<double>(n - i) / static_cast<double>(i + 1) * odds;
        sum += term;
        if (term < eps * sum) break;
    }
    term = 1.0;
    for (std::uint64_t i = start; i > k; --i) {
        term *= static_cast<double>(i) / static_cast<double>(n - i + 1) / odds;
        sum += term;
        if (term < eps * sum) break;
    }
    const double tail = std::exp(binomial_log_pmf(start, n, p) + std::log(sum));
    return std::min(tail, 1.0);
}

double binom_p_value(std::uint64_t k, std::uint64_t n)
{
    check_counts(k, n, "binom_p_value");
    return binomial_upper_tail(k, n, 0.5);
}

double clopper_pearson_lower(std::uint64_t k, std::uint64_t n, SignificanceLevel alpha)
{
    check_counts(k, n, "clopper_pearson_lower");
    if (k == 0) return 0.0;
    const double a = alpha.value();
    if (k == n) return std::pow(a, 1.0 / static_cast<double>(n));

    // Invariant: tail(lo) <= alpha < tail(hi).
    double lo = 0.0;
    double hi = 1.0;
    const double mle = static_cast<double>(k) / static_cast<double>(n);
    if (binomial_upper_tail(k, n, mle) > a) {
        hi = mle;
    }
    constexpr double tol = 1e-12;
    for (int it = 0; it < 200 && hi - lo > tol * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (binomial_upper_tail(k, n, mid) <= a) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

double clopper_pearson_upper(std::uint64_t k, std::uint64_t n, SignificanceLevel alpha)
{
    check_counts(k, n, "clopper_pearson_upper");
    return 1.0 - clopper_pearson_lower(n - k, n, alpha);
}

} // namespace certsmooth
