#pragma once

#include <cstdint>

namespace certsmooth {

/// One-sided significance level of a statistical procedure, strictly inside (0, 1).
class SignificanceLevel {
public:
    constexpr SignificanceLevel() noexcept = default;

    /// Throws std::invalid_argument unless 0 < alpha < 1.
    explicit SignificanceLevel(double alpha);

    constexpr double value() const noexcept { return alpha_; }

    /// Bonferroni split of the level over two simultaneous bounds.
    SignificanceLevel halved() const { return SignificanceLevel(alpha_ / 2.0); }

    friend constexpr bool operator==(SignificanceLevel, SignificanceLevel) noexcept = default;

private:
    double alpha_ = 0.001;
};

/// Standard normal CDF.
double std_normal_cdf(double z) noexcept;

/// Upper tail 1 - Phi(z), evaluated without cancellation.
double std_normal_sf(double z) noexcept;

/// Inverse of the standard normal CDF.
/// Throws std::domain_error for p outside the open interval (0, 1).
double inv_std_normal_cdf(double p);

/// log P(Bin(n, p) = k), evaluated with the saddle-point expansion so that the
/// relative error of exp() of the result stays near machine precision even for
/// large n. Returns -inf for impossible outcomes.
double binomial_log_pmf(std::uint64_t k, std::uint64_t n, double p);

/// P(Bin(n, p) >= k). The sum runs outward from the mode of the summed range and
/// stops once terms fall below double resolution.
double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p);

/// One-sided p-value of k successes in n fair trials: P(Bin(n, 1/2) >= k).
/// Throws std::domain_error when n == 0 or k > n.
double binom_p_value(std::uint64_t k, std::uint64_t n);

/// Clopper-Pearson one-sided lower confidence bound at level 1 - alpha: the
/// largest L with P(Bin(n, L) >= k) <= alpha. Found by bisection on the exact
/// tail, so the returned value always satisfies the defining inequality.
/// Throws std::domain_error when n == 0 or k > n.
double clopper_pearson_lower(std::uint64_t k, std::uint64_t n, SignificanceLevel alpha);

/// 1 - clopper_pearson_lower(n - k, n, alpha).
double clopper_pearson_upper(std::uint64_t k, std::uint64_t n, SignificanceLevel alpha);

} // namespace certsmooth
