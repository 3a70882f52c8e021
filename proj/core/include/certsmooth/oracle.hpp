#pragma once

#include <span>
#include <vector>

#include "certsmooth/classifier.hpp"

namespace certsmooth {

/// Gaussian measure of (a, b] under N(0, 1), accurate in both tails.
double gaussian_interval_mass(double a, double b) noexcept;

/// P(w.(x + eps) + b > 0) for eps ~ N(0, sigma^2 I), i.e. Phi((w.x + b) / (sigma |w|)).
/// Throws std::invalid_argument for a zero weight vector or sigma <= 0.
double linear_smoothed_prob(const LinearModel& m, std::span<const double> x, double sigma);

/// Smoothed base-class masses (class 0, class 1) of a LinearClassifier, each
/// tail evaluated directly so neither loses precision to cancellation.
std::vector<double> linear_smoothed_probs(const LinearModel& m, std::span<const double> x, double sigma);

/// |w.x + b| / |w|.
double true_boundary_distance(const LinearModel& m, std::span<const double> x);

/// Exact smoothed label masses of a 1D region classifier at x. Extended space
/// yields K + 1 entries (last = uncertainty class); Base yields K.
std::vector<double> piecewise1d_smoothed_probs(const RegionClassifier1D& rc, double x, double sigma,
                                               LabelSpace space = LabelSpace::Extended);

/// Exact smoothed label masses of a 2D box classifier: per box a product of
/// axis masses, the default label taking the remainder.
std::vector<double> grid2d_smoothed_probs(const RegionClassifier2D& rc, std::span<const double> x,
                                          double sigma, LabelSpace space = LabelSpace::Extended);

} // namespace certsmooth
