#include "certsmooth/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "certsmooth/stats.hpp"

namespace certsmooth {

namespace {

void check_sigma(double sigma)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
}

std::size_t slot_of(const RegionLabel& label, std::size_t num_classes, LabelSpace space)
{
    return label.resolve(space).slot(num_classes);
}

std::size_t output_size(std::size_t num_classes, LabelSpace space)
{
    return space == LabelSpace::Extended ? num_classes + 1 : num_classes;
}

} // namespace

double gaussian_interval_mass(double a, double b) noexcept
{
    if (!(a < b)) return 0.0;
    // Difference of whichever tails are small.
    if (a >= 0.0) return std_normal_sf(a) - std_normal_sf(b);
    if (b <= 0.0) return std_normal_cdf(b) - std_normal_cdf(a);
    return 1.0 - std_normal_cdf(a) - std_normal_sf(b);
}

double linear_smoothed_prob(const LinearModel& m, std::span<const double> x, double sigma)
{
    m.validate();
    check_sigma(sigma);
    return std_normal_cdf(m.score(x) / (sigma * m.weight_norm()));
}

std::vector<double> linear_smoothed_probs(const LinearModel& m, std::span<const double> x, double sigma)
{
    m.validate();
    check_sigma(sigma);
    const double z = m.score(x) / (sigma * m.weight_norm());
    return {std_normal_sf(z), std_normal_cdf(z)};
}

double true_boundary_distance(const LinearModel& m, std::span<const double> x)
{
    m.validate();
    return std::abs(m.score(x)) / m.weight_norm();
}

std::vector<double> piecewise1d_smoothed_probs(const RegionClassifier1D& rc, double x, double sigma,
                                               LabelSpace space)
{
    check_sigma(sigma);
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto bps = rc.breakpoints();
    const auto labels = rc.labels();
    std::vector<double> out(output_size(rc.num_classes(), space), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double lo = i == 0 ? -inf : (bps[i - 1] - x) / sigma;
        const double hi = i == bps.size() ? inf : (bps[i] - x) / sigma;
        out[slot_of(labels[i], rc.num_classes(), space)] += gaussian_interval_mass(lo, hi);
    }
    return out;
}

std::vector<double> grid2d_smoothed_probs(const RegionClassifier2D& rc, std::span<const double> x,
                                          double sigma, LabelSpace space)
{
    check_sigma(sigma);
    check_input_dim(x, 2);
    std::vector<double> out(output_size(rc.num_classes(), space), 0.0);
    double boxed = 0.0;
    for (const LabeledBox& box : rc.boxes()) {
        double mass = 1.0;
        for (std::size_t axis = 0; axis < 2; ++axis) {
            mass *= gaussian_interval_mass((box.lo[axis] - x[axis]) / sigma,
                                           (box.hi[axis] - x[axis]) / sigma);
        }
        out[slot_of(box.label, rc.num_classes(), space)] += mass;
        boxed += mass;
    }
    out[slot_of(rc.fallback(), rc.num_classes(), space)] += std::max(0.0, 1.0 - boxed);
    return out;
}

} // namespace certsmooth
