#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "certsmooth/classifier.hpp"
#include "certsmooth/noise.hpp"
#include "certsmooth/stats.hpp"

namespace certsmooth {

/// Knobs of the two-stage sampling procedure.
struct SamplingConfig {
    double sigma = 0.25;       ///< noise standard deviation, input units
    std::uint64_t n0 = 1000;   ///< selection-stage samples
    std::uint64_t n = 100000;  ///< estimation-stage samples
    SignificanceLevel alpha{}; ///< 0.001
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless sigma > 0, n0 >= 2 and n >= n0.
    void validate() const;
};

/// Per-label sample counts; slot K holds the uncertainty class.
class CountVector {
public:
    explicit CountVector(std::size_t num_classes) : counts_(num_classes + 1, 0) {}

    std::size_t num_classes() const noexcept { return counts_.size() - 1; }
    std::uint64_t total() const noexcept { return total_; }
    std::span<const std::uint64_t> slots() const noexcept { return counts_; }

    std::uint64_t operator[](ExtendedLabel label) const noexcept
    {
        return counts_[label.slot(num_classes())];
    }

    void add(ExtendedLabel label, std::uint64_t times = 1) noexcept
    {
        counts_[label.slot(num_classes())] += times;
        total_ += times;
    }

    void merge(const CountVector& other);

    /// Number of labels observed at least once.
    std::size_t distinct() const noexcept;

    friend bool operator==(const CountVector&, const CountVector&) = default;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Draws `count` Gaussian perturbations x + sigma * eps and tallies the labels
/// in `space`. The result depends only on (x, sigma, count, seed, stage, space),
/// never on `workers`.
CountVector sample_under_noise(const ExtendedClassifier& f, std::span<const double> x, double sigma,
                               std::uint64_t count, std::uint64_t seed, Stage stage,
                               LabelSpace space, unsigned workers = 1);

enum class CertificationMode { Standard, CC, NCL };

std::string_view to_string(CertificationMode mode) noexcept;
CertificationMode parse_mode(std::string_view name);

/// Label space the mode samples in.
constexpr LabelSpace label_space(CertificationMode mode) noexcept
{
    return mode == CertificationMode::Standard ? LabelSpace::Base : LabelSpace::Extended;
}

enum class AbstainReason { None, NoConfidentWinner, UncertainPrediction, NonpositiveRadius };

std::string_view to_string(AbstainReason reason) noexcept;
AbstainReason parse_abstain_reason(std::string_view name);

/// Outcome of the selection stage.
struct TopTwo {
    /// Set whenever the winner test passed, including an uncertain winner.
    std::optional<ExtendedLabel> winner;
    std::optional<ExtendedLabel> runner_up;
    AbstainReason reason = AbstainReason::NoConfidentWinner;
};

/// Pairwise rank tests on selection counts. The winner is tested against the
/// second-ranked label and the runner-up against the third; ties rank the lower
/// slot first. Standard and CC rank every label. NCL ranks the winner the same
/// way but draws the runner-up from confident classes only, so that it is the
/// best confident competitor once the uncertainty class joins the winner.
TopTwo select_top_two(const CountVector& counts, SignificanceLevel alpha, CertificationMode mode);

/// Samples n0 selection draws and runs select_top_two on them.
TopTwo predict_top_two(const ExtendedClassifier& f, std::span<const double> x,
                       const SamplingConfig& cfg, CertificationMode mode, unsigned workers = 1);

/// sigma / 2 * (Phi^-1(pA_lower) - Phi^-1(pB_upper)). Can be <= 0.
/// Throws std::domain_error when a bound is not strictly inside (0, 1).
double certified_radius(double pa_lower, double pb_upper, double sigma);

/// Lower and upper probability bounds from estimation counts.
struct ProbabilityBounds {
    double pa_lower = 0.0;
    double pb_upper = 1.0;
    bool one_vs_all = false;
};

/// With a runner-up count: Bonferroni pair at alpha/2 each, replaced by the
/// one-vs-all pair at alpha when the two bounds sum to one or more. Without
/// one: one-vs-all at alpha, pb_upper = 1 - pa_lower.
ProbabilityBounds estimate_bounds(std::uint64_t n_a, std::optional<std::uint64_t> n_b,
                                  std::uint64_t n, SignificanceLevel alpha);

struct CertificationResult {
    CertificationMode mode = CertificationMode::Standard;
    /// Selection winner (empty when the winner test failed).
    std::optional<ExtendedLabel> predicted;
    std::optional<ExtendedLabel> runner_up;
    AbstainReason abstain = AbstainReason::NoConfidentWinner;
    std::optional<double> radius;          ///< present iff abstain == None
    std::optional<double> pa_lower;        ///< present once estimation ran
    std::optional<double> pb_upper;
    std::optional<double> p_uncertain_hat; ///< uncertain fraction of the estimation draws
    bool used_one_vs_all = false;
    bool clamped = false;                  ///< a bound was clamped before Phi^-1
    std::size_t distinct_labels = 0;       ///< distinct labels among selection draws

    bool certified() const noexcept { return abstain == AbstainReason::None; }

    friend bool operator==(const CertificationResult&, const CertificationResult&) = default;
};

/// Two-stage certification of the smoothed classifier at x.
///
/// Standard samples in the base label space. CC samples extended labels and
/// competes the winner against every other label including the uncertainty
/// class. NCL samples extended labels, selects like CC, then counts the
/// uncertainty class towards the winner in the estimation stage. An uncertain
/// winner abstains in CC and NCL.
CertificationResult certify(const ExtendedClassifier& f, std::span<const double> x,
                            const SamplingConfig& cfg, CertificationMode mode, unsigned workers = 1);

/// A radius from exact probabilities; negative values mean "not certifiable".
struct ExactRadius {
    double raw = 0.0;

    double value() const noexcept { return raw > 0.0 ? raw : 0.0; }
    bool certifiable() const noexcept { return raw > 0.0; }
};

struct ExactRadii {
    ExactRadius standard; ///< R, from the base-class probabilities
    ExactRadius cc;       ///< R_CC
    ExactRadius ncl;      ///< R_NCL
    std::size_t winner = 0;
    bool clamped = false;
};

/// Probabilities fed to Phi^-1 are clamped into [1e-15, 1 - 1e-15].
inline constexpr double kProbabilityClamp = 1e-15;

/// Radii from exact probabilities. p_base has K entries (the classifier with
/// the threshold disabled); p_extended has K + 1, the last being the
/// uncertainty class. The winner is the most probable confident class of
/// p_extended. Both vectors must sum to 1 within 1e-9.
ExactRadii exact_radii_from_probs(std::span<const double> p_base, std::span<const double> p_extended,
                                  double sigma);

struct ImprovementCheck {
    double lhs = 0.0; ///< drop of the strongest competitor, in Phi^-1 units
    double rhs = 0.0; ///< drop of the winner, in Phi^-1 units
    bool predicts_improvement = false;
    bool clamped = false;
};

/// Decides R_CC > R from the two probability vectors: the drop of the strongest
/// competitor must outweigh the drop of the winner. Throws
/// std::invalid_argument when the winners of the two vectors differ.
ImprovementCheck improvement_check(std::span<const double> p_sup, std::span<const double> p_theta,
                                  double sigma);

} // namespace certsmooth
