#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "certsmooth/classifier.hpp"

namespace certsmooth {

struct LabeledSample {
    std::vector<double> x;
    std::size_t label = 0;
};

/// Nonempty list of labelled inputs of a common dimension.
class LabeledDataset {
public:
    /// Throws std::invalid_argument for an empty list or mixed dimensions.
    explicit LabeledDataset(std::vector<LabeledSample> samples);

    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t dim() const noexcept { return samples_.front().x.size(); }
    const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

private:
    std::vector<LabeledSample> samples_;
};

/// JSON Lines, one {"x": [...], "label": k} per line; blank lines are skipped.
/// Throws InputError with the offending line number.
LabeledDataset load_dataset_jsonl(const std::string& path);
LabeledDataset parse_dataset_jsonl(std::string_view text, const std::string& source = "<memory>");

/// Fraction of samples whose majority extended label over n0 noisy copies is
/// the true class. The uncertainty class competes as a label and is never
/// correct; count ties go to the lower slot.
double majority_vote_accuracy(const ExtendedClassifier& f, const LabeledDataset& data, double sigma,
                              std::uint64_t n0, std::uint64_t seed, unsigned workers = 1);

struct CalibrationConfig {
    UncertaintyKind kind = UncertaintyKind::Margin;
    double budget = 0.01;
    std::size_t steps = 1000;
    std::uint64_t n0 = 1000;
    double sigma = 0.25;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless 0 < budget < 1, steps >= 2, n0 >= 1, sigma > 0.
    void validate() const;
};

/// Sweep endpoints ordered from least to most restrictive: confidence
/// 0.1 -> 1, margin 0 -> 1, entropy log K -> 0.
struct SweepRange {
    double least_restrictive = 0.0;
    double most_restrictive = 1.0;
};
SweepRange sweep_range(UncertaintyKind kind, std::size_t num_classes);

/// Threshold of sweep step i: least + i * (most - least) / steps, i < steps.
/// The last step stays one spacing short of the endpoint, which would reject
/// every prediction under the tie rule.
double sweep_threshold(const SweepRange& range, std::size_t steps, std::size_t i) noexcept;

struct CalibrationPoint {
    double theta = 0.0;
    double accuracy = 0.0;
};

struct CalibrationResult {
    double theta = 0.0;
    /// Set when even the least restrictive threshold broke the budget.
    bool warning = false;
    double baseline_accuracy = 0.0;
    double accuracy = 0.0; ///< accuracy at the returned theta
    std::vector<CalibrationPoint> trace;
};

/// Sweeps thresholds from least to most restrictive and returns the last one
/// whose majority-vote accuracy stays >= (1 - budget) * baseline, stopping at
/// the first violation. One set of n0 draws per sample is shared by the
/// baseline and every threshold.
CalibrationResult calibrate_threshold(const BaseClassifier& f, const CalibrationConfig& cfg,
                                      const LabeledDataset& data, unsigned workers = 1);

/// CSV "theta,accuracy" rows of the sweep trace.
void write_calibration_trace_csv(std::ostream& out, const CalibrationResult& result);

} // namespace certsmooth
