#include "certsmooth/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "certsmooth/certifier.hpp"
#include "certsmooth/noise.hpp"
#include "certsmooth/parallel.hpp"
#include "json_util.hpp"

namespace certsmooth {

LabeledDataset::LabeledDataset(std::vector<LabeledSample> samples) : samples_(std::move(samples))
{
    if (samples_.empty()) throw std::invalid_argument("dataset is empty");
    const std::size_t d = samples_.front().x.size();
    if (d == 0) throw std::invalid_argument("dataset inputs must not be empty");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (samples_[i].x.size() != d) {
            throw std::invalid_argument("sample " + std::to_string(i) + " has dimension " +
                                        std::to_string(samples_[i].x.size()) + ", expected " +
                                        std::to_string(d));
        }
    }
}

LabeledDataset parse_dataset_jsonl(std::string_view text, const std::string& source)
{
    std::vector<LabeledSample> samples;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, nl - pos);
        ++line_no;
        pos = nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            samples.push_back({j.at("x").get<std::vector<double>>(), j.at("label").get<std::size_t>()});
        } catch (const std::exception& e) {
            throw InputError(source, line_no, e.what());
        }
        if (samples.size() > 1 && samples.back().x.size() != samples.front().x.size()) {
            throw InputError(source, line_no, "inconsistent input dimension");
        }
    }
    try {
        return LabeledDataset(std::move(samples));
    } catch (const std::invalid_argument& e) {
        throw InputError(source, e.what());
    }
}

LabeledDataset load_dataset_jsonl(const std::string& path)
{
    return parse_dataset_jsonl(read_text_file(path), path);
}

namespace {

// Majority slot of a count vector; the lower slot wins ties.
std::size_t majority_slot(std::span<const std::uint64_t> counts)
{
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

bool majority_correct(std::span<const std::uint64_t> counts, std::size_t num_classes, std::size_t label)
{
    const std::size_t slot = majority_slot(counts);
    return slot < num_classes && slot == label;
}

double fraction(std::size_t hits, std::size_t total)
{
    return static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace

double majority_vote_accuracy(const ExtendedClassifier& f, const LabeledDataset& data, double sigma,
                              std::uint64_t n0, std::uint64_t seed, unsigned workers)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (n0 == 0) throw std::invalid_argument("n0 must be positive");
    check_input_dim(data[0].x, f.input_dim());

    std::vector<char> correct(data.size(), 0);
    parallel_chunks(data.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const CountVector counts = sample_under_noise(f, data[j].x, sigma, n0, derive_seed(seed, j),
                                                          Stage::Calibration, LabelSpace::Extended);
            correct[j] = majority_correct(counts.slots(), f.num_classes(), data[j].label);
        }
    });
    return fraction(static_cast<std::size_t>(std::count(correct.begin(), correct.end(), 1)), data.size());
}

void CalibrationConfig::validate() const
{
    if (!(budget > 0.0 && budget < 1.0)) throw std::invalid_argument("budget must lie in (0, 1)");
    if (steps < 2) throw std::invalid_argument("steps must be at least 2");
    if (n0 == 0) throw std::invalid_argument("n0 must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
}

SweepRange sweep_range(UncertaintyKind kind, std::size_t num_classes)
{
    switch (kind) {
    case UncertaintyKind::Confidence: return {0.1, 1.0};
    case UncertaintyKind::Margin: return {0.0, 1.0};
    case UncertaintyKind::Entropy: return {std::log(static_cast<double>(num_classes)), 0.0};
    }
    throw std::invalid_argument("unknown uncertainty kind");
}

double sweep_threshold(const SweepRange& range, std::size_t steps, std::size_t i) noexcept
{
    const double span = range.most_restrictive - range.least_restrictive;
    return range.least_restrictive + span * static_cast<double>(i) / static_cast<double>(steps);
}

namespace {

struct Draw {
    std::uint32_t argmax;
    double score;
};

} // namespace

CalibrationResult calibrate_threshold(const BaseClassifier& f, const CalibrationConfig& cfg,
                                      const LabeledDataset& data, unsigned workers)
{
    cfg.validate();
    check_input_dim(data[0].x, f.input_dim());
    const std::size_t k = f.num_classes();
    const std::size_t d = f.input_dim();

    // draws[j * n0 + i]: argmax and score of noisy copy i of sample j.
    std::vector<Draw> draws(data.size() * cfg.n0);
    parallel_chunks(data.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> eps(d);
        std::vector<double> point(d);
        for (std::size_t j = begin; j < end; ++j) {
            const NoiseStream noise(derive_seed(cfg.seed, j), Stage::Calibration);
            for (std::uint64_t i = 0; i < cfg.n0; ++i) {
                noise.fill(i, eps);
                for (std::size_t c = 0; c < d; ++c) point[c] = data[j].x[c] + cfg.sigma * eps[c];
                const ClassDistribution dist = f.classify(point);
                draws[j * cfg.n0 + i] = {static_cast<std::uint32_t>(dist.argmax()),
                                         uncertainty_score(dist, cfg.kind)};
            }
        }
    });

    const auto accuracy_at = [&](const UncertaintyConfig& rule) {
        std::vector<std::uint64_t> counts(k + 1);
        std::size_t hits = 0;
        for (std::size_t j = 0; j < data.size(); ++j) {
            std::fill(counts.begin(), counts.end(), 0);
            for (std::uint64_t i = 0; i < cfg.n0; ++i) {
                const Draw& draw = draws[j * cfg.n0 + i];
                ++counts[rule.rejects(draw.score) ? k : draw.argmax];
            }
            hits += majority_correct(counts, k, data[j].label);
        }
        return fraction(hits, data.size());
    };

    CalibrationResult result;
    result.baseline_accuracy = accuracy_at(UncertaintyConfig::disabled(cfg.kind));
    const double floor = (1.0 - cfg.budget) * result.baseline_accuracy;
    const SweepRange range = sweep_range(cfg.kind, k);

    for (std::size_t i = 0; i < cfg.steps; ++i) {
        const double theta = sweep_threshold(range, cfg.steps, i);
        const double acc = accuracy_at(UncertaintyConfig{cfg.kind, theta});
        result.trace.push_back({theta, acc});
        if (acc < floor) break;
        result.theta = theta;
        result.accuracy = acc;
    }
    if (result.trace.front().accuracy < floor) {
        result.warning = true;
        result.theta = range.least_restrictive;
        result.accuracy = result.trace.front().accuracy;
    }
    return result;
}

void write_calibration_trace_csv(std::ostream& out, const CalibrationResult& result)
{
    out << "theta,accuracy\n";
    for (const CalibrationPoint& p : result.trace) {
        out << fmt::format("{:.17g},{:.17g}\n", p.theta, p.accuracy);
    }
}

} // namespace certsmooth
