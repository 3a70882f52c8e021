#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "certsmooth/calibration.hpp"
#include "certsmooth/errors.hpp"

using namespace certsmooth;

namespace {

// Class 0 everywhere. Left of 5 the prediction is sharp (margin 0.875), on
// [5, 6) it is hesitant (margin 0.25), right of 6 it is uniform.
class SteppedClassifier final : public BaseClassifier {
public:
    ClassDistribution classify(std::span<const double> x) const override
    {
        if (x[0] < 5.0) return ClassDistribution({0.9375, 0.0625});
        if (x[0] < 6.0) return ClassDistribution({0.625, 0.375});
        return ClassDistribution({0.5, 0.5});
    }
    std::size_t num_classes() const noexcept override { return 2; }
    std::size_t input_dim() const noexcept override { return 1; }
};

class OneHotClassifier final : public BaseClassifier {
public:
    ClassDistribution classify(std::span<const double> x) const override
    {
        return x[0] < 0.0 ? ClassDistribution({1.0, 0.0, 0.0}) : ClassDistribution({0.0, 1.0, 0.0});
    }
    std::size_t num_classes() const noexcept override { return 3; }
    std::size_t input_dim() const noexcept override { return 1; }
};

class UniformClassifier final : public BaseClassifier {
public:
    ClassDistribution classify(std::span<const double>) const override
    {
        return ClassDistribution({0.25, 0.25, 0.25, 0.25});
    }
    std::size_t num_classes() const noexcept override { return 4; }
    std::size_t input_dim() const noexcept override { return 1; }
};

LabeledDataset points(std::vector<double> xs, std::vector<std::size_t> labels)
{
    std::vector<LabeledSample> s;
    for (std::size_t i = 0; i < xs.size(); ++i) s.push_back({{xs[i]}, labels[i]});
    return LabeledDataset(std::move(s));
}

} // namespace

TEST_CASE("dataset parsing")
{
    const LabeledDataset d = parse_dataset_jsonl("{\"x\": [1, 2], \"label\": 0}\n\n{\"x\": [3, 4], \"label\": 2}\n");
    CHECK(d.size() == 2);
    CHECK(d.dim() == 2);
    CHECK(d[1].label == 2);

    try {
        parse_dataset_jsonl("{\"x\": [1], \"label\": 0}\n{\"x\": [1], \"label\": }\n", "val.jsonl");
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).rfind("val.jsonl:2:", 0) == 0);
    }
    try {
        parse_dataset_jsonl("{\"x\": [1], \"label\": 0}\n{\"x\": [1, 2], \"label\": 1}\n", "val.jsonl");
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_dataset_jsonl(""), InputError);
    CHECK_THROWS_AS(load_dataset_jsonl("/nonexistent/val.jsonl"), InputError);
}

TEST_CASE("majority vote accuracy")
{
    const RegionClassifier1D split({0.0}, {{0, true}, {1, true}});
    const LabeledDataset far = points({-3.0, -2.0, 2.0, 3.0}, {0, 0, 1, 1});
    CHECK(majority_vote_accuracy(split, far, 0.25, 1000, 1) == 1.0);

    const RegionClassifier1D constant({}, {{1, true}});
    CHECK(majority_vote_accuracy(constant, points({-1.0, 1.0}, {1, 1}), 0.5, 100, 1) == 1.0);

    const RegionClassifier1D unsure({}, {{0, false}});
    CHECK(majority_vote_accuracy(unsure, points({-1.0, 1.0}, {0, 0}), 0.5, 100, 1) == 0.0);

    const LabeledDataset mixed = points({-2.0, -0.01, 0.01, 2.0, 0.0}, {0, 0, 1, 1, 0});
    const double a = majority_vote_accuracy(split, mixed, 0.5, 501, 4, 1);
    CHECK(majority_vote_accuracy(split, mixed, 0.5, 501, 4, 3) == a);
}

TEST_CASE("sweep ranges")
{
    CHECK(sweep_range(UncertaintyKind::Confidence, 10).least_restrictive == 0.1);
    CHECK(sweep_range(UncertaintyKind::Margin, 10).most_restrictive == 1.0);
    CHECK(sweep_range(UncertaintyKind::Entropy, 10).least_restrictive == doctest::Approx(std::log(10.0)));
    CHECK(sweep_range(UncertaintyKind::Entropy, 10).most_restrictive == 0.0);
    const SweepRange m = sweep_range(UncertaintyKind::Margin, 2);
    CHECK(sweep_threshold(m, 1000, 0) == 0.0);
    CHECK(sweep_threshold(m, 1000, 250) == 0.25);
}

TEST_CASE("calibration config validation")
{
    CalibrationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.budget = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.steps = 1;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("one-hot outputs calibrate to the most restrictive threshold")
{
    const OneHotClassifier f;
    const LabeledDataset d = points({-1.0, -0.5, 0.5, 1.0}, {0, 0, 1, 1});
    for (UncertaintyKind kind : {UncertaintyKind::Margin, UncertaintyKind::Confidence, UncertaintyKind::Entropy}) {
        CalibrationConfig cfg;
        cfg.kind = kind;
        cfg.n0 = 50;
        cfg.sigma = 0.01;
        cfg.steps = 100;
        const CalibrationResult r = calibrate_threshold(f, cfg, d);
        CHECK_FALSE(r.warning);
        CHECK(r.trace.size() == 100);
        CHECK(r.theta == sweep_threshold(sweep_range(kind, 3), 100, 99));
        CHECK(r.accuracy == 1.0);
    }
}

TEST_CASE("uniform outputs fall back to the least restrictive threshold")
{
    const UniformClassifier f;
    const LabeledDataset d = points({0.0, 1.0, 2.0}, {0, 0, 0});
    for (UncertaintyKind kind : {UncertaintyKind::Margin, UncertaintyKind::Entropy}) {
        CalibrationConfig cfg;
        cfg.kind = kind;
        cfg.n0 = 20;
        cfg.steps = 50;
        const CalibrationResult r = calibrate_threshold(f, cfg, d);
        CHECK(r.warning);
        CHECK(r.baseline_accuracy == 1.0);
        CHECK(r.theta == sweep_range(kind, 4).least_restrictive);
        CHECK(r.trace.size() == 1);
    }
    // The confidence sweep starts at 0.1, below the uniform confidence 0.25.
    CalibrationConfig cfg;
    cfg.kind = UncertaintyKind::Confidence;
    cfg.n0 = 20;
    cfg.steps = 90;
    const CalibrationResult r = calibrate_threshold(f, cfg, d);
    CHECK_FALSE(r.warning);
    CHECK(r.theta < 0.25);
    CHECK(r.trace.back().theta >= 0.25);
}

TEST_CASE("calibration stops just below the hesitant points")
{
    // 90 sharp points and 10 hesitant ones (margin 0.25), all class 0.
    std::vector<double> xs(90, 0.0);
    xs.insert(xs.end(), 10, 5.5);
    const LabeledDataset d = points(xs, std::vector<std::size_t>(100, 0));
    const SteppedClassifier f;

    CalibrationConfig cfg;
    cfg.kind = UncertaintyKind::Margin;
    cfg.budget = 0.01;
    cfg.steps = 1000;
    cfg.n0 = 25;
    cfg.sigma = 0.01;
    const CalibrationResult r = calibrate_threshold(f, cfg, d);
    CHECK_FALSE(r.warning);
    CHECK(r.baseline_accuracy == 1.0);
    CHECK(r.theta == sweep_threshold(sweep_range(UncertaintyKind::Margin, 2), 1000, 249));
    CHECK(r.trace.back().theta == 0.25);
    CHECK(r.trace.back().accuracy == doctest::Approx(0.9));

    // Re-evaluating the chosen threshold with the same draws meets the budget.
    const UncertaintyEquippedClassifier eq(std::make_shared<SteppedClassifier>(),
                                           {UncertaintyKind::Margin, r.theta});
    const double again = majority_vote_accuracy(eq, d, cfg.sigma, cfg.n0, cfg.seed);
    CHECK(again >= (1.0 - cfg.budget) * r.baseline_accuracy);
    CHECK(again == r.accuracy);
}

TEST_CASE("calibration trace is monotone and written as csv")
{
    std::vector<double> xs;
    std::vector<std::size_t> labels;
    for (int i = 0; i < 40; ++i) {
        xs.push_back(-1.0 + 0.25 * i);
        labels.push_back(0);
    }
    const SteppedClassifier f;
    CalibrationConfig cfg;
    cfg.kind = UncertaintyKind::Entropy;
    cfg.steps = 200;
    cfg.n0 = 40;
    cfg.sigma = 0.8;
    cfg.budget = 0.5;
    const CalibrationResult r = calibrate_threshold(f, cfg, LabeledDataset([&] {
        std::vector<LabeledSample> s;
        for (std::size_t i = 0; i < xs.size(); ++i) s.push_back({{xs[i]}, labels[i]});
        return s;
    }()));
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i].accuracy <= r.trace[i - 1].accuracy);
        CHECK(r.trace[i].theta < r.trace[i - 1].theta);
    }
    std::ostringstream out;
    write_calibration_trace_csv(out, r);
    CHECK(out.str().rfind("theta,accuracy\n", 0) == 0);
}
