#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace certsmooth {

/// Probability vector over the K base classes.
class ClassDistribution {
public:
    /// Throws std::invalid_argument unless every entry is in [0, 1] and the
    /// entries sum to 1 within 1e-9.
    explicit ClassDistribution(std::vector<double> probs);

    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t c) const { return probs_[c]; }

    /// Most probable class; ties resolve to the lowest index.
    std::size_t argmax() const noexcept;

private:
    std::vector<double> probs_;
};

/// A label of the extended label space: a class predicted with confidence, or
/// the uncertainty class. Count vectors index the uncertainty class at slot K.
class ExtendedLabel {
public:
    static constexpr ExtendedLabel confident(std::size_t cls) noexcept { return ExtendedLabel(cls); }
    static constexpr ExtendedLabel uncertain() noexcept { return ExtendedLabel(npos); }

    /// Inverse of slot(). Slot K maps to the uncertainty class.
    static constexpr ExtendedLabel from_slot(std::size_t slot, std::size_t num_classes) noexcept
    {
        return slot >= num_classes ? uncertain() : confident(slot);
    }

    constexpr bool is_uncertain() const noexcept { return value_ == npos; }
    constexpr std::size_t class_index() const noexcept { return value_; }
    constexpr std::size_t slot(std::size_t num_classes) const noexcept
    {
        return is_uncertain() ? num_classes : value_;
    }

    std::string to_string() const;

    friend constexpr auto operator<=>(ExtendedLabel, ExtendedLabel) noexcept = default;

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    constexpr explicit ExtendedLabel(std::size_t v) noexcept : value_(v) {}
    std::size_t value_;
};

/// Which label space a classifier is queried in. Base ignores all uncertainty
/// information (the threshold set to its supremum); Extended may return the
/// uncertainty class.
enum class LabelSpace { Base, Extended };

enum class UncertaintyKind { Confidence, Margin, Entropy };

std::string_view to_string(UncertaintyKind kind) noexcept;
UncertaintyKind parse_uncertainty_kind(std::string_view name);

/// Score in natural orientation: confidence and margin are high when the
/// prediction is confident, entropy (natural log) is high when it is uncertain.
double uncertainty_score(const ClassDistribution& dist, UncertaintyKind kind) noexcept;

/// Rejection rule of an uncertainty-equipped classifier. An empty theta is the
/// supremum of the score range and never rejects.
struct UncertaintyConfig {
    UncertaintyKind kind = UncertaintyKind::Margin;
    std::optional<double> theta;

    static UncertaintyConfig disabled(UncertaintyKind kind = UncertaintyKind::Margin)
    {
        return {kind, std::nullopt};
    }

    /// Confidence and margin thresholds live in [0, 1], entropy thresholds in
    /// [0, inf); entropy values above log K behave like the disabled rule.
    void validate() const;

    /// Ties count as uncertain.
    bool rejects(double score) const noexcept;
    bool rejects(const ClassDistribution& dist) const noexcept
    {
        return rejects(uncertainty_score(dist, kind));
    }
};

/// Deterministic base classifier returning a class distribution.
class BaseClassifier {
public:
    virtual ~BaseClassifier() = default;

    virtual ClassDistribution classify(std::span<const double> x) const = 0;
    virtual std::size_t num_classes() const noexcept = 0;
    virtual std::size_t input_dim() const noexcept = 0;
};

/// Anything that maps an input to an extended label; the object smoothed by
/// the certifier. Implementations are immutable and safe to share across threads.
class ExtendedClassifier {
public:
    virtual ~ExtendedClassifier() = default;

    virtual ExtendedLabel label(std::span<const double> x, LabelSpace space) const = 0;
    virtual std::size_t num_classes() const noexcept = 0;
    virtual std::size_t input_dim() const noexcept = 0;
};

/// Throws std::invalid_argument when x.size() != expected.
void check_input_dim(std::span<const double> x, std::size_t expected);

/// f*: the base classifier's argmax, or the uncertainty class when the rule rejects.
ExtendedLabel equipped_classify(const BaseClassifier& f, const UncertaintyConfig& cfg,
                                std::span<const double> x);

class UncertaintyEquippedClassifier final : public ExtendedClassifier {
public:
    UncertaintyEquippedClassifier(std::shared_ptr<const BaseClassifier> base, UncertaintyConfig cfg);

    ExtendedLabel label(std::span<const double> x, LabelSpace space) const override;
    std::size_t num_classes() const noexcept override { return base_->num_classes(); }
    std::size_t input_dim() const noexcept override { return base_->input_dim(); }

    const BaseClassifier& base() const noexcept { return *base_; }
    const UncertaintyConfig& config() const noexcept { return cfg_; }

private:
    std::shared_ptr<const BaseClassifier> base_;
    UncertaintyConfig cfg_;
};

// ---------------------------------------------------------------------------
// Multi-layer perceptron

enum class Activation { Relu, None };

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights; // row-major, outputs x inputs
    std::vector<double> bias;
    Activation activation = Activation::None;
};

struct MlpModel {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<DenseLayer> layers;

    /// Throws std::invalid_argument when layer dimensions do not chain.
    void validate() const;
};

/// Forward pass followed by a softmax over the final layer's outputs.
ClassDistribution eval_mlp(const MlpModel& model, std::span<const double> x);

/// Parses {"input_dim", "classes", "layers": [{"w", "b", "activation"}]}.
MlpModel parse_mlp(std::string_view json_text);
MlpModel load_mlp(const std::string& path);

class MlpClassifier final : public BaseClassifier {
public:
    explicit MlpClassifier(MlpModel model);

    ClassDistribution classify(std::span<const double> x) const override;
    std::size_t num_classes() const noexcept override { return model_.num_classes; }
    std::size_t input_dim() const noexcept override { return model_.input_dim; }

    const MlpModel& model() const noexcept { return model_; }

private:
    MlpModel model_;
};

// ---------------------------------------------------------------------------
// Linear binary classifier: class 1 iff w.x + b > 0.

struct LinearModel {
    std::vector<double> w;
    double b = 0.0;

    double score(std::span<const double> x) const;
    double weight_norm() const noexcept;
    /// Throws std::invalid_argument for an empty or zero weight vector.
    void validate() const;
};

LinearModel parse_linear(std::string_view json_text);
LinearModel load_linear(const std::string& path);

/// Softmax over the logits (0, w.x + b).
class LinearClassifier final : public BaseClassifier {
public:
    explicit LinearClassifier(LinearModel model);

    ClassDistribution classify(std::span<const double> x) const override;
    std::size_t num_classes() const noexcept override { return 2; }
    std::size_t input_dim() const noexcept override { return model_.w.size(); }

    const LinearModel& model() const noexcept { return model_; }

private:
    LinearModel model_;
};

// ---------------------------------------------------------------------------
// Region classifiers. Their uncertainty is geometric: each region carries a
// class and a confidence flag. In the base label space the flag is ignored.

struct RegionLabel {
    std::size_t cls = 0;
    bool confident = true;

    ExtendedLabel resolve(LabelSpace space) const noexcept
    {
        return (space == LabelSpace::Base || confident) ? ExtendedLabel::confident(cls)
                                                        : ExtendedLabel::uncertain();
    }

    friend bool operator==(const RegionLabel&, const RegionLabel&) = default;
};

/// Intervals (-inf, b_1), [b_1, b_2), ..., [b_m, inf) labelled in order.
class RegionClassifier1D final : public ExtendedClassifier {
public:
    /// Throws std::invalid_argument unless breakpoints are strictly increasing
    /// and there is exactly one more label than breakpoints. num_classes of 0
    /// means one past the largest class index used.
    RegionClassifier1D(std::vector<double> breakpoints, std::vector<RegionLabel> labels,
                       std::size_t num_classes = 0);

    ExtendedLabel label(std::span<const double> x, LabelSpace space) const override;
    std::size_t num_classes() const noexcept override { return num_classes_; }
    std::size_t input_dim() const noexcept override { return 1; }

    /// Index of the interval containing t.
    std::size_t interval_of(double t) const noexcept;

    std::span<const double> breakpoints() const noexcept { return breakpoints_; }
    std::span<const RegionLabel> labels() const noexcept { return labels_; }

private:
    std::vector<double> breakpoints_;
    std::vector<RegionLabel> labels_;
    std::size_t num_classes_;
};

/// Half-open box [lo, hi) in the plane.
struct LabeledBox {
    std::array<double, 2> lo{};
    std::array<double, 2> hi{};
    RegionLabel label;

    bool contains(std::span<const double> x) const noexcept;
};

class RegionClassifier2D final : public ExtendedClassifier {
public:
    /// Throws std::invalid_argument for empty or overlapping boxes.
    RegionClassifier2D(RegionLabel fallback, std::vector<LabeledBox> boxes,
                       std::size_t num_classes = 0);

    ExtendedLabel label(std::span<const double> x, LabelSpace space) const override;
    std::size_t num_classes() const noexcept override { return num_classes_; }
    std::size_t input_dim() const noexcept override { return 2; }

    const RegionLabel& fallback() const noexcept { return fallback_; }
    std::span<const LabeledBox> boxes() const noexcept { return boxes_; }

private:
    RegionLabel fallback_;
    std::vector<LabeledBox> boxes_;
    std::size_t num_classes_;
};

/// Label of the containing region with the confidence flag applied.
ExtendedLabel eval_region(const ExtendedClassifier& rc, std::span<const double> x);

/// Region files: 1D {"breakpoints", "labels"}, 2D {"default", "boxes"}; either
/// may carry an optional "classes" count.
std::unique_ptr<ExtendedClassifier> parse_region(std::string_view json_text);
std::unique_ptr<ExtendedClassifier> load_region(const std::string& path);

} // namespace certsmooth
