#include "certsmooth/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json_util.hpp"

namespace certsmooth {

using nlohmann::json;

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs))
{
    if (probs_.empty()) {
        throw std::invalid_argument("class distribution must not be empty");
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("class probability outside [0, 1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("class probabilities do not sum to 1");
    }
}

std::size_t ClassDistribution::argmax() const noexcept
{
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::string ExtendedLabel::to_string() const
{
    return is_uncertain() ? std::string("uncertain") : std::to_string(value_);
}

std::string_view to_string(UncertaintyKind kind) noexcept
{
    switch (kind) {
    case UncertaintyKind::Confidence: return "confidence";
    case UncertaintyKind::Margin: return "margin";
    case UncertaintyKind::Entropy: return "entropy";
    }
    return "unknown";
}

UncertaintyKind parse_uncertainty_kind(std::string_view name)
{
    if (name == "confidence") return UncertaintyKind::Confidence;
    if (name == "margin") return UncertaintyKind::Margin;
    if (name == "entropy") return UncertaintyKind::Entropy;
    throw std::invalid_argument("unknown uncertainty kind '" + std::string(name) + "'");
}

double uncertainty_score(const ClassDistribution& dist, UncertaintyKind kind) noexcept
{
    const auto p = dist.probs();
    switch (kind) {
    case UncertaintyKind::Confidence:
        return *std::max_element(p.begin(), p.end());
    case UncertaintyKind::Margin: {
        double top = 0.0;
        double second = 0.0;
        for (double v : p) {
            if (v > top) {
                second = top;
                top = v;
            } else if (v > second) {
                second = v;
            }
        }
        return top - second;
    }
    case UncertaintyKind::Entropy: {
        double h = 0.0;
        for (double v : p) {
            if (v > 0.0) h -= v * std::log(v);
        }
        return h;
    }
    }
    return 0.0;
}

void UncertaintyConfig::validate() const
{
    if (!theta) return;
    const double t = *theta;
    if (!std::isfinite(t)) {
        throw std::invalid_argument("uncertainty threshold must be finite");
    }
    if (kind == UncertaintyKind::Entropy) {
        if (t < 0.0) throw std::invalid_argument("entropy threshold must be >= 0");
    } else if (t < 0.0 || t > 1.0) {
        throw std::invalid_argument(std::string(to_string(kind)) + " threshold must lie in [0, 1]");
    }
}

bool UncertaintyConfig::rejects(double score) const noexcept
{
    if (!theta) return false;
    if (kind == UncertaintyKind::Entropy) return score >= *theta;
    return score <= *theta;
}

void check_input_dim(std::span<const double> x, std::size_t expected)
{
    if (x.size() != expected) {
        throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                    " does not match classifier dimension " +
                                    std::to_string(expected));
    }
}

ExtendedLabel equipped_classify(const BaseClassifier& f, const UncertaintyConfig& cfg,
                                std::span<const double> x)
{
    check_input_dim(x, f.input_dim());
    const ClassDistribution dist = f.classify(x);
    if (cfg.rejects(dist)) return ExtendedLabel::uncertain();
    return ExtendedLabel::confident(dist.argmax());
}

UncertaintyEquippedClassifier::UncertaintyEquippedClassifier(std::shared_ptr<const BaseClassifier> base,
                                                             UncertaintyConfig cfg)
    : base_(std::move(base)), cfg_(cfg)
{
    if (!base_) throw std::invalid_argument("null base classifier");
    cfg_.validate();
}

ExtendedLabel UncertaintyEquippedClassifier::label(std::span<const double> x, LabelSpace space) const
{
    if (space == LabelSpace::Base) {
        check_input_dim(x, base_->input_dim());
        return ExtendedLabel::confident(base_->classify(x).argmax());
    }
    return equipped_classify(*base_, cfg_, x);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> softmax(std::vector<double> logits)
{
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

} // namespace

void MlpModel::validate() const
{
    if (layers.empty()) throw std::invalid_argument("MLP has no layers");
    if (num_classes == 0) throw std::invalid_argument("MLP must have at least one class");
    std::size_t width = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& layer = layers[i];
        if (layer.inputs != width) {
            throw std::invalid_argument("MLP layer " + std::to_string(i) + " expects " +
                                        std::to_string(layer.inputs) + " inputs but receives " +
                                        std::to_string(width));
        }
        if (layer.weights.size() != layer.inputs * layer.outputs ||
            layer.bias.size() != layer.outputs) {
            throw std::invalid_argument("MLP layer " + std::to_string(i) + " has inconsistent shapes");
        }
        width = layer.outputs;
    }
    if (width != num_classes) {
        throw std::invalid_argument("MLP output width " + std::to_string(width) +
                                    " does not match class count " + std::to_string(num_classes));
    }
}

ClassDistribution eval_mlp(const MlpModel& model, std::span<const double> x)
{
    check_input_dim(x, model.input_dim);
    std::vector<double> act(x.begin(), x.end());
    std::vector<double> next;
    for (const DenseLayer& layer : model.layers) {
        next.assign(layer.bias.begin(), layer.bias.end());
        for (std::size_t r = 0; r < layer.outputs; ++r) {
            const double* row = layer.weights.data() + r * layer.inputs;
            next[r] += std::inner_product(row, row + layer.inputs, act.begin(), 0.0);
            if (layer.activation == Activation::Relu && next[r] < 0.0) next[r] = 0.0;
        }
        act.swap(next);
    }
    return ClassDistribution(softmax(std::move(act)));
}

MlpModel parse_mlp(std::string_view json_text)
{
    const json doc = json::parse(json_text);
    MlpModel model;
    model.input_dim = doc.at("input_dim").get<std::size_t>();
    model.num_classes = doc.at("classes").get<std::size_t>();
    for (const json& jl : doc.at("layers")) {
        DenseLayer layer;
        const auto rows = jl.at("w").get<std::vector<std::vector<double>>>();
        layer.outputs = rows.size();
        layer.inputs = rows.empty() ? 0 : rows.front().size();
        for (const auto& row : rows) {
            if (row.size() != layer.inputs) throw std::invalid_argument("ragged weight matrix");
            layer.weights.insert(layer.weights.end(), row.begin(), row.end());
        }
        layer.bias = jl.at("b").get<std::vector<double>>();
        const std::string act = jl.value("activation", "none");
        if (act == "relu") {
            layer.activation = Activation::Relu;
        } else if (act == "none") {
            layer.activation = Activation::None;
        } else {
            throw std::invalid_argument("unknown activation '" + act + "'");
        }
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

MlpModel load_mlp(const std::string& path)
{
    return detail::load_with(path, [](std::string_view text) { return parse_mlp(text); });
}

MlpClassifier::MlpClassifier(MlpModel model) : model_(std::move(model))
{
    model_.validate();
}

ClassDistribution MlpClassifier::classify(std::span<const double> x) const
{
    return eval_mlp(model_, x);
}

// ---------------------------------------------------------------------------

double LinearModel::score(std::span<const double> x) const
{
    check_input_dim(x, w.size());
    return std::inner_product(w.begin(), w.end(), x.begin(), b);
}

double LinearModel::weight_norm() const noexcept
{
    return std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
}

void LinearModel::validate() const
{
    if (w.empty() || !(weight_norm() > 0.0)) {
        throw std::invalid_argument("linear model needs a nonzero weight vector");
    }
}

LinearModel parse_linear(std::string_view json_text)
{
    const json doc = json::parse(json_text);
    LinearModel model{doc.at("w").get<std::vector<double>>(), doc.value("b", 0.0)};
    model.validate();
    return model;
}

LinearModel load_linear(const std::string& path)
{
    return detail::load_with(path, [](std::string_view text) { return parse_linear(text); });
}

LinearClassifier::LinearClassifier(LinearModel model) : model_(std::move(model))
{
    model_.validate();
}

ClassDistribution LinearClassifier::classify(std::span<const double> x) const
{
    return ClassDistribution(softmax({0.0, model_.score(x)}));
}

// ---------------------------------------------------------------------------

namespace {

std::size_t infer_classes(std::size_t declared, std::size_t max_used)
{
    if (declared == 0) return max_used + 1;
    if (declared <= max_used) {
        throw std::invalid_argument("region label class " + std::to_string(max_used) +
                                    " exceeds declared class count " + std::to_string(declared));
    }
    return declared;
}

} // namespace

RegionClassifier1D::RegionClassifier1D(std::vector<double> breakpoints, std::vector<RegionLabel> labels,
                                       std::size_t num_classes)
    : breakpoints_(std::move(breakpoints)), labels_(std::move(labels))
{
    if (labels_.size() != breakpoints_.size() + 1) {
        throw std::invalid_argument("1D region classifier needs one more label than breakpoints");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!std::isfinite(breakpoints_[i]) || (i > 0 && !(breakpoints_[i - 1] < breakpoints_[i]))) {
            throw std::invalid_argument("breakpoints must be finite and strictly increasing");
        }
    }
    std::size_t max_used = 0;
    for (const RegionLabel& l : labels_) max_used = std::max(max_used, l.cls);
    num_classes_ = infer_classes(num_classes, max_used);
}

std::size_t RegionClassifier1D::interval_of(double t) const noexcept
{
    return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t) -
                                    breakpoints_.begin());
}

ExtendedLabel RegionClassifier1D::label(std::span<const double> x, LabelSpace space) const
{
    check_input_dim(x, 1);
    return labels_[interval_of(x[0])].resolve(space);
}

bool LabeledBox::contains(std::span<const double> x) const noexcept
{
    return x[0] >= lo[0] && x[0] < hi[0] && x[1] >= lo[1] && x[1] < hi[1];
}

RegionClassifier2D::RegionClassifier2D(RegionLabel fallback, std::vector<LabeledBox> boxes,
                                       std::size_t num_classes)
    : fallback_(fallback), boxes_(std::move(boxes))
{
    std::size_t max_used = fallback_.cls;
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
        const LabeledBox& a = boxes_[i];
        if (!(a.lo[0] < a.hi[0] && a.lo[1] < a.hi[1])) {
            throw std::invalid_argument("box " + std::to_string(i) + " is empty");
        }
        for (std::size_t j = 0; j < i; ++j) {
            const LabeledBox& b = boxes_[j];
            const bool overlap = a.lo[0] < b.hi[0] && b.lo[0] < a.hi[0] && a.lo[1] < b.hi[1] &&
                                 b.lo[1] < a.hi[1];
            if (overlap) {
                throw std::invalid_argument("boxes " + std::to_string(j) + " and " + std::to_string(i) +
                                            " overlap");
            }
        }
        max_used = std::max(max_used, a.label.cls);
    }
    num_classes_ = infer_classes(num_classes, max_used);
}

ExtendedLabel RegionClassifier2D::label(std::span<const double> x, LabelSpace space) const
{
    check_input_dim(x, 2);
    for (const LabeledBox& box : boxes_) {
        if (box.contains(x)) return box.label.resolve(space);
    }
    return fallback_.resolve(space);
}

ExtendedLabel eval_region(const ExtendedClassifier& rc, std::span<const double> x)
{
    return rc.label(x, LabelSpace::Extended);
}

namespace {

RegionLabel region_label_from_json(const json& j)
{
    return RegionLabel{j.at("class").get<std::size_t>(), j.value("confident", true)};
}

std::array<double, 2> point_from_json(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("box corner must have two coordinates");
    return {v[0], v[1]};
}

} // namespace

std::unique_ptr<ExtendedClassifier> parse_region(std::string_view json_text)
{
    const json doc = json::parse(json_text);
    const std::size_t classes = doc.value("classes", std::size_t{0});
    if (doc.contains("breakpoints")) {
        std::vector<RegionLabel> labels;
        for (const json& jl : doc.at("labels")) labels.push_back(region_label_from_json(jl));
        return std::make_unique<RegionClassifier1D>(doc.at("breakpoints").get<std::vector<double>>(),
                                                    std::move(labels), classes);
    }
    if (doc.contains("default")) {
        std::vector<LabeledBox> boxes;
        for (const json& jb : doc.value("boxes", json::array())) {
            boxes.push_back({point_from_json(jb.at("lo")), point_from_json(jb.at("hi")),
                             region_label_from_json(jb.at("label"))});
        }
        return std::make_unique<RegionClassifier2D>(region_label_from_json(doc.at("default")),
                                                    std::move(boxes), classes);
    }
    throw std::invalid_argument("region file needs either \"breakpoints\" or \"default\"");
}

std::unique_ptr<ExtendedClassifier> load_region(const std::string& path)
{
    return detail::load_with(path, [](std::string_view text) { return parse_region(text); });
}

} // namespace certsmooth
