#include "certsmooth/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "certsmooth/parallel.hpp"

namespace certsmooth {

void SamplingConfig::validate() const
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("sigma must be positive and finite");
    }
    if (n0 < 2) throw std::invalid_argument("n0 must be at least 2");
    if (n < n0) throw std::invalid_argument("n must be at least n0");
}

void CountVector::merge(const CountVector& other)
{
    if (other.counts_.size() != counts_.size()) {
        throw std::invalid_argument("cannot merge count vectors of different label spaces");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

std::size_t CountVector::distinct() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; }));
}

CountVector sample_under_noise(const ExtendedClassifier& f, std::span<const double> x, double sigma,
                               std::uint64_t count, std::uint64_t seed, Stage stage,
                               LabelSpace space, unsigned workers)
{
    check_input_dim(x, f.input_dim());
    const std::size_t k = f.num_classes();
    const NoiseStream noise(seed, stage);
    std::vector<CountVector> partial(std::max(1u, workers), CountVector(k));

    const std::size_t used = parallel_chunks(
        static_cast<std::size_t>(count), workers,
        [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            std::vector<double> eps(x.size());
            std::vector<double> point(x.size());
            CountVector& local = partial[chunk];
            for (std::size_t i = begin; i < end; ++i) {
                noise.fill(i, eps);
                for (std::size_t j = 0; j < x.size(); ++j) point[j] = x[j] + sigma * eps[j];
                local.add(f.label(point, space));
            }
        });

    CountVector total(k);
    for (std::size_t c = 0; c < used; ++c) total.merge(partial[c]);
    return total;
}

std::string_view to_string(CertificationMode mode) noexcept
{
    switch (mode) {
    case CertificationMode::Standard: return "standard";
    case CertificationMode::CC: return "cc";
    case CertificationMode::NCL: return "ncl";
    }
    return "unknown";
}

CertificationMode parse_mode(std::string_view name)
{
    if (name == "standard") return CertificationMode::Standard;
    if (name == "cc") return CertificationMode::CC;
    if (name == "ncl") return CertificationMode::NCL;
    throw std::invalid_argument("unknown certification mode '" + std::string(name) + "'");
}

std::string_view to_string(AbstainReason reason) noexcept
{
    switch (reason) {
    case AbstainReason::None: return "";
    case AbstainReason::NoConfidentWinner: return "no_winner";
    case AbstainReason::UncertainPrediction: return "uncertain_prediction";
    case AbstainReason::NonpositiveRadius: return "nonpositive_radius";
    }
    return "unknown";
}

AbstainReason parse_abstain_reason(std::string_view name)
{
    if (name.empty()) return AbstainReason::None;
    if (name == "no_winner") return AbstainReason::NoConfidentWinner;
    if (name == "uncertain_prediction") return AbstainReason::UncertainPrediction;
    if (name == "nonpositive_radius") return AbstainReason::NonpositiveRadius;
    throw std::invalid_argument("unknown abstain reason '" + std::string(name) + "'");
}

namespace {

// Slots ordered by decreasing count, lower slot first among equals.
std::vector<std::size_t> ranked_slots(std::span<const std::uint64_t> counts)
{
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    return order;
}

// Pairwise test "first beats second"; a zero-trial comparison never passes.
bool beats(std::uint64_t first, std::uint64_t second, SignificanceLevel alpha)
{
    if (first + second == 0) return false;
    return binom_p_value(first, first + second) <= alpha.value();
}

} // namespace

TopTwo select_top_two(const CountVector& counts, SignificanceLevel alpha, CertificationMode mode)
{
    const auto slots = counts.slots();
    const std::size_t k = counts.num_classes();
    const auto count_at = [&](const std::vector<std::size_t>& order, std::size_t rank) -> std::uint64_t {
        return rank < order.size() ? slots[order[rank]] : 0;
    };

    const std::vector<std::size_t> order = ranked_slots(slots);
    TopTwo out;
    if (!beats(count_at(order, 0), count_at(order, 1), alpha)) {
        out.reason = AbstainReason::NoConfidentWinner;
        return out;
    }
    const std::size_t winner_slot = order[0];
    out.winner = ExtendedLabel::from_slot(winner_slot, k);

    std::vector<std::size_t> candidates;
    for (std::size_t s : order) {
        if (s == winner_slot) continue;
        if (mode == CertificationMode::NCL && s == k) continue;
        candidates.push_back(s);
    }
    if (beats(count_at(candidates, 0), count_at(candidates, 1), alpha)) {
        out.runner_up = ExtendedLabel::from_slot(candidates[0], k);
    }

    out.reason = (out.winner->is_uncertain() && mode != CertificationMode::Standard)
                     ? AbstainReason::UncertainPrediction
                     : AbstainReason::None;
    return out;
}

TopTwo predict_top_two(const ExtendedClassifier& f, std::span<const double> x,
                       const SamplingConfig& cfg, CertificationMode mode, unsigned workers)
{
    cfg.validate();
    const CountVector counts = sample_under_noise(f, x, cfg.sigma, cfg.n0, cfg.seed, Stage::Selection,
                                                  label_space(mode), workers);
    return select_top_two(counts, cfg.alpha, mode);
}

double certified_radius(double pa_lower, double pb_upper, double sigma)
{
    return 0.5 * sigma * (inv_std_normal_cdf(pa_lower) - inv_std_normal_cdf(pb_upper));
}

ProbabilityBounds estimate_bounds(std::uint64_t n_a, std::optional<std::uint64_t> n_b,
                                  std::uint64_t n, SignificanceLevel alpha)
{
    if (n_b) {
        const SignificanceLevel half = alpha.halved();
        const double pa = clopper_pearson_lower(n_a, n, half);
        const double pb = clopper_pearson_upper(*n_b, n, half);
        // Bounds summing to one carry no more information than the complement.
        if (pa + pb < 1.0) return {pa, pb, false};
    }
    const double pa = clopper_pearson_lower(n_a, n, alpha);
    return {pa, 1.0 - pa, true};
}

namespace {

double clamp_probability(double p, bool& clamped) noexcept
{
    const double c = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (c != p) clamped = true;
    return c;
}

} // namespace

CertificationResult certify(const ExtendedClassifier& f, std::span<const double> x,
                            const SamplingConfig& cfg, CertificationMode mode, unsigned workers)
{
    cfg.validate();
    check_input_dim(x, f.input_dim());
    const LabelSpace space = label_space(mode);

    const CountVector selection =
        sample_under_noise(f, x, cfg.sigma, cfg.n0, cfg.seed, Stage::Selection, space, workers);
    const TopTwo top = select_top_two(selection, cfg.alpha, mode);

    CertificationResult result;
    result.mode = mode;
    result.predicted = top.winner;
    result.runner_up = top.runner_up;
    result.abstain = top.reason;
    result.distinct_labels = selection.distinct();
    if (top.reason != AbstainReason::None) return result;

    const CountVector estimation =
        sample_under_noise(f, x, cfg.sigma, cfg.n, cfg.seed, Stage::Estimation, space, workers);
    const std::uint64_t n_uncertain = estimation[ExtendedLabel::uncertain()];
    std::uint64_t n_a = estimation[*top.winner];
    if (mode == CertificationMode::NCL) n_a += n_uncertain;
    std::optional<std::uint64_t> n_b;
    if (top.runner_up) n_b = estimation[*top.runner_up];

    const ProbabilityBounds bounds = estimate_bounds(n_a, n_b, cfg.n, cfg.alpha);
    result.pa_lower = bounds.pa_lower;
    result.pb_upper = bounds.pb_upper;
    result.used_one_vs_all = bounds.one_vs_all;
    result.p_uncertain_hat = static_cast<double>(n_uncertain) / static_cast<double>(cfg.n);

    const double pa = clamp_probability(bounds.pa_lower, result.clamped);
    const double pb = clamp_probability(bounds.pb_upper, result.clamped);
    const double radius = certified_radius(pa, pb, cfg.sigma);
    if (radius > 0.0) {
        result.radius = radius;
        result.abstain = AbstainReason::None;
    } else {
        result.abstain = AbstainReason::NonpositiveRadius;
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

void check_probability_vector(std::span<const double> p, const char* what)
{
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(what) + ": entry outside [0, 1]");
        }
        sum += v;
    }
    if (p.empty() || std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(what) + ": probabilities do not sum to 1");
    }
}

std::size_t argmax_of(std::span<const double> p) noexcept
{
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Largest entry of p other than `skip`; 0 when there is none.
double max_excluding(std::span<const double> p, std::size_t skip) noexcept
{
    double best = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != skip) best = std::max(best, p[i]);
    }
    return best;
}

struct ClampedInverse {
    bool clamped = false;

    double operator()(double p)
    {
        return inv_std_normal_cdf(clamp_probability(p, clamped));
    }

    // p is a winning mass and rest the sum of everything else; above 1/2 the
    // quantile is taken from rest, which keeps its digits.
    double upper(double p, double rest)
    {
        return p > 0.5 ? -(*this)(std::max(rest, 0.0)) : (*this)(p);
    }
};

double sum_excluding(std::span<const double> p, std::size_t skip) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != skip) s += p[i];
    }
    return s;
}

} // namespace

ExactRadii exact_radii_from_probs(std::span<const double> p_base, std::span<const double> p_extended,
                                  double sigma)
{
    check_probability_vector(p_base, "base probabilities");
    check_probability_vector(p_extended, "extended probabilities");
    if (p_extended.size() != p_base.size() + 1) {
        throw std::invalid_argument("extended probabilities need exactly one more entry than base");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");

    const std::size_t k = p_base.size();
    const auto confident = p_extended.first(k);
    const double p_v = p_extended[k];
    ClampedInverse inv;
    ExactRadii out;

    const std::size_t base_winner = argmax_of(p_base);
    const double q_base = inv.upper(p_base[base_winner], sum_excluding(p_base, base_winner));
    out.standard.raw = 0.5 * sigma * (q_base - inv(max_excluding(p_base, base_winner)));

    out.winner = argmax_of(confident);
    const double p_a = confident[out.winner];
    const double rest = sum_excluding(confident, out.winner);
    // Equal winning masses share one quantile.
    const double q_a = out.winner == base_winner && p_a == p_base[base_winner] ? q_base : inv.upper(p_a, rest + p_v);
    out.cc.raw = 0.5 * sigma * (q_a - inv(max_excluding(p_extended, out.winner)));
    out.ncl.raw = 0.5 * sigma *
                  (inv.upper(std::min(p_a + p_v, 1.0), rest) - inv(max_excluding(confident, out.winner)));
    out.clamped = inv.clamped;
    return out;
}

ImprovementCheck improvement_check(std::span<const double> p_sup, std::span<const double> p_theta,
                                   double sigma)
{
    check_probability_vector(p_sup, "base probabilities");
    check_probability_vector(p_theta, "extended probabilities");
    if (p_theta.size() != p_sup.size() + 1) {
        throw std::invalid_argument("extended probabilities need exactly one more entry than base");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");

    const std::size_t winner = argmax_of(p_sup);
    if (argmax_of(p_theta.first(p_sup.size())) != winner) {
        throw std::invalid_argument("improvement check needs the same winning class in both vectors");
    }
    ClampedInverse inv;
    ImprovementCheck out;
    out.lhs = inv(max_excluding(p_sup, winner)) - inv(max_excluding(p_theta, winner));
    out.rhs = p_sup[winner] == p_theta[winner]
                  ? 0.0
                  : inv.upper(p_sup[winner], sum_excluding(p_sup, winner)) -
                        inv.upper(p_theta[winner], sum_excluding(p_theta, winner));
    out.predicts_improvement = out.lhs > out.rhs;
    out.clamped = inv.clamped;
    return out;
}

} // namespace certsmooth
