#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "certsmooth/classifier.hpp"
#include "certsmooth/errors.hpp"

using namespace certsmooth;

namespace {

const std::string kFixtures = CERTSMOOTH_FIXTURE_DIR;

class FixedClassifier final : public BaseClassifier {
public:
    explicit FixedClassifier(std::vector<double> p) : p_(std::move(p)) {}
    ClassDistribution classify(std::span<const double>) const override { return ClassDistribution(p_); }
    std::size_t num_classes() const noexcept override { return p_.size(); }
    std::size_t input_dim() const noexcept override { return 1; }

private:
    std::vector<double> p_;
};

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k)
{
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(k);
    double s = 0.0;
    for (double& v : p) s += (v = e(rng));
    for (double& v : p) v /= s;
    return p;
}

} // namespace

TEST_CASE("class distribution validation and argmax ties")
{
    CHECK_THROWS_AS(ClassDistribution({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution({1.2, -0.2}), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution({}), std::invalid_argument);
    CHECK(ClassDistribution({0.25, 0.375, 0.375}).argmax() == 1);
    CHECK(ClassDistribution({0.5, 0.5}).argmax() == 0);
}

TEST_CASE("extended labels")
{
    CHECK(ExtendedLabel::confident(2).slot(5) == 2);
    CHECK(ExtendedLabel::uncertain().slot(5) == 5);
    CHECK(ExtendedLabel::from_slot(5, 5).is_uncertain());
    CHECK(ExtendedLabel::confident(3).to_string() == "3");
    CHECK(ExtendedLabel::uncertain().to_string() == "uncertain");
    CHECK(ExtendedLabel::confident(0) < ExtendedLabel::uncertain());
}

TEST_CASE("uncertainty scores")
{
    const ClassDistribution d({0.6, 0.3, 0.1});
    CHECK(uncertainty_score(d, UncertaintyKind::Confidence) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(uncertainty_score(d, UncertaintyKind::Margin) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(std::abs(uncertainty_score(d, UncertaintyKind::Entropy) - 0.8979457248567798) < 1e-15);

    const ClassDistribution uniform(std::vector<double>(10, 0.1));
    CHECK(uncertainty_score(uniform, UncertaintyKind::Entropy) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    const ClassDistribution one_hot({0.0, 1.0, 0.0});
    CHECK(uncertainty_score(one_hot, UncertaintyKind::Margin) == 1.0);
    CHECK(uncertainty_score(one_hot, UncertaintyKind::Entropy) == 0.0);
}

TEST_CASE("uncertainty scores under permutation")
{
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> p = random_simplex(rng, 6);
        const double h = uncertainty_score(ClassDistribution(p), UncertaintyKind::Entropy);
        const double m = uncertainty_score(ClassDistribution(p), UncertaintyKind::Margin);
        const double c = uncertainty_score(ClassDistribution(p), UncertaintyKind::Confidence);
        std::sort(p.begin(), p.end());
        std::shuffle(p.begin(), p.end() - 2, rng);
        CHECK(uncertainty_score(ClassDistribution(p), UncertaintyKind::Entropy) == doctest::Approx(h).epsilon(1e-13));
        CHECK(uncertainty_score(ClassDistribution(p), UncertaintyKind::Margin) == m);
        CHECK(uncertainty_score(ClassDistribution(p), UncertaintyKind::Confidence) == c);
    }
}

TEST_CASE("threshold validation")
{
    CHECK_NOTHROW(UncertaintyConfig{UncertaintyKind::Margin, 0.0}.validate());
    CHECK_NOTHROW(UncertaintyConfig{UncertaintyKind::Entropy, 5.0}.validate());
    CHECK_THROWS_AS(UncertaintyConfig({UncertaintyKind::Margin, 1.5}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(UncertaintyConfig({UncertaintyKind::Confidence, -0.1}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(UncertaintyConfig({UncertaintyKind::Entropy, -0.1}).validate(), std::invalid_argument);
    CHECK(parse_uncertainty_kind("entropy") == UncertaintyKind::Entropy);
    CHECK_THROWS(parse_uncertainty_kind("variance"));
}

TEST_CASE("equipped classify rule and boundary ties")
{
    const FixedClassifier f({0.6, 0.3, 0.1});
    const std::vector<double> x{0.0};
    CHECK(equipped_classify(f, {UncertaintyKind::Margin, 0.35}, x).is_uncertain());
    CHECK(equipped_classify(f, {UncertaintyKind::Margin, 0.25}, x) == ExtendedLabel::confident(0));
    // Equality counts as uncertain.
    CHECK(equipped_classify(f, {UncertaintyKind::Confidence, 0.6}, x).is_uncertain());
    CHECK(equipped_classify(f, {UncertaintyKind::Entropy, uncertainty_score(ClassDistribution({0.6, 0.3, 0.1}), UncertaintyKind::Entropy)}, x).is_uncertain());

    const FixedClassifier uniform(std::vector<double>(4, 0.25));
    CHECK(equipped_classify(uniform, {UncertaintyKind::Entropy, std::log(4.0)}, x).is_uncertain());
    CHECK(equipped_classify(uniform, {UncertaintyKind::Entropy, std::log(4.0) + 1e-9}, x) == ExtendedLabel::confident(0));
    CHECK_THROWS_AS(equipped_classify(f, UncertaintyConfig::disabled(), std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("disabled threshold recovers argmax")
{
    std::mt19937_64 rng(5);
    const std::vector<double> x{0.0};
    for (int t = 0; t < 300; ++t) {
        const std::vector<double> p = random_simplex(rng, 5);
        const FixedClassifier f(p);
        const std::size_t want = ClassDistribution(p).argmax();
        for (UncertaintyKind kind : {UncertaintyKind::Confidence, UncertaintyKind::Margin, UncertaintyKind::Entropy}) {
            CHECK(equipped_classify(f, UncertaintyConfig::disabled(kind), x) == ExtendedLabel::confident(want));
        }
        CHECK(equipped_classify(f, {UncertaintyKind::Margin, 0.0}, x) ==
              (uncertainty_score(ClassDistribution(p), UncertaintyKind::Margin) > 0.0
                   ? ExtendedLabel::confident(want)
                   : ExtendedLabel::uncertain()));
    }
}

TEST_CASE("rejection is monotone in the threshold")
{
    std::mt19937_64 rng(9);
    for (int t = 0; t < 300; ++t) {
        const ClassDistribution d(random_simplex(rng, 4));
        for (UncertaintyKind kind : {UncertaintyKind::Confidence, UncertaintyKind::Margin}) {
            bool accepted = false;
            for (double theta = 1.0; theta >= 0.0; theta -= 0.01) {
                const bool r = UncertaintyConfig{kind, theta}.rejects(d);
                if (accepted) CHECK_FALSE(r);
                if (!r) accepted = true;
            }
        }
        bool confident = false;
        for (double theta = 0.0; theta <= 2.0; theta += 0.01) {
            const bool r = UncertaintyConfig{UncertaintyKind::Entropy, theta}.rejects(d);
            if (confident) CHECK_FALSE(r);
            if (!r) confident = true;
        }
    }
}

TEST_CASE("equipped wrapper label spaces")
{
    auto base = std::make_shared<FixedClassifier>(std::vector<double>{0.4, 0.35, 0.25});
    const UncertaintyEquippedClassifier f(base, {UncertaintyKind::Margin, 0.1});
    const std::vector<double> x{0.0};
    CHECK(f.label(x, LabelSpace::Extended).is_uncertain());
    CHECK(f.label(x, LabelSpace::Base) == ExtendedLabel::confident(0));
    CHECK(f.num_classes() == 3);
    CHECK_THROWS(UncertaintyEquippedClassifier(base, {UncertaintyKind::Margin, 2.0}));
}

TEST_CASE("mlp forward pass")
{
    MlpModel id;
    id.input_dim = 3;
    id.num_classes = 3;
    id.layers.push_back({3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, Activation::None});
    const ClassDistribution u = eval_mlp(id, std::vector<double>{0, 0, 0});
    for (double p : u.probs()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    MlpModel bin;
    bin.input_dim = 2;
    bin.num_classes = 2;
    bin.layers.push_back({2, 2, {1, 0, 0, 0}, {0, 0}, Activation::None});
    for (double t : {-3.0, 0.0, 0.7, 40.0, 800.0}) {
        const ClassDistribution d = eval_mlp(bin, std::vector<double>{t, 0.0});
        CHECK(d[0] == doctest::Approx(1.0 / (1.0 + std::exp(-t))).epsilon(1e-14));
        CHECK(std::isfinite(d[1]));
    }
}

TEST_CASE("mlp fixture matches scripted forward pass")
{
    const MlpModel m = load_mlp(kFixtures + "/mlp_2d.json");
    CHECK(m.input_dim == 2);
    CHECK(m.num_classes == 3);
    // tests/oracles/mlp_forward.py tests/fixtures/mlp_2d.json 0.5 -0.2
    const ClassDistribution a = eval_mlp(m, std::vector<double>{0.5, -0.2});
    CHECK(std::abs(a[0] - 0.54592835815717522) < 1e-14);
    CHECK(std::abs(a[1] - 0.14656774649335516) < 1e-14);
    CHECK(std::abs(a[2] - 0.30750389534946965) < 1e-14);
    // tests/oracles/mlp_forward.py tests/fixtures/mlp_2d.json -1 1.5
    const ClassDistribution b = eval_mlp(m, std::vector<double>{-1.0, 1.5});
    CHECK(std::abs(b[0] - 0.0028790266526324869) < 1e-14);
    CHECK(std::abs(b[1] - 0.93678356577220068) < 1e-14);
    CHECK(std::abs(b[2] - 0.06033740757516682) < 1e-14);
    CHECK_THROWS_AS(eval_mlp(m, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("mlp file errors")
{
    CHECK_THROWS_AS(parse_mlp(R"({"input_dim": 2, "classes": 2, "layers": [{"w": [[1, 2, 3]], "b": [0], "activation": "none"}]})"),
                    std::invalid_argument);
    CHECK_THROWS(parse_mlp(R"({"input_dim": 2, "classes": 2, "layers": [{"w": [[1, 2], [3, 4]], "b": [0, 0], "activation": "tanh"}]})"));
    CHECK_THROWS_AS(load_mlp(kFixtures + "/does_not_exist.json"), InputError);
    try {
        load_mlp(kFixtures + "/region_band.json");
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(e.path() == kFixtures + "/region_band.json");
    }
}

TEST_CASE("linear classifier")
{
    const LinearModel m = load_linear(kFixtures + "/linear_2d.json");
    CHECK(m.weight_norm() == 5.0);
    const LinearClassifier f(m);
    CHECK(f.classify(std::vector<double>{1.0, 1.0}).argmax() == 1);
    CHECK(f.classify(std::vector<double>{0.0, 0.0}).argmax() == 0);
    CHECK_THROWS(LinearModel({{0.0, 0.0}, 1.0}).validate());
}

TEST_CASE("region classifiers")
{
    const RegionClassifier1D split({0.0}, {{0, true}, {1, true}});
    CHECK(eval_region(split, std::vector<double>{-1.0}) == ExtendedLabel::confident(0));
    CHECK(eval_region(split, std::vector<double>{0.0}) == ExtendedLabel::confident(1));

    const RegionClassifier1D band({0.0, 0.5}, {{0, true}, {1, false}, {1, true}});
    CHECK(eval_region(band, std::vector<double>{0.25}).is_uncertain());
    CHECK(band.label(std::vector<double>{0.25}, LabelSpace::Base) == ExtendedLabel::confident(1));
    CHECK(band.num_classes() == 2);

    const RegionClassifier2D box({0, true}, {{{0, 0}, {1, 1}, {1, true}}});
    CHECK(eval_region(box, std::vector<double>{0.5, 0.5}) == ExtendedLabel::confident(1));
    CHECK(eval_region(box, std::vector<double>{1.5, 0.5}) == ExtendedLabel::confident(0));

    CHECK_THROWS(RegionClassifier1D({0.5, 0.5}, {{0, true}, {1, true}, {0, true}}));
    CHECK_THROWS(RegionClassifier1D({0.5}, {{0, true}}));
    CHECK_THROWS(RegionClassifier2D({0, true}, {{{0, 0}, {1, 1}, {1, true}}, {{0.5, 0.5}, {2, 2}, {1, true}}}));
}

TEST_CASE("region files")
{
    auto band = load_region(kFixtures + "/region_band.json");
    CHECK(band->input_dim() == 1);
    CHECK(band->label(std::vector<double>{0.5}, LabelSpace::Extended).is_uncertain());
    auto box = load_region(kFixtures + "/region_box.json");
    CHECK(box->input_dim() == 2);
    CHECK(box->num_classes() == 3);
    CHECK(box->label(std::vector<double>{1.5, 0.5}, LabelSpace::Extended).is_uncertain());
    CHECK(box->label(std::vector<double>{1.5, 0.5}, LabelSpace::Base) == ExtendedLabel::confident(2));

    try {
        parse_region("{\"breakpoints\": [0.5],\n \"labels\": [\n {\"class\": 0,}]}");
        FAIL("expected a parse error");
    } catch (const std::exception&) {
    }
}
