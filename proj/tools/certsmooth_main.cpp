#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "certsmooth/calibration.hpp"
#include "certsmooth/errors.hpp"
#include "certsmooth/harness.hpp"
#include "certsmooth/parallel.hpp"

namespace cs = certsmooth;

namespace {

struct GlobalOptions {
    std::optional<double> sigma;
    std::optional<std::uint64_t> n0;
    std::optional<std::uint64_t> n;
    std::optional<double> alpha;
    std::optional<double> theta;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void apply_overrides(const GlobalOptions& g, cs::RunConfig& cfg)
{
    if (g.sigma) cfg.sampling.sigma = *g.sigma;
    if (g.n0) cfg.sampling.n0 = *g.n0;
    if (g.n) cfg.sampling.n = *g.n;
    if (g.alpha) cfg.sampling.alpha = cs::SignificanceLevel(*g.alpha);
    if (g.theta) cfg.uncertainty.theta = *g.theta;
    if (g.seed) cfg.sampling.seed = *g.seed;
    if (!g.out.empty()) cfg.output_path = g.out;
}

// Writes through `emit` to the file at `path`, or to stdout when it is empty.
template <class Emit>
void write_output(const std::string& path, Emit&& emit)
{
    if (path.empty()) {
        emit(std::cout);
        return;
    }
    std::ostringstream buffer;
    emit(buffer);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw cs::InputError(path, "cannot open for writing");
    file << buffer.str();
    if (!file) throw cs::InputError(path, "write failed");
}

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        const double r = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("bad grid value '" + item + "'");
        grid.push_back(r);
    }
    if (grid.empty()) throw std::invalid_argument("empty radius grid");
    return grid;
}

int run_certify(const GlobalOptions& g, const std::string& config_path,
                const std::optional<std::string>& modes, const std::optional<std::size_t>& stride)
{
    cs::RunConfig cfg = cs::load_run_config(config_path);
    apply_overrides(g, cfg);
    if (modes) cfg.modes = cs::parse_mode_list(*modes);
    if (stride) cfg.stride = *stride;
    cfg.validate();

    const cs::RunOutput out = cs::run_certify_dataset(cfg, cs::default_worker_count());
    for (const std::string& w : out.warnings) std::cerr << "warning: " << w << '\n';
    write_output(cfg.output_path, [&](std::ostream& os) { cs::write_records_csv(os, out.records); });
    return 0;
}

int run_calibrate(const GlobalOptions& g, const std::string& config_path, const std::string& kind,
                  double budget, std::size_t steps)
{
    const cs::RunConfig run = cs::load_run_config(config_path);
    cs::CalibrationConfig cfg;
    cfg.kind = cs::parse_uncertainty_kind(kind);
    cfg.budget = budget;
    cfg.steps = steps;
    cfg.sigma = g.sigma.value_or(run.sampling.sigma);
    cfg.n0 = g.n0.value_or(run.sampling.n0);
    cfg.seed = g.seed.value_or(run.sampling.seed);

    const auto f = cs::load_base_classifier(run.classifier);
    const cs::LabeledDataset data = cs::load_dataset_jsonl(run.dataset_path);
    const cs::CalibrationResult result = cs::calibrate_threshold(*f, cfg, data, cs::default_worker_count());

    if (result.warning) {
        std::cerr << "warning: the least restrictive threshold already exceeds the accuracy budget\n";
    }
    std::cout << fmt::format("kind: {}\ntheta: {}\nbaseline_accuracy: {}\naccuracy: {}\n",
                             cs::to_string(cfg.kind), result.theta, result.baseline_accuracy,
                             result.accuracy);
    if (!g.out.empty()) {
        write_output(g.out, [&](std::ostream& os) { cs::write_calibration_trace_csv(os, result); });
    }
    return 0;
}

int run_table(const GlobalOptions& g, const std::string& records_path, const std::string& grid)
{
    const auto records = cs::load_records_csv(records_path);
    const cs::CertifiedAccuracyTable table = cs::build_certified_accuracy_table(records, parse_grid(grid));
    cs::write_table_text(std::cout, table);
    if (!g.out.empty()) {
        write_output(g.out, [&](std::ostream& os) { cs::write_table_csv(os, table); });
    }
    return 0;
}

int run_compare(const GlobalOptions& g, const std::string& records_path)
{
    const cs::RadiusComparison cmp = cs::compare_radii(cs::load_records_csv(records_path));
    write_output(g.out, [&](std::ostream& os) { cs::write_comparison_csv(os, cmp); });
    return 0;
}

int run_ood(const GlobalOptions& g, const std::string& id_path, const std::string& ood_path)
{
    const cs::OodStatistics stats =
        cs::ood_statistics(cs::load_records_csv(id_path), cs::load_records_csv(ood_path));
    write_output(g.out, [&](std::ostream& os) { cs::write_ood_csv(os, stats); });
    return 0;
}

int run_hist(const GlobalOptions& g, const std::string& records_path)
{
    const cs::LabelHistogram hist = cs::neighboring_class_histogram(cs::load_records_csv(records_path));
    write_output(g.out, [&](std::ostream& os) { cs::write_histogram_csv(os, hist); });
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Certified radii for smoothed classifiers with an uncertainty class"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--sigma", g.sigma, "noise standard deviation");
    app.add_option("--n0", g.n0, "selection-stage samples");
    app.add_option("--n", g.n, "estimation-stage samples");
    app.add_option("--alpha", g.alpha, "significance level");
    app.add_option("--theta", g.theta, "uncertainty threshold");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--out", g.out, "output file (default: stdout)");

    std::string config;
    std::optional<std::string> modes;
    std::optional<std::size_t> stride;
    auto* certify = app.add_subcommand("certify", "certify a dataset and write the records CSV");
    certify->add_option("--config", config, "run config (JSON)")->required();
    certify->add_option("--mode", modes, "comma-separated modes: standard,cc,ncl");
    certify->add_option("--stride", stride, "certify every k-th sample");

    std::string kind;
    double budget = 0.01;
    std::size_t steps = 1000;
    auto* calibrate = app.add_subcommand("calibrate", "pick the uncertainty threshold on a validation set");
    calibrate->add_option("--config", config, "run config naming classifier and validation set")->required();
    calibrate->add_option("--kind", kind, "confidence, margin or entropy")
        ->required()
        ->check(CLI::IsMember({"confidence", "margin", "entropy"}));
    calibrate->add_option("--budget", budget, "allowed relative accuracy loss");
    calibrate->add_option("--steps", steps, "number of sweep steps");

    std::string records;
    std::string grid = "0,0.2,0.4,0.6,0.8";
    auto* table = app.add_subcommand("table", "certified accuracy at each grid radius");
    table->add_option("--records", records, "records CSV")->required();
    table->add_option("--grid", grid, "comma-separated radii");

    auto* compare = app.add_subcommand("compare", "per-sample change of R_CC and R_NCL against R");
    compare->add_option("--records", records, "records CSV")->required();

    std::string id_path;
    std::string ood_path;
    auto* ood = app.add_subcommand("ood", "uncertainty statistics of ID versus OOD CC runs");
    ood->add_option("--id", id_path, "records CSV of the in-distribution run")->required();
    ood->add_option("--ood", ood_path, "records CSV of the out-of-distribution run")->required();

    auto* hist = app.add_subcommand("hist", "histogram of distinct labels among selection draws");
    hist->add_option("--records", records, "records CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (certify->parsed()) return run_certify(g, config, modes, stride);
        if (calibrate->parsed()) return run_calibrate(g, config, kind, budget, steps);
        if (table->parsed()) return run_table(g, records, grid);
        if (compare->parsed()) return run_compare(g, records);
        if (ood->parsed()) return run_ood(g, id_path, ood_path);
        if (hist->parsed()) return run_hist(g, records);
    } catch (const cs::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
