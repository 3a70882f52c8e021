#include "certsmooth/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "certsmooth/errors.hpp"
#include "certsmooth/noise.hpp"
#include "certsmooth/parallel.hpp"
#include "json_util.hpp"

namespace certsmooth {

using nlohmann::json;

ClassifierKind parse_classifier_kind(std::string_view name)
{
    if (name == "mlp") return ClassifierKind::Mlp;
    if (name == "linear") return ClassifierKind::Linear;
    if (name == "region1d") return ClassifierKind::Region1D;
    if (name == "region2d") return ClassifierKind::Region2D;
    throw std::invalid_argument("unknown classifier kind '" + std::string(name) + "'");
}

void RunConfig::validate() const
{
    if (stride == 0) throw std::invalid_argument("stride must be at least 1");
    sampling.validate();
    uncertainty.validate();
}

std::vector<CertificationMode> parse_mode_list(std::string_view list)
{
    std::vector<CertificationMode> modes;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t comma = std::min(list.find(',', pos), list.size());
        const std::string_view item = list.substr(pos, comma - pos);
        if (!item.empty()) {
            const CertificationMode m = parse_mode(item);
            if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
        }
        pos = comma + 1;
    }
    return modes;
}

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path)
{
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

} // namespace

RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir)
{
    const json doc = json::parse(json_text);
    RunConfig cfg;

    const json& jc = doc.at("classifier");
    cfg.classifier.kind = parse_classifier_kind(jc.at("kind").get<std::string>());
    cfg.classifier.path = resolve_path(base_dir, jc.at("path").get<std::string>());

    if (doc.contains("uncertainty") && !doc["uncertainty"].is_null()) {
        const json& ju = doc["uncertainty"];
        cfg.uncertainty.kind = parse_uncertainty_kind(ju.value("kind", "margin"));
        if (ju.contains("theta") && !ju["theta"].is_null()) cfg.uncertainty.theta = ju["theta"].get<double>();
    }

    if (doc.contains("sampling")) {
        const json& js = doc["sampling"];
        cfg.sampling.sigma = js.value("sigma", cfg.sampling.sigma);
        cfg.sampling.n0 = js.value("n0", cfg.sampling.n0);
        cfg.sampling.n = js.value("n", cfg.sampling.n);
        cfg.sampling.alpha = SignificanceLevel(js.value("alpha", cfg.sampling.alpha.value()));
        cfg.sampling.seed = js.value("seed", cfg.sampling.seed);
    }

    if (doc.contains("modes")) {
        const json& jm = doc["modes"];
        if (jm.is_string()) {
            cfg.modes = parse_mode_list(jm.get<std::string>());
        } else {
            cfg.modes.clear();
            for (const json& m : jm) cfg.modes.push_back(parse_mode(m.get<std::string>()));
        }
    }

    cfg.dataset_path = resolve_path(base_dir, doc.value("dataset", std::string()));
    cfg.output_path = resolve_path(base_dir, doc.value("output", std::string()));
    cfg.stride = doc.value("stride", std::size_t{1});
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path)
{
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return detail::load_with(path, [&](std::string_view text) { return parse_run_config(text, dir); });
}

std::shared_ptr<const BaseClassifier> load_base_classifier(const ClassifierSpec& spec)
{
    switch (spec.kind) {
    case ClassifierKind::Mlp: return std::make_shared<MlpClassifier>(load_mlp(spec.path));
    case ClassifierKind::Linear: return std::make_shared<LinearClassifier>(load_linear(spec.path));
    case ClassifierKind::Region1D:
    case ClassifierKind::Region2D: break;
    }
    throw std::invalid_argument("region classifiers have no class distribution to calibrate");
}

std::unique_ptr<ExtendedClassifier> load_classifier(const ClassifierSpec& spec,
                                                    const UncertaintyConfig& uncertainty)
{
    if (spec.kind == ClassifierKind::Region1D || spec.kind == ClassifierKind::Region2D) {
        auto rc = load_region(spec.path);
        const bool is_1d = dynamic_cast<const RegionClassifier1D*>(rc.get()) != nullptr;
        if (is_1d != (spec.kind == ClassifierKind::Region1D)) {
            throw InputError(spec.path, "region file does not match classifier kind");
        }
        return rc;
    }
    return std::make_unique<UncertaintyEquippedClassifier>(load_base_classifier(spec), uncertainty);
}

const CertificationResult* PerSampleRecord::find(CertificationMode mode) const noexcept
{
    for (const CertificationResult& r : results) {
        if (r.mode == mode) return &r;
    }
    return nullptr;
}

std::uint64_t sample_seed(std::uint64_t run_seed, std::size_t index) noexcept
{
    return derive_seed(run_seed, index);
}

RunOutput run_certify_dataset(const ExtendedClassifier& f, const LabeledDataset& data,
                              const RunConfig& cfg, unsigned workers)
{
    cfg.validate();
    RunOutput out;
    if (cfg.modes.empty()) {
        out.warnings.emplace_back("no certification modes requested");
        return out;
    }
    if (data.dim() != f.input_dim()) {
        throw std::invalid_argument("dataset dimension " + std::to_string(data.dim()) +
                                    " does not match classifier dimension " +
                                    std::to_string(f.input_dim()));
    }

    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < data.size(); i += cfg.stride) selected.push_back(i);
    out.records.resize(selected.size());

    parallel_chunks(selected.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const std::size_t index = selected[s];
            SamplingConfig sampling = cfg.sampling;
            sampling.seed = sample_seed(cfg.sampling.seed, index);
            PerSampleRecord& rec = out.records[s];
            rec.index = index;
            rec.true_label = data[index].label;
            for (CertificationMode mode : cfg.modes) {
                rec.results.push_back(certify(f, data[index].x, sampling, mode));
            }
        }
    });
    return out;
}

RunOutput run_certify_dataset(const RunConfig& cfg, unsigned workers)
{
    const auto f = load_classifier(cfg.classifier, cfg.uncertainty);
    const LabeledDataset data = load_dataset_jsonl(cfg.dataset_path);
    return run_certify_dataset(*f, data, cfg, workers);
}

// ---------------------------------------------------------------------------
// Records CSV

namespace {

constexpr std::string_view kRecordsHeader =
    "index,true_label,mode,predicted,abstain_reason,radius,pa_lower,pb_upper,p_uncertain_hat,"
    "one_vs_all,distinct_labels,runner_up";

std::string format_optional(const std::optional<double>& v)
{
    return v ? fmt::format("{}", *v) : std::string();
}

std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

std::size_t parse_size(std::string_view s)
{
    std::size_t pos = 0;
    const std::string str(s);
    const unsigned long long v = std::stoull(str, &pos);
    if (pos != str.size()) throw std::invalid_argument("not an integer: '" + str + "'");
    return static_cast<std::size_t>(v);
}

std::optional<double> parse_optional_double(std::string_view s)
{
    if (s.empty()) return std::nullopt;
    std::size_t pos = 0;
    const std::string str(s);
    const double v = std::stod(str, &pos);
    if (pos != str.size()) throw std::invalid_argument("not a number: '" + str + "'");
    return v;
}

std::optional<ExtendedLabel> parse_label_field(std::string_view s)
{
    if (s.empty() || s == "abstain") return std::nullopt;
    if (s == "uncertain") return ExtendedLabel::uncertain();
    return ExtendedLabel::confident(parse_size(s));
}

} // namespace

void write_records_csv(std::ostream& out, const std::vector<PerSampleRecord>& records)
{
    out << kRecordsHeader << '\n';
    for (const PerSampleRecord& rec : records) {
        for (const CertificationResult& r : rec.results) {
            out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", rec.index, rec.true_label,
                               to_string(r.mode), r.predicted ? r.predicted->to_string() : "abstain",
                               to_string(r.abstain), format_optional(r.radius),
                               format_optional(r.pa_lower), format_optional(r.pb_upper),
                               format_optional(r.p_uncertain_hat), r.used_one_vs_all ? 1 : 0,
                               r.distinct_labels, r.runner_up ? r.runner_up->to_string() : "");
        }
    }
}

std::vector<PerSampleRecord> read_records_csv(std::istream& in, const std::string& source)
{
    std::vector<PerSampleRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.rfind("index,true_label,mode", 0) != 0) {
                throw InputError(source, line_no, "missing records header");
            }
            continue;
        }
        try {
            const auto f = split_csv(line);
            if (f.size() < 11) throw std::invalid_argument("expected at least 11 columns");
            CertificationResult r;
            const std::size_t index = parse_size(f[0]);
            const std::size_t true_label = parse_size(f[1]);
            r.mode = parse_mode(f[2]);
            r.predicted = parse_label_field(f[3]);
            r.abstain = parse_abstain_reason(f[4]);
            r.radius = parse_optional_double(f[5]);
            r.pa_lower = parse_optional_double(f[6]);
            r.pb_upper = parse_optional_double(f[7]);
            r.p_uncertain_hat = parse_optional_double(f[8]);
            r.used_one_vs_all = f[9] == "1";
            r.distinct_labels = parse_size(f[10]);
            if (f.size() > 11) r.runner_up = parse_label_field(f[11]);

            if (records.empty() || records.back().index != index) {
                records.push_back({index, true_label, {}});
            }
            records.back().results.push_back(r);
        } catch (const InputError&) {
            throw;
        } catch (const std::exception& e) {
            throw InputError(source, line_no, e.what());
        }
    }
    return records;
}

std::vector<PerSampleRecord> load_records_csv(const std::string& path)
{
    std::istringstream in(read_text_file(path));
    return read_records_csv(in, path);
}

// ---------------------------------------------------------------------------
// Summaries

namespace {

std::vector<CertificationMode> modes_in(const std::vector<PerSampleRecord>& records)
{
    std::vector<CertificationMode> modes;
    for (const PerSampleRecord& rec : records) {
        for (const CertificationResult& r : rec.results) {
            if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
        }
    }
    std::sort(modes.begin(), modes.end());
    return modes;
}

bool predicts_truth(const CertificationResult& r, std::size_t true_label)
{
    return r.predicted && !r.predicted->is_uncertain() && r.predicted->class_index() == true_label;
}

double ratio(std::size_t hits, std::size_t total)
{
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

void count_sign(SignCounts& s, double diff)
{
    if (diff > 0.0) {
        ++s.positive;
    } else if (diff < 0.0) {
        ++s.negative;
    } else {
        ++s.zero;
    }
}

} // namespace

CertifiedAccuracyTable build_certified_accuracy_table(const std::vector<PerSampleRecord>& records,
                                                      const std::vector<double>& grid)
{
    CertifiedAccuracyTable table;
    table.grid = grid;
    table.samples = records.size();
    for (CertificationMode mode : modes_in(records)) {
        std::vector<double> row;
        for (double r : grid) {
            std::size_t hits = 0;
            for (const PerSampleRecord& rec : records) {
                const CertificationResult* res = rec.find(mode);
                if (res && res->certified() && predicts_truth(*res, rec.true_label) && *res->radius > r) {
                    ++hits;
                }
            }
            row.push_back(ratio(hits, records.size()));
        }
        table.rows.emplace_back(mode, std::move(row));
    }
    return table;
}

void write_table_csv(std::ostream& out, const CertifiedAccuracyTable& table)
{
    out << "mode,radius,certified_accuracy\n";
    for (const auto& [mode, row] : table.rows) {
        for (std::size_t i = 0; i < table.grid.size(); ++i) {
            out << fmt::format("{},{},{}\n", to_string(mode), table.grid[i], row[i]);
        }
    }
}

void write_table_text(std::ostream& out, const CertifiedAccuracyTable& table)
{
    out << fmt::format("{:<10}", "mode");
    for (double r : table.grid) out << fmt::format("{:>10}", fmt::format("r={:.2f}", r));
    out << '\n';
    for (const auto& [mode, row] : table.rows) {
        out << fmt::format("{:<10}", to_string(mode));
        for (double v : row) out << fmt::format("{:>10.2f}", 100.0 * v);
        out << '\n';
    }
    out << fmt::format("({} samples, certified accuracy in %)\n", table.samples);
}

RadiusComparison compare_radii(const std::vector<PerSampleRecord>& records)
{
    RadiusComparison cmp;
    double sum_cc = 0.0;
    double sum_ncl = 0.0;
    for (const PerSampleRecord& rec : records) {
        const CertificationResult* std_r = rec.find(CertificationMode::Standard);
        const CertificationResult* cc = rec.find(CertificationMode::CC);
        const CertificationResult* ncl = rec.find(CertificationMode::NCL);
        if (!std_r || !cc || !ncl) continue;
        if (!std_r->certified() || !cc->certified() || !ncl->certified()) continue;
        if (std_r->predicted != cc->predicted || std_r->predicted != ncl->predicted) continue;
        if (!predicts_truth(*std_r, rec.true_label)) continue;

        const double r = *std_r->radius;
        ++cmp.eligible;
        sum_cc += (*cc->radius - r) / r;
        sum_ncl += (*ncl->radius - r) / r;
        count_sign(cmp.cc, *cc->radius - r);
        count_sign(cmp.ncl, *ncl->radius - r);
    }
    if (cmp.eligible > 0) {
        cmp.mean_relative_cc = sum_cc / static_cast<double>(cmp.eligible);
        cmp.mean_relative_ncl = sum_ncl / static_cast<double>(cmp.eligible);
    }
    return cmp;
}

void write_comparison_csv(std::ostream& out, const RadiusComparison& cmp)
{
    out << "radius,mean_relative_change,positive,negative,zero,eligible\n";
    out << fmt::format("cc,{},{},{},{},{}\n", cmp.mean_relative_cc, cmp.cc.positive, cmp.cc.negative,
                       cmp.cc.zero, cmp.eligible);
    out << fmt::format("ncl,{},{},{},{},{}\n", cmp.mean_relative_ncl, cmp.ncl.positive,
                       cmp.ncl.negative, cmp.ncl.zero, cmp.eligible);
}

OodFractions ood_fractions(const std::vector<PerSampleRecord>& records)
{
    std::size_t total = 0;
    std::size_t uncertain_predicted = 0;
    std::size_t uncertain_runner_up = 0;
    std::size_t no_runner_up = 0;
    std::size_t no_mass = 0;
    std::size_t abstain = 0;
    for (const PerSampleRecord& rec : records) {
        const CertificationResult* r = rec.find(CertificationMode::CC);
        if (!r) continue;
        ++total;
        if (r->predicted && r->predicted->is_uncertain()) ++uncertain_predicted;
        if (r->runner_up && r->runner_up->is_uncertain()) ++uncertain_runner_up;
        if (r->predicted && !r->runner_up) ++no_runner_up;
        // Only samples that reached the estimation stage can show zero uncertain mass.
        if (r->p_uncertain_hat && *r->p_uncertain_hat == 0.0) ++no_mass;
        if (r->abstain == AbstainReason::NoConfidentWinner ||
            r->abstain == AbstainReason::NonpositiveRadius) {
            ++abstain;
        }
    }
    return {total,
            ratio(uncertain_predicted, total),
            ratio(uncertain_runner_up, total),
            ratio(no_runner_up, total),
            ratio(no_mass, total),
            ratio(abstain, total)};
}

OodStatistics ood_statistics(const std::vector<PerSampleRecord>& id_records,
                             const std::vector<PerSampleRecord>& ood_records)
{
    return {ood_fractions(id_records), ood_fractions(ood_records)};
}

void write_ood_csv(std::ostream& out, const OodStatistics& stats)
{
    out << "dataset,samples,uncertain_predicted,uncertain_runner_up,no_runner_up,no_uncertain_mass,"
           "abstain\n";
    for (const auto& [name, f] : {std::pair{"id", stats.id}, std::pair{"ood", stats.ood}}) {
        out << fmt::format("{},{},{},{},{},{},{}\n", name, f.samples, f.uncertain_predicted,
                           f.uncertain_runner_up, f.no_runner_up, f.no_uncertain_mass, f.abstain);
    }
}

LabelHistogram neighboring_class_histogram(const std::vector<PerSampleRecord>& records)
{
    LabelHistogram hist;
    for (const PerSampleRecord& rec : records) {
        for (const CertificationResult& r : rec.results) ++hist[r.mode][r.distinct_labels];
    }
    return hist;
}

void write_histogram_csv(std::ostream& out, const LabelHistogram& hist)
{
    out << "mode,distinct_labels,samples\n";
    for (const auto& [mode, bins] : hist) {
        for (const auto& [labels, count] : bins) {
            out << fmt::format("{},{},{}\n", to_string(mode), labels, count);
        }
    }
}

} // namespace certsmooth
