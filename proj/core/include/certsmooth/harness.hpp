#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "certsmooth/calibration.hpp"
#include "certsmooth/certifier.hpp"
#include "certsmooth/classifier.hpp"

namespace certsmooth {

enum class ClassifierKind { Mlp, Linear, Region1D, Region2D };

ClassifierKind parse_classifier_kind(std::string_view name);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::Mlp;
    std::string path;
};

/// Everything a dataset certification run needs. Paths in a config file are
/// resolved relative to the file's directory.
struct RunConfig {
    ClassifierSpec classifier;
    UncertaintyConfig uncertainty = UncertaintyConfig::disabled();
    SamplingConfig sampling;
    std::vector<CertificationMode> modes{CertificationMode::Standard};
    std::string dataset_path;
    std::string output_path;
    std::size_t stride = 1; ///< certify every stride-th sample

    /// Throws std::invalid_argument on a zero stride or invalid sampling knobs.
    void validate() const;
};

/// Parses the JSON config; throws InputError tagged with the path.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir = "");

/// Parses "standard,cc,ncl".
std::vector<CertificationMode> parse_mode_list(std::string_view list);

/// Region classifiers are returned as-is; base classifiers are wrapped with the
/// run's uncertainty rule.
std::unique_ptr<ExtendedClassifier> load_classifier(const ClassifierSpec& spec,
                                                    const UncertaintyConfig& uncertainty);

/// A base classifier for calibration; region files are rejected.
std::shared_ptr<const BaseClassifier> load_base_classifier(const ClassifierSpec& spec);

struct PerSampleRecord {
    std::size_t index = 0;
    std::size_t true_label = 0;
    std::vector<CertificationResult> results; ///< one per mode, in run order

    const CertificationResult* find(CertificationMode mode) const noexcept;
};

struct RunOutput {
    std::vector<PerSampleRecord> records;
    std::vector<std::string> warnings;
};

/// Per-sample seed of a dataset run; every mode of one sample shares it.
std::uint64_t sample_seed(std::uint64_t run_seed, std::size_t index) noexcept;

/// Certifies every stride-th sample of `data` in every mode. Samples are
/// spread across `workers`; records come back ordered by sample index and are
/// identical for any worker count.
RunOutput run_certify_dataset(const ExtendedClassifier& f, const LabeledDataset& data,
                              const RunConfig& cfg, unsigned workers = 1);

/// Loads classifier and dataset named by cfg, then certifies.
RunOutput run_certify_dataset(const RunConfig& cfg, unsigned workers = 1);

/// Records CSV. Columns: index, true_label, mode, predicted, abstain_reason,
/// radius, pa_lower, pb_upper, p_uncertain_hat, one_vs_all, distinct_labels,
/// runner_up. Numbers use shortest round-trip formatting.
void write_records_csv(std::ostream& out, const std::vector<PerSampleRecord>& records);
std::vector<PerSampleRecord> read_records_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<PerSampleRecord> load_records_csv(const std::string& path);

inline const std::vector<double> kDefaultRadiusGrid{0.0, 0.2, 0.4, 0.6, 0.8};

struct CertifiedAccuracyTable {
    std::vector<double> grid;
    /// Per mode, the certified accuracy at each grid radius.
    std::vector<std::pair<CertificationMode, std::vector<double>>> rows;
    std::size_t samples = 0;
};

/// Fraction of samples that certify, predict the true class, and have radius > r.
CertifiedAccuracyTable build_certified_accuracy_table(const std::vector<PerSampleRecord>& records,
                                                      const std::vector<double>& grid = kDefaultRadiusGrid);
void write_table_csv(std::ostream& out, const CertifiedAccuracyTable& table);
void write_table_text(std::ostream& out, const CertifiedAccuracyTable& table);

struct SignCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
    std::size_t zero = 0;
};

struct RadiusComparison {
    /// Samples certified in all three modes with one shared, correct prediction.
    std::size_t eligible = 0;
    double mean_relative_cc = 0.0;  ///< mean of (R_CC - R) / R
    double mean_relative_ncl = 0.0; ///< mean of (R_NCL - R) / R
    SignCounts cc;                  ///< sign of R_CC - R
    SignCounts ncl;                 ///< sign of R_NCL - R
};

RadiusComparison compare_radii(const std::vector<PerSampleRecord>& records);
void write_comparison_csv(std::ostream& out, const RadiusComparison& cmp);

struct OodFractions {
    std::size_t samples = 0;
    double uncertain_predicted = 0.0;
    double uncertain_runner_up = 0.0;
    double no_runner_up = 0.0;
    double no_uncertain_mass = 0.0; ///< estimation drew no uncertain label
    double abstain = 0.0;           ///< abstained for a reason other than an uncertain winner
};

struct OodStatistics {
    OodFractions id;
    OodFractions ood;
};

/// Fractions over the CC-mode results of each record set.
OodFractions ood_fractions(const std::vector<PerSampleRecord>& records);
OodStatistics ood_statistics(const std::vector<PerSampleRecord>& id_records,
                             const std::vector<PerSampleRecord>& ood_records);
void write_ood_csv(std::ostream& out, const OodStatistics& stats);

/// Per mode: distinct selection-stage label count -> number of samples.
using LabelHistogram = std::map<CertificationMode, std::map<std::size_t, std::size_t>>;

LabelHistogram neighboring_class_histogram(const std::vector<PerSampleRecord>& records);
void write_histogram_csv(std::ostream& out, const LabelHistogram& hist);

} // namespace certsmooth
