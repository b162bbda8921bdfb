#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fosemu/data.hpp"
#include "fosemu/diagnostics.hpp"
#include "fosemu/experiment.hpp"
#include "fosemu/prediction.hpp"
#include "fosemu/sampler.hpp"
#include "fosemu/scoring.hpp"

namespace fosemu::io {

/// 17 significant digits, enough for an exact double round trip.
std::string format_number(double x);

/// Minimal CSV table: a header row and string cells. Fields may not contain commas.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws DataValidationError when absent.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// Design: run_id,height_m,angle_deg,cohesion_kpa,friction_deg,permeability_m_per_s
std::string design_csv(const Design& design);
/// Reads the design; ranges are set to the observed bounding box, seed to 0.
Design read_design(const std::filesystem::path& path);

// Series: run_id,year,fos. A run is censored when its last excess (fos - 1) is positive.
std::string series_csv(std::span<const FoSSeries> series);
/// Parses and validates every run, throwing DataValidationError with all violations.
std::vector<FoSSeries> read_series(const std::filesystem::path& path, std::size_t min_observations = kMinObservations);

std::string truth_json(const SyntheticTruth& truth);
SyntheticTruth read_truth(const std::filesystem::path& path);

/// One line per draw: chain, iteration and every named parameter, in order.
std::string draws_jsonl(const PosteriorDraws& draws);
PosteriorDraws read_draws(const std::filesystem::path& path);

std::string summary_json(const DiagnosticsReport& report);

// Band: year,mean,lo95,hi95
std::string band_csv(const PredictionBand& band);
/// Per-draw noisy FoS, one row per draw, one column per grid year.
std::string band_samples_csv(const PredictionBand& band);
std::string ttf_json(const TTFDistribution& ttf, std::string_view label, bool include_samples);

// Scores: run_id,year,squared_error,crps
std::string scores_csv(std::span<const RunScores> scores);
std::vector<RunScores> read_scores(const std::filesystem::path& path);
// Differences: run_id,year,delta_mse,delta_crps
std::string comparison_csv(const ScoreTable& table);
std::string comparison_json(const ScoreTable& table);

/// FoS against years with the posterior mean as a solid line and the 95% bounds dashed.
/// Optional observations are drawn as points.
std::string band_svg(const PredictionBand& band, std::string_view title,
                     std::span<const double> obs_years = {}, std::span<const double> obs_fos = {});

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fingerprint(std::string_view text);

/// Everything needed to reuse a fit: the model, the training design and its
/// standardization, the chain settings and where the draws live.
struct FittedModelArchive {
    std::string tool_version;
    ModelKind model = ModelKind::bspline;
    double nugget = 0.0;
    StandardizationStats stats;
    std::vector<int> run_ids;
    std::vector<InitialConditions> design;
    ChainConfig chains;
    std::string draws_file;         ///< relative to the archive's directory
    std::string data_fingerprint;   ///< of the training series CSV text
    std::string stats_fingerprint;  ///< of the standardization stats and design

    /// Standardized training design in run order.
    Eigen::MatrixXd z_training() const;
};

std::string stats_fingerprint(const StandardizationStats& stats, std::span<const int> run_ids,
                              std::span<const InitialConditions> design);
std::string archive_json(const FittedModelArchive& archive);
/// Throws DataValidationError when the stored stats fingerprint does not match its contents.
FittedModelArchive read_archive(const std::filesystem::path& path);

}  // namespace fosemu::io
