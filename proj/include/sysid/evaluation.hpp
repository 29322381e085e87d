#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sysid/calibration.hpp"
#include "sysid/param_space.hpp"

namespace sysid {

// ------------------------------------------------------------------ holdout

struct HoldoutEntry {
    std::string holdout;  // "H1".."H4"
    int repeat = 1;
    /// +inf for a diverged simulation; NaN when the recording is missing.
    double error = 0.0;
    bool missing = false;
};

struct HoldoutReport {
    std::string method;
    std::uint64_t seed = 0;
    Platform platform = Platform::finger;
    std::vector<HoldoutEntry> entries;

    bool complete() const;
    /// Mean over the entries that are present.
    double mean() const;
    /// Mean per holdout name, in H1..H4 order.
    std::vector<std::pair<std::string, double>> per_holdout() const;
};

/// Simulates `params` under each holdout profile and compares against every
/// repeat. A missing recording leaves explicit gaps rather than failing.
HoldoutReport evaluate_holdout(const ParameterVector& params, const std::array<ControlProfile, 4>& holdouts,
                               const Simulator& sim, const ObservationSource& source, int repeats = 3,
                               const CompareOptions& options = {});

// -------------------------------------------------------------- aggregation

struct SeedAggregate {
    double mean = 0.0;
    /// Population standard deviation (divide by N).
    double std = 0.0;
    double best = 0.0;
};

SeedAggregate aggregate_seeds(std::span<const double> seed_means);

/// Ranks 1..n by ascending value; tied values share the mean of their positions.
std::vector<double> rank_with_ties(std::span<const double> values);

struct SettingMeans {
    std::string setting;
    std::vector<std::pair<std::string, double>> means;  // method, mean
};

struct RankResult {
    std::vector<std::string> methods;
    std::vector<std::string> settings;
    /// ranks[s][m] for setting s and method m.
    std::vector<std::vector<double>> ranks;
    std::vector<double> average;
    /// Methods dropped because a setting lacked their mean.
    std::vector<std::string> excluded;

    std::optional<double> average_of(std::string_view method) const;
};

/// Methods are ranked within each setting and the ranks averaged. A method
/// missing from any setting is excluded with a warning.
RankResult average_rank(const std::vector<SettingMeans>& table);

/// One decimal, as displayed in summary tables.
std::string format_rank(double rank);

// --------------------------------------------------------------- confidence

struct ConfidenceRecord {
    double confidence = 0.0;
    double error_before = 0.0;
    double error_after = 0.0;

    bool success() const noexcept { return error_after < error_before; }
};

struct Precision {
    /// Empty when no record passes the filter.
    std::optional<double> value;
    std::size_t n = 0;
};

/// Success rate among records with confidence >= tau, skipping records whose
/// error_before exceeds `catastrophic`.
Precision confidence_precision(std::span<const ConfidenceRecord> records, double tau, double catastrophic = 100.0);

/// Pairs each recommended iteration with the error of the iteration it was proposed from.
std::vector<ConfidenceRecord> confidence_records(const RunHistory& history);

// ----------------------------------------------------------------- recovery

struct RecoveryReport {
    /// Normalized distance of the best-so-far parameters after each iteration.
    std::vector<double> distance;
    RelativeErrorReport relative;
};

RecoveryReport recovery_report(const RunHistory& history, const ParameterVector& ground_truth,
                               const ParameterBounds& bounds);

struct RecoverySummary {
    std::size_t best_seed = 0;
    std::vector<std::string> names;
    /// Per-parameter percent of the best seed, empty where undefined.
    std::vector<std::optional<double>> best_seed_percent;
    double best_seed_mean = 0.0;
    /// Per-parameter percent averaged over seeds.
    std::vector<std::optional<double>> cross_seed_percent;
    double cross_seed_mean = 0.0;
};

/// Best seed is the one with the lowest best training error.
RecoverySummary summarize_recovery(std::span<const RecoveryReport> reports, std::span<const double> best_errors);

// -------------------------------------------------------------------- files

/// seed,holdout,repeat,error
std::string holdout_csv(std::span<const HoldoutReport> reports);
std::vector<HoldoutReport> read_holdout_csv(const std::filesystem::path& path, const std::string& method);

/// method,setting,mean,rank; one extra row per method with setting "average".
std::string ranks_csv(const RankResult& ranks, const std::vector<SettingMeans>& table);

/// method,tau,precision,n; precision empty when undefined.
std::string confidence_csv(const std::string& method, std::span<const ConfidenceRecord> records,
                           std::span<const double> taus, double catastrophic = 100.0);

}  // namespace sysid
