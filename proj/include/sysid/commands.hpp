#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sysid {

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_run_failure = 3 };

/// Command-line overrides applied on top of the spec file.
struct SpecOverrides {
    std::optional<std::string> seeds;   // "0,1,2"
    std::optional<std::string> method;  // one method name
    std::optional<std::string> flags;   // "no-video,no-history"
    std::optional<int> budget;
};

struct CalibrateOptions {
    std::filesystem::path spec;
    std::filesystem::path out;
    SpecOverrides overrides;
    bool force = false;
};

/// One run per (method, seed) under out/<method>/seed_<n>/. Nonzero when any run aborted.
int cmd_calibrate(const CalibrateOptions& options, std::ostream& log);

struct HoldoutOptions {
    /// Optional; by default each method directory's own spec.json is used.
    std::filesystem::path spec;
    /// Directory written by cmd_calibrate.
    std::filesystem::path out;
    /// Restrict to one method.
    std::optional<std::string> method;
    std::optional<int> repeats;
    bool force = false;
};

/// For each calibrated method, picks every seed's best iteration from
/// history.csv, evaluates H1..H4 x repeats and writes out/<method>/holdout.csv.
int cmd_holdout(const HoldoutOptions& options, std::ostream& log);

struct ReportOptions {
    /// Experiment directories, one per setting.
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path out;
    double catastrophic = 100.0;
    bool force = false;
};

/// ranks.csv, recovery.csv, confidence.csv and a summary table on `log`.
int cmd_report(const ReportOptions& options, std::ostream& log);

/// Shared entry point for the executable; parses argv with CLI11.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sysid
