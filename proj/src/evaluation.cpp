#include "sysid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"

namespace sysid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.10g}", v);
}

}  // namespace

// ------------------------------------------------------------------ holdout

bool HoldoutReport::complete() const {
    return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.missing; });
}

double HoldoutReport::mean() const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (e.missing) continue;
        total += e.error;
        ++n;
    }
    return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::pair<std::string, double>> HoldoutReport::per_holdout() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : entries) {
        if (std::none_of(out.begin(), out.end(), [&](const auto& p) { return p.first == e.holdout; })) {
            out.emplace_back(e.holdout, 0.0);
        }
    }
    for (auto& [name, value] : out) {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& e : entries) {
            if (e.holdout == name && !e.missing) {
                total += e.error;
                ++n;
            }
        }
        value = n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

HoldoutReport evaluate_holdout(const ParameterVector& params, const std::array<ControlProfile, 4>& holdouts,
                               const Simulator& sim, const ObservationSource& source, int repeats,
                               const CompareOptions& options) {
    if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
    HoldoutReport report;
    for (std::size_t h = 0; h < holdouts.size(); ++h) {
        const auto name = fmt::format("H{}", h + 1);
        std::vector<Trajectory> observed;
        try {
            observed = source.observe(holdouts[h], repeats);
        } catch (const ConfigError& e) {
            spdlog::warn("holdout {}: {}", name, e.what());
        }
        std::optional<Trajectory> simulated;
        if (!observed.empty()) {
            try {
                simulated = sim.simulate(params, holdouts[h]);
            } catch (const DivergedSimulation& e) {
                spdlog::warn("holdout {}: simulation diverged: {}", name, e.what());
            }
        }
        for (int r = 1; r <= repeats; ++r) {
            HoldoutEntry entry{name, r, std::numeric_limits<double>::quiet_NaN(), true};
            if (static_cast<int>(observed.size()) >= r) {
                entry.missing = false;
                entry.error = kInf;
                if (simulated) {
                    try {
                        entry.error = compare(*simulated, observed[static_cast<std::size_t>(r - 1)], options).mae;
                    } catch (const InsufficientOverlap& e) {
                        spdlog::warn("holdout {} repeat {}: {}", name, r, e.what());
                    }
                }
            }
            report.entries.push_back(entry);
        }
    }
    return report;
}

// -------------------------------------------------------------- aggregation

SeedAggregate aggregate_seeds(std::span<const double> xs) {
    if (xs.empty()) throw InvalidArgument("aggregate_seeds needs at least one seed");
    SeedAggregate a;
    a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(xs.size()));
    a.best = *std::min_element(xs.begin(), xs.end());
    return a;
}

std::vector<double> rank_with_ties(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> RankResult::average_of(std::string_view method) const {
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (methods[i] == method) return average[i];
    }
    return std::nullopt;
}

RankResult average_rank(const std::vector<SettingMeans>& table) {
    RankResult out;
    // Candidate methods in first-seen order.
    std::vector<std::string> all;
    for (const auto& s : table) {
        for (const auto& [m, v] : s.means) {
            if (std::find(all.begin(), all.end(), m) == all.end()) all.push_back(m);
        }
    }
    for (const auto& m : all) {
        const bool everywhere = std::all_of(table.begin(), table.end(), [&](const SettingMeans& s) {
            return std::any_of(s.means.begin(), s.means.end(),
                               [&](const auto& p) { return p.first == m && !std::isnan(p.second); });
        });
        if (everywhere) {
            out.methods.push_back(m);
        } else {
            spdlog::warn("average_rank: '{}' lacks a mean in some setting and is excluded", m);
            out.excluded.push_back(m);
        }
    }
    out.average.assign(out.methods.size(), 0.0);
    for (const auto& s : table) {
        std::vector<double> values;
        for (const auto& m : out.methods) {
            const auto it = std::find_if(s.means.begin(), s.means.end(), [&](const auto& p) { return p.first == m; });
            values.push_back(it->second);
        }
        out.settings.push_back(s.setting);
        out.ranks.push_back(rank_with_ties(values));
        for (std::size_t i = 0; i < values.size(); ++i) out.average[i] += out.ranks.back()[i];
    }
    if (!table.empty()) {
        for (auto& a : out.average) a /= static_cast<double>(table.size());
    }
    return out;
}

std::string format_rank(double rank) { return fmt::format("{:.1f}", rank); }

// --------------------------------------------------------------- confidence

Precision confidence_precision(std::span<const ConfidenceRecord> records, double tau, double catastrophic) {
    Precision p;
    std::size_t hits = 0;
    for (const auto& r : records) {
        if (!(r.error_before <= catastrophic)) continue;
        if (r.confidence < tau) continue;
        ++p.n;
        if (r.success()) ++hits;
    }
    if (p.n > 0) p.value = static_cast<double>(hits) / static_cast<double>(p.n);
    return p;
}

std::vector<ConfidenceRecord> confidence_records(const RunHistory& history) {
    std::vector<ConfidenceRecord> out;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (!history[i].confidence) continue;
        out.push_back({*history[i].confidence, history[i - 1].error, history[i].error});
    }
    return out;
}

// ----------------------------------------------------------------- recovery

RecoveryReport recovery_report(const RunHistory& history, const ParameterVector& gt, const ParameterBounds& bounds) {
    RecoveryReport out;
    double best = kInf;
    std::optional<ParameterVector> best_params;
    for (const auto& r : history) {
        if (!best_params || r.error < best) {
            best = r.error;
            best_params = r.params;
        }
        out.distance.push_back(normalized_distance(*best_params, gt, bounds));
    }
    if (best_params) out.relative = relative_error(*best_params, gt);
    return out;
}

RecoverySummary summarize_recovery(std::span<const RecoveryReport> reports, std::span<const double> best_errors) {
    if (reports.empty() || reports.size() != best_errors.size()) {
        throw InvalidArgument("recovery summary needs one best error per report");
    }
    RecoverySummary s;
    s.best_seed = static_cast<std::size_t>(std::min_element(best_errors.begin(), best_errors.end()) - best_errors.begin());
    const auto& b = reports[s.best_seed].relative;
    s.names = b.names;
    s.best_seed_percent = b.percent;
    s.best_seed_mean = b.mean_percent;
    s.cross_seed_percent.assign(s.names.size(), std::nullopt);
    for (std::size_t i = 0; i < s.names.size(); ++i) {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& r : reports) {
            if (i < r.relative.percent.size() && r.relative.percent[i]) {
                total += *r.relative.percent[i];
                ++n;
            }
        }
        if (n) s.cross_seed_percent[i] = total / static_cast<double>(n);
    }
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports) {
        if (!std::isnan(r.relative.mean_percent)) {
            total += r.relative.mean_percent;
            ++n;
        }
    }
    s.cross_seed_mean = n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    return s;
}

// -------------------------------------------------------------------- files

std::string holdout_csv(std::span<const HoldoutReport> reports) {
    std::string out = "seed,holdout,repeat,error\n";
    for (const auto& r : reports) {
        for (const auto& e : r.entries) out += fmt::format("{},{},{},{}\n", r.seed, e.holdout, e.repeat, num(e.error));
    }
    return out;
}

std::vector<HoldoutReport> read_holdout_csv(const std::filesystem::path& path, const std::string& method) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    if (line != "seed,holdout,repeat,error") throw ConfigError(fmt::format("{}: unexpected header '{}'", path.string(), line));
    std::vector<HoldoutReport> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string seed, holdout, repeat, error;
        std::getline(row, seed, ',');
        std::getline(row, holdout, ',');
        std::getline(row, repeat, ',');
        std::getline(row, error);
        const auto s = std::stoull(seed);
        if (out.empty() || out.back().seed != s) {
            out.emplace_back();
            out.back().method = method;
            out.back().seed = s;
        }
        HoldoutEntry e;
        e.holdout = holdout;
        e.repeat = std::stoi(repeat);
        e.missing = error.empty();
        e.error = error.empty() ? std::numeric_limits<double>::quiet_NaN()
                  : error == "inf" ? kInf
                                   : std::stod(error);
        out.back().entries.push_back(e);
    }
    return out;
}

std::string ranks_csv(const RankResult& ranks, const std::vector<SettingMeans>& table) {
    std::string out = "method,setting,mean,rank\n";
    for (std::size_t s = 0; s < ranks.settings.size(); ++s) {
        for (std::size_t m = 0; m < ranks.methods.size(); ++m) {
            const auto& means = table[s].means;
            const auto it = std::find_if(means.begin(), means.end(), [&](const auto& p) { return p.first == ranks.methods[m]; });
            out += fmt::format("{},{},{},{}\n", ranks.methods[m], ranks.settings[s], num(it->second), num(ranks.ranks[s][m]));
        }
    }
    for (std::size_t m = 0; m < ranks.methods.size(); ++m) {
        out += fmt::format("{},average,,{}\n", ranks.methods[m], num(ranks.average[m]));
    }
    return out;
}

std::string confidence_csv(const std::string& method, std::span<const ConfidenceRecord> records,
                           std::span<const double> taus, double catastrophic) {
    std::string out = "method,tau,precision,n\n";
    for (double tau : taus) {
        const auto p = confidence_precision(records, tau, catastrophic);
        out += fmt::format("{},{},{},{}\n", method, num(tau), p.value ? num(*p.value) : std::string(), p.n);
    }
    return out;
}

}  // namespace sysid
