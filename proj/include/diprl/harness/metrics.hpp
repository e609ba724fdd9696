#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diprl/errors.hpp"

namespace diprl::harness {

/// One finished training episode.
struct MetricsRow {
  std::int64_t env_step = 0;
  std::int64_t episode_index = 0;
  int episode_logs = 0;
  int episode_length = 0;
  std::string algo;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRow&) const = default;
};

struct CurvePoint {
  std::int64_t env_step = 0;
  int logs = 0;
};

struct RunSummary {
  int max_logs = 0;
  double mean_logs_per_episode = 0.0;
  std::int64_t n_episodes = 0;
  std::vector<CurvePoint> curve;  // logs against environment steps, one point per row
};

inline RunSummary compute_summary(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw SummaryError("cannot summarize an empty metrics stream");
  RunSummary s;
  double sum = 0.0;
  s.max_logs = rows.front().episode_logs;
  for (const auto& r : rows) {
    s.max_logs = std::max(s.max_logs, r.episode_logs);
    sum += r.episode_logs;
    s.curve.push_back({r.env_step, r.episode_logs});
  }
  s.n_episodes = static_cast<std::int64_t>(rows.size());
  s.mean_logs_per_episode = sum / static_cast<double>(rows.size());
  return s;
}

/// Summary over plain per-episode log counts (evaluation rollouts).
inline RunSummary summarize_logs(const std::vector<int>& logs) {
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < logs.size(); ++i)
    rows.push_back({0, static_cast<std::int64_t>(i), logs[i], 0, "", 0});
  return compute_summary(rows);
}

inline constexpr const char* kMetricsHeader = "env_step,episode_index,episode_logs,episode_length,algo,seed";

enum class MetricsFormat { csv, json };

inline MetricsFormat metrics_format_from_string(const std::string& s) {
  if (s == "csv") return MetricsFormat::csv;
  if (s == "json") return MetricsFormat::json;
  throw ConfigError("metrics format must be 'csv' or 'json', got '" + s + "'");
}

/// Header row, then one row per episode. Each note becomes a trailing
/// "# ..." line.
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                              const std::vector<std::string>& notes = {}) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << r.env_step << ',' << r.episode_index << ',' << r.episode_logs << ',' << r.episode_length << ',' << r.algo
        << ',' << r.seed << '\n';
  for (const auto& n : notes) out << "# " << n << '\n';
}

inline nlohmann::json metrics_to_json(const std::vector<MetricsRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"env_step", r.env_step},
                   {"episode_index", r.episode_index},
                   {"episode_logs", r.episode_logs},
                   {"episode_length", r.episode_length},
                   {"algo", r.algo},
                   {"seed", r.seed}});
  return arr;
}

inline void export_metrics(const std::vector<MetricsRow>& rows, MetricsFormat format, const std::string& path,
                           const std::vector<std::string>& notes = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write metrics file '" + path + "'");
  if (format == MetricsFormat::csv)
    write_metrics_csv(out, rows, notes);
  else
    out << metrics_to_json(rows).dump(2) << '\n';
  if (!out) throw IoError("failed writing metrics file '" + path + "'");
}

/// Reads what write_metrics_csv produced; '#' lines are skipped.
inline std::vector<MetricsRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing metrics header");
  ++n;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw ParseError(n, "unexpected metrics header '" + line + "'");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError(n, "expected 6 fields, found " + std::to_string(f.size()));
    try {
      std::size_t used = 0;
      auto whole = [&](const std::string& s) {
        if (used != s.size()) throw std::invalid_argument(s);
      };
      MetricsRow r;
      r.env_step = std::stoll(f[0], &used);
      whole(f[0]);
      r.episode_index = std::stoll(f[1], &used);
      whole(f[1]);
      r.episode_logs = std::stoi(f[2], &used);
      whole(f[2]);
      r.episode_length = std::stoi(f[3], &used);
      whole(f[3]);
      r.algo = f[4];
      r.seed = std::stoull(f[5], &used);
      whole(f[5]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError(n, "malformed metrics row '" + line + "'");
    }
  }
  return rows;
}

inline std::vector<MetricsRow> load_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file '" + path + "'");
  return parse_metrics_csv(in);
}

}  // namespace diprl::harness
