#pragma once

// Verification records, reports and their JSON / CSV emission.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qim/errors.hpp"
#include "qim/harness/config.hpp"

namespace qim::harness {

struct Record {
  std::string suite;
  std::string name;    // suite/seed/instance/detail, unique within a report
  std::string anchor;  // the property being checked
  bool pass = false;
  double margin = 0.0;  // >= -tolerance when the check passes
  double tolerance = 0.0;
  double runtime = 0.0;  // seconds; excluded from determinism comparisons
  std::string error;     // module error routed into this record, if any
  bool gating = true;    // informational records never fail a run
};

inline bool passes(double margin, double tolerance) {
  return std::isfinite(margin) && margin >= -tolerance;
}

struct Environment {
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::string version = kVersion;
  std::string timestamp;  // excluded from determinism comparisons
  unsigned threads = 1;
};

struct Report {
  std::vector<Record> records;
  Environment environment;
  bool empty_ensemble_warning = false;

  bool all_pass() const { return failures() == 0; }
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& r : records) n += (r.gating && !r.pass) ? 1 : 0;
    return n;
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Record& r, bool with_runtime = true) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["name"] = r.name;
  j["anchor"] = r.anchor;
  j["pass"] = r.pass;
  j["margin"] = detail::finite_or_null(r.margin);
  j["tolerance"] = r.tolerance;
  if (with_runtime) j["runtime"] = r.runtime;
  j["error"] = r.error;
  j["gating"] = r.gating;
  return j;
}

inline nlohmann::ordered_json to_json(const Report& rep) {
  nlohmann::ordered_json j;
  j["environment"] = {{"seeds", rep.environment.seeds},
                      {"config_hash", rep.environment.config_hash},
                      {"version", rep.environment.version},
                      {"timestamp", rep.environment.timestamp},
                      {"threads", rep.environment.threads}};
  j["summary"] = {{"records", rep.records.size()},
                  {"failures", rep.failures()},
                  {"all_pass", rep.all_pass()},
                  {"empty_ensemble_warning", rep.empty_ensemble_warning}};
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : rep.records) recs.push_back(to_json(r));
  j["records"] = std::move(recs);
  return j;
}

/// Records with the timing field dropped, for determinism comparisons.
inline nlohmann::ordered_json comparable_records(const Report& rep) {
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : rep.records) recs.push_back(to_json(r, false));
  return recs;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline void write_csv(std::ostream& os, const Report& rep) {
  os << "suite,name,anchor,pass,gating,margin,tolerance,runtime,error,config_hash\n";
  os.precision(17);
  for (const auto& r : rep.records) {
    os << detail::csv_escape(r.suite) << ',' << detail::csv_escape(r.name) << ','
       << detail::csv_escape(r.anchor) << ',' << (r.pass ? "true" : "false") << ','
       << (r.gating ? "true" : "false") << ',';
    if (std::isfinite(r.margin)) os << r.margin;
    os << ',' << r.tolerance << ',' << r.runtime << ',' << detail::csv_escape(r.error) << ','
       << rep.environment.config_hash << '\n';
  }
}

/// Write text to dir/file, creating dir. I/O failures name the path.
inline std::filesystem::path write_output(const std::string& dir, const std::string& file,
                                          const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path p = fs::path(dir) / file;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write failed for '" + p.string() + "'");
  return p;
}

/// report.json or report.csv in dir.
inline std::filesystem::path emit_report(const Report& rep, const std::string& format,
                                         const std::string& dir) {
  if (format == "json") return write_output(dir, "report.json", to_json(rep).dump(2) + "\n");
  if (format == "csv") {
    std::ostringstream os;
    write_csv(os, rep);
    return write_output(dir, "report.csv", os.str());
  }
  throw ConfigError("unknown report format '" + format + "' (expected json or csv)");
}

}  // namespace qim::harness
