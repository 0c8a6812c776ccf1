#include "idp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "idp/errors.hpp"

namespace idp::io {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::optional<long> parse_long(const std::string& field) {
  const std::string t = trim(field);
  if (t.empty()) return std::nullopt;
  long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(const std::string& field) {
  const std::string t = trim(field);
  if (t.empty()) return std::nullopt;
  double value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

struct RawRow {
  int line = 0;
  Date date;
  std::optional<int> hospital;
  int icu = 0;
  std::optional<double> positivity;
};

[[noreturn]] void bad_row(int line, const std::string& why) {
  raise(Errc::malformed_row, why + " (line " + std::to_string(line) + ")");
}

}  // namespace

Dataset ingest_csv_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    raise(Errc::malformed_row, "empty file: " + origin);

  const std::vector<std::string> header = split_csv(line);
  int date_col = -1, hosp_col = -1, icu_col = -1, pos_col = -1, positives_col = -1,
      tests_col = -1;
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (name == "date") date_col = static_cast<int>(c);
    else if (name == "hospital_census") hosp_col = static_cast<int>(c);
    else if (name == "icu_census") icu_col = static_cast<int>(c);
    else if (name == "positivity") pos_col = static_cast<int>(c);
    else if (name == "positives_7d") positives_col = static_cast<int>(c);
    else if (name == "tests_7d") tests_col = static_cast<int>(c);
    else bad_row(1, "unknown column '" + name + "'");
  }
  if (date_col < 0 || hosp_col < 0 || icu_col < 0)
    bad_row(1, "header must contain date,hospital_census,icu_census");
  const bool precomputed = pos_col >= 0;
  if (!precomputed && (positives_col < 0 || tests_col < 0))
    bad_row(1, "header needs either positivity or both positives_7d,tests_7d");
  if (precomputed && (positives_col >= 0 || tests_col >= 0))
    bad_row(1, "give either positivity or the 7d counts, not both");

  Dataset out;
  out.report.positivity_source = precomputed ? "precomputed" : "derived-from-counts";

  std::vector<RawRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size())
      bad_row(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    ++out.report.rows_read;

    RawRow row;
    row.line = line_no;
    try {
      row.date = Date::parse(trim(fields[date_col]));
    } catch (const Error& e) {
      bad_row(line_no, e.what());
    }

    if (const auto h = parse_long(fields[hosp_col]); h.has_value()) {
      if (*h < 0) bad_row(line_no, "negative hospital_census");
      row.hospital = static_cast<int>(*h);
    } else if (!trim(fields[hosp_col]).empty()) {
      bad_row(line_no, "unparseable hospital_census '" + trim(fields[hosp_col]) + "'");
    }

    const std::string icu_field = trim(fields[icu_col]);
    if (icu_field.empty())
      raise(Errc::icu_gap, "icu_census missing on " + row.date.to_string());
    const auto icu = parse_long(icu_field);
    if (!icu) bad_row(line_no, "unparseable icu_census '" + icu_field + "'");
    if (*icu < 0) bad_row(line_no, "negative icu_census");
    row.icu = static_cast<int>(*icu);

    if (precomputed) {
      const std::string pos_field = trim(fields[pos_col]);
      if (!pos_field.empty()) {
        const auto p = parse_double(pos_field);
        if (!p) bad_row(line_no, "unparseable positivity '" + pos_field + "'");
        row.positivity = *p;
      }
    } else {
      const std::string pos_field = trim(fields[positives_col]);
      const std::string test_field = trim(fields[tests_col]);
      if (pos_field.empty() != test_field.empty())
        bad_row(line_no, "positives_7d and tests_7d must be given together");
      if (!pos_field.empty()) {
        const auto positives = parse_long(pos_field);
        const auto tests = parse_long(test_field);
        if (!positives || *positives < 0) bad_row(line_no, "unparseable positives_7d");
        if (!tests || *tests < 0) bad_row(line_no, "unparseable tests_7d");
        if (*tests == 0)
          raise(Errc::positivity_out_of_range,
                "tests_7d is zero on " + row.date.to_string());
        row.positivity = static_cast<double>(*positives) / static_cast<double>(*tests);
      }
    }
    if (row.positivity && !(*row.positivity >= 0.0 && *row.positivity <= 1.0))
      raise(Errc::positivity_out_of_range,
            "positivity outside [0,1] on " + row.date.to_string());
    rows.push_back(row);
  }
  if (rows.empty()) raise(Errc::malformed_row, "no data rows in " + origin);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
  std::vector<RawRow> unique;
  for (const RawRow& row : rows) {
    if (!unique.empty() && unique.back().date == row.date) {
      ++out.report.rows_dropped;
      continue;
    }
    unique.push_back(row);
  }

  // The day grid must be contiguous; an absent day has no ICU value to fill.
  for (size_t i = 1; i < unique.size(); ++i)
    if (unique[i].date - unique[i - 1].date != 1)
      raise(Errc::icu_gap,
            "icu_census missing on " + (unique[i - 1].date + 1).to_string());

  // Fill isolated census gaps and carry positivity forward.
  for (size_t i = 0; i < unique.size(); ++i) {
    bool filled = false;
    if (!unique[i].hospital) {
      if (i == 0 || i + 1 >= unique.size() || !unique[i - 1].hospital ||
          !unique[i + 1].hospital)
        bad_row(unique[i].line,
                "hospital_census gap longer than one day at " + unique[i].date.to_string());
      unique[i].hospital = static_cast<int>(
          std::lround((*unique[i - 1].hospital + *unique[i + 1].hospital) / 2.0));
      filled = true;
    }
    if (!unique[i].positivity) {
      if (i == 0)
        bad_row(unique[i].line, "positivity missing on the first row");
      unique[i].positivity = *unique[i - 1].positivity;
      filled = true;
    }
    if (filled) ++out.report.gap_days_filled;
  }

  for (const RawRow& row : unique) {
    out.series.dates.push_back(row.date);
    out.series.icu_census.push_back(row.icu);
    out.cov.dates.push_back(row.date);
    out.cov.hospital_census.push_back(*row.hospital);
    out.cov.positivity.push_back(*row.positivity);
  }
  model::validate_covariates(out.cov);
  model::validate_series(out.series, out.cov);
  return out;
}

Dataset ingest_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_csv_text(buf.str(), path);
}

std::string render_csv(const model::ObservedSeries& series, const model::CovariatePath& cov) {
  model::validate_covariates(cov);
  model::validate_series(series, cov);
  std::string out = "date,hospital_census,icu_census,positivity\n";
  char buf[64];
  for (size_t i = 0; i < series.dates.size(); ++i) {
    out += series.dates[i].to_string();
    std::snprintf(buf, sizeof buf, ",%d,%d,%.17g\n", cov.hospital_census[i],
                  series.icu_census[i], cov.positivity[i]);
    out += buf;
  }
  return out;
}

void emit_csv(const std::string& path, const model::ObservedSeries& series,
              const model::CovariatePath& cov) {
  write_file_atomic(path, render_csv(series, cov));
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_error, "cannot write " + tmp.string());
    out << contents;
    if (!out.good()) raise(Errc::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) raise(Errc::io_error, "cannot rename " + tmp.string() + ": " + ec.message());
}

ReportWriter::ReportWriter(std::string path) : path_(std::move(path)) {}

void ReportWriter::section(const std::string& name) {
  if (any_section_) buffer_ += "\n";
  any_section_ = true;
  buffer_ += "[" + name + "]\n";
}

void ReportWriter::kv(const std::string& key, const std::string& value) {
  buffer_ += key + " = " + value + "\n";
}
void ReportWriter::kv(const std::string& key, const char* value) {
  kv(key, std::string(value));
}
void ReportWriter::kv(const std::string& key, double value) { kv(key, format_double(value)); }
void ReportWriter::kv(const std::string& key, long value) { kv(key, std::to_string(value)); }
void ReportWriter::kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
void ReportWriter::kv(const std::string& key, bool value) {
  kv(key, value ? "true" : "false");
}
void ReportWriter::row(const std::string& cells) { buffer_ += "row = " + cells + "\n"; }

void ReportWriter::commit() { write_file_atomic(path_, buffer_); }

std::string ReportWriter::quarantine() {
  const fs::path target(path_);
  const fs::path dir =
      (target.has_parent_path() ? target.parent_path() : fs::path(".")) / "quarantine";
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path parked = dir / (target.filename().string() + ".partial");
  std::ofstream out(parked, std::ios::binary | std::ios::trunc);
  out << buffer_;
  return parked.string();
}

}  // namespace idp::io
