#ifndef IDP_IO_HPP
#define IDP_IO_HPP

#include <string>

#include "idp/model.hpp"

namespace idp::io {

struct IngestReport {
  int rows_read = 0;
  int rows_dropped = 0;      // duplicate dates, first occurrence kept
  int gap_days_filled = 0;   // days where a census or positivity field was filled
  std::string positivity_source;  // "precomputed" or "derived-from-counts"
};

struct Dataset {
  model::ObservedSeries series;
  model::CovariatePath cov;
  IngestReport report;
};

// Reads `date,hospital_census,icu_census` plus either `positivity` or both
// `positives_7d,tests_7d`. Rows are sorted by date; an empty census field on
// an isolated day is linearly interpolated, an empty positivity field carries
// the previous day forward, and a missing ICU value (empty field or absent
// day) is an error. Positivity is positives_7d/tests_7d when not precomputed.
Dataset ingest_csv(const std::string& path);
Dataset ingest_csv_text(const std::string& text, const std::string& origin);

std::string render_csv(const model::ObservedSeries& series, const model::CovariatePath& cov);
void emit_csv(const std::string& path, const model::ObservedSeries& series,
              const model::CovariatePath& cov);

// Sectioned key-value report, buffered in memory and written atomically
// (write to a temporary, then rename). On failure the partial buffer can be
// parked in a quarantine subdirectory next to the destination.
class ReportWriter {
 public:
  explicit ReportWriter(std::string path);

  void section(const std::string& name);
  void kv(const std::string& key, const std::string& value);
  void kv(const std::string& key, const char* value);
  void kv(const std::string& key, double value);
  void kv(const std::string& key, long value);
  void kv(const std::string& key, int value);
  void kv(const std::string& key, bool value);
  void row(const std::string& cells);

  void commit();
  std::string quarantine();  // returns the quarantine file path
  const std::string& text() const { return buffer_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buffer_;
  bool any_section_ = false;
};

std::string format_double(double value);

// Atomic write-then-rename for arbitrary file contents.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace idp::io

#endif
