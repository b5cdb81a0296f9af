#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace mindtrace {

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

/// Calendar date with day precision.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Parses `YYYY-MM-DD` (an ISO-8601 time suffix after 'T' is ignored) or
  /// `YYYY-MM`, which is completed to the 1st of the month and reported
  /// through `month_only`.
  static std::optional<Date> parse(std::string_view text, bool* month_only = nullptr);

  /// Days since 1970-01-01 (proleptic Gregorian).
  std::int64_t days_since_epoch() const;
  static Date from_days(std::int64_t days);

  /// Fractional years since the epoch using 365.25-day years.
  double years() const { return static_cast<double>(days_since_epoch()) / 365.25; }

  std::string iso() const;

  auto operator<=>(const Date&) const = default;
};

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class TerrorismLabel { C, E, T };
enum class BrexitLabel { A, N, S, H, O };
enum class PersonCategory { Centrist, Extremist, Terrorist };
enum class Axis { Terrorism, Brexit };

using AxisLabel = std::variant<TerrorismLabel, BrexitLabel>;

char to_char(TerrorismLabel l);
char to_char(BrexitLabel l);
std::optional<TerrorismLabel> parse_terrorism_label(std::string_view s);
std::optional<BrexitLabel> parse_brexit_label(std::string_view s);
std::optional<PersonCategory> parse_person_category(std::string_view s);
std::string_view to_string(PersonCategory c);

/// Combines three rater labels from one axis: the majority label when one
/// exists, otherwise the most severe of the three (T > E > C; H > S > A > N > O).
AxisLabel combine_rater_labels(std::span<const AxisLabel> labels);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct Person {
  std::string id;
  std::string display_name;
  std::string group;
  std::optional<PersonCategory> category;
};

struct Quote {
  std::string id;
  std::string person_id;
  Date timestamp;
  std::string text;
  std::string language;
  std::optional<TerrorismLabel> terrorism_label;
  std::optional<BrexitLabel> brexit_label;
  std::optional<Eigen::VectorXd> embedding;
};

enum class Vote { For, Against, Absent };

struct VoteRecord {
  std::string person_id;
  std::vector<std::pair<Date, Vote>> votes;
};

struct CorpusStats {
  std::size_t quote_count = 0;
  std::size_t person_count = 0;
  std::size_t terrorism_counts[3] = {0, 0, 0};  // C, E, T
  std::size_t terrorism_unlabelled = 0;
  std::size_t brexit_counts[5] = {0, 0, 0, 0, 0};  // A, N, S, H, O
  std::size_t brexit_unlabelled = 0;
  std::vector<std::pair<std::string, std::size_t>> persons_per_group;
};

/// Immutable collection of persons and quotes, indexed by id.
class Corpus {
 public:
  Corpus() = default;
  /// Throws ValidationError on duplicate person or quote ids.
  Corpus(std::vector<Person> persons, std::vector<Quote> quotes);

  const std::vector<Person>& persons() const { return persons_; }
  const std::vector<Quote>& quotes() const { return quotes_; }

  const Person* find_person(std::string_view id) const;
  const Quote* find_quote(std::string_view id) const;

  /// Quotes of one person ordered by timestamp (stable w.r.t. file order).
  std::vector<const Quote*> quotes_of(std::string_view person_id) const;

  CorpusStats stats() const;

 private:
  std::vector<Person> persons_;
  std::vector<Quote> quotes_;
  std::unordered_map<std::string, std::size_t> person_index_;
  std::unordered_map<std::string, std::size_t> quote_index_;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

struct IngestConfig {
  std::size_t max_words = 100;
};

struct Rejection {
  std::size_t line = 0;
  std::string id;
  std::string reason;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::vector<Rejection> rejections;
  /// Lines whose month-only dates were completed to the 1st.
  std::vector<std::size_t> month_only_lines;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

/// Reads quotes from JSON Lines. Malformed or filtered records are listed in
/// the report. Throws InputError if the file cannot be read and
/// ValidationError on duplicate quote ids or, when `registered` is non-empty,
/// on quotes that reference unknown persons.
IngestResult ingest_quotes(const std::filesystem::path& path, const IngestConfig& config,
                           std::span<const Person> registered = {});
IngestResult ingest_quotes(std::istream& in, const IngestConfig& config,
                           std::span<const Person> registered = {});

std::vector<Person> load_persons(const std::filesystem::path& path);
std::vector<Person> load_persons(std::istream& in);

/// Reads `person_id,date,vote` CSV; one record per person in first-seen order.
/// Dates must be non-decreasing within a person.
std::vector<VoteRecord> load_votes(const std::filesystem::path& path);
std::vector<VoteRecord> load_votes(std::istream& in);

std::size_t word_count(std::string_view text);

// ---------------------------------------------------------------------------
// Person filtering and scores
// ---------------------------------------------------------------------------

struct PersonFilter {
  std::size_t min_quotes = 3;
  bool require_votes = true;
};

struct FilterOutcome {
  std::vector<std::string> kept;
  std::vector<std::pair<std::string, std::string>> removed;  // id, reason
};

FilterOutcome filter_persons(const Corpus& corpus, std::span<const VoteRecord> votes,
                             const PersonFilter& filter);

/// (for - against) / (all listed votes, absences included).
double vote_score(const VoteRecord& record);

/// Share of S/H labels among A/N/S/H labels; O labels are ignored.
double attitude_score(std::span<const BrexitLabel> labels);

/// Pearson product-moment correlation.
double correlate(std::span<const double> xs, std::span<const double> ys);

// ---------------------------------------------------------------------------
// Scatter export
// ---------------------------------------------------------------------------

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string group;
};

struct ScatterRow {
  double x = 0.0;
  double y = 0.0;
  double x_jittered = 0.0;
  double y_jittered = 0.0;
  std::string group;
};

std::vector<ScatterRow> export_scatter(std::span<const ScatterPoint> points, double jitter,
                                       std::uint64_t seed);
void write_scatter_csv(std::ostream& out, std::span<const ScatterRow> rows);

}  // namespace mindtrace
