#include "mindtrace/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mindtrace/error.hpp"

namespace mindtrace {

using json = nlohmann::json;

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return in;
}

int terrorism_severity(TerrorismLabel l) {
  switch (l) {
    case TerrorismLabel::C: return 0;
    case TerrorismLabel::E: return 1;
    case TerrorismLabel::T: return 2;
  }
  return 0;
}

int brexit_severity(BrexitLabel l) {
  switch (l) {
    case BrexitLabel::O: return 0;
    case BrexitLabel::N: return 1;
    case BrexitLabel::A: return 2;
    case BrexitLabel::S: return 3;
    case BrexitLabel::H: return 4;
  }
  return 0;
}

template <typename Label, typename Severity>
Label combine_axis(std::span<const AxisLabel> labels, Severity severity) {
  std::array<Label, 3> v{};
  for (std::size_t i = 0; i < 3; ++i) v[i] = std::get<Label>(labels[i]);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto n = std::count(v.begin(), v.end(), v[i]);
    if (n >= 2) return v[i];
  }
  return *std::max_element(v.begin(), v.end(), [&](Label a, Label b) {
    return severity(a) < severity(b);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Date

std::optional<Date> Date::parse(std::string_view text, bool* month_only) {
  if (month_only) *month_only = false;
  const auto t = text.find('T');
  if (t != std::string_view::npos) text = text.substr(0, t);
  Date d;
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    if (!parse_int(text.substr(0, 4), d.year) || !parse_int(text.substr(5, 2), d.month) ||
        !parse_int(text.substr(8, 2), d.day)) {
      return std::nullopt;
    }
  } else if (text.size() == 7 && text[4] == '-') {
    if (!parse_int(text.substr(0, 4), d.year) || !parse_int(text.substr(5, 2), d.month)) {
      return std::nullopt;
    }
    d.day = 1;
    if (month_only) *month_only = true;
  } else {
    return std::nullopt;
  }
  if (d.month < 1 || d.month > 12) return std::nullopt;
  if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
  return d;
}

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t Date::days_since_epoch() const {
  const std::int64_t y = year - (month <= 2 ? 1 : 0);
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const std::int64_t yoe = y - era * 400;
  const std::int64_t mp = (month + 9) % 12;
  const std::int64_t doy = (153 * mp + 2) / 5 + day - 1;
  const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

Date Date::from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const std::int64_t doe = z - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  Date d;
  d.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  d.month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  d.year = static_cast<int>(yoe + era * 400 + (d.month <= 2 ? 1 : 0));
  return d;
}

std::string Date::iso() const {
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << year << '-' << std::setw(2) << month << '-'
     << std::setw(2) << day;
  return os.str();
}

// ---------------------------------------------------------------------------
// Labels

char to_char(TerrorismLabel l) { return "CET"[static_cast<int>(l)]; }
char to_char(BrexitLabel l) { return "ANSHO"[static_cast<int>(l)]; }

std::optional<TerrorismLabel> parse_terrorism_label(std::string_view s) {
  if (s == "C" || s == "c") return TerrorismLabel::C;
  if (s == "E" || s == "e") return TerrorismLabel::E;
  if (s == "T" || s == "t") return TerrorismLabel::T;
  return std::nullopt;
}

std::optional<BrexitLabel> parse_brexit_label(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  switch (std::toupper(static_cast<unsigned char>(s[0]))) {
    case 'A': return BrexitLabel::A;
    case 'N': return BrexitLabel::N;
    case 'S': return BrexitLabel::S;
    case 'H': return BrexitLabel::H;
    case 'O': return BrexitLabel::O;
    default: return std::nullopt;
  }
}

std::optional<PersonCategory> parse_person_category(std::string_view s) {
  const std::string l = lower(s);
  if (l == "centrist" || l == "c") return PersonCategory::Centrist;
  if (l == "extremist" || l == "e") return PersonCategory::Extremist;
  if (l == "terrorist" || l == "t") return PersonCategory::Terrorist;
  return std::nullopt;
}

std::string_view to_string(PersonCategory c) {
  switch (c) {
    case PersonCategory::Centrist: return "centrist";
    case PersonCategory::Extremist: return "extremist";
    case PersonCategory::Terrorist: return "terrorist";
  }
  return "";
}

AxisLabel combine_rater_labels(std::span<const AxisLabel> labels) {
  if (labels.size() != 3) throw ValidationError("expected exactly three rater labels");
  const auto axis = labels[0].index();
  for (const auto& l : labels) {
    if (l.index() != axis) throw ValidationError("rater labels come from mixed axes");
  }
  if (axis == 0) return combine_axis<TerrorismLabel>(labels, terrorism_severity);
  return combine_axis<BrexitLabel>(labels, brexit_severity);
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<Person> persons, std::vector<Quote> quotes)
    : persons_(std::move(persons)), quotes_(std::move(quotes)) {
  for (std::size_t i = 0; i < persons_.size(); ++i) {
    if (!person_index_.emplace(persons_[i].id, i).second) {
      throw ValidationError("duplicate person id: " + persons_[i].id);
    }
  }
  for (std::size_t i = 0; i < quotes_.size(); ++i) {
    if (!quote_index_.emplace(quotes_[i].id, i).second) {
      throw ValidationError("duplicate quote id: " + quotes_[i].id);
    }
  }
}

const Person* Corpus::find_person(std::string_view id) const {
  const auto it = person_index_.find(std::string(id));
  return it == person_index_.end() ? nullptr : &persons_[it->second];
}

const Quote* Corpus::find_quote(std::string_view id) const {
  const auto it = quote_index_.find(std::string(id));
  return it == quote_index_.end() ? nullptr : &quotes_[it->second];
}

std::vector<const Quote*> Corpus::quotes_of(std::string_view person_id) const {
  std::vector<const Quote*> out;
  for (const auto& q : quotes_) {
    if (q.person_id == person_id) out.push_back(&q);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Quote* a, const Quote* b) { return a->timestamp < b->timestamp; });
  return out;
}

CorpusStats Corpus::stats() const {
  CorpusStats s;
  s.quote_count = quotes_.size();
  s.person_count = persons_.size();
  for (const auto& q : quotes_) {
    if (q.terrorism_label) {
      ++s.terrorism_counts[static_cast<int>(*q.terrorism_label)];
    } else {
      ++s.terrorism_unlabelled;
    }
    if (q.brexit_label) {
      ++s.brexit_counts[static_cast<int>(*q.brexit_label)];
    } else {
      ++s.brexit_unlabelled;
    }
  }
  std::map<std::string, std::size_t> groups;
  for (const auto& p : persons_) ++groups[p.group];
  s.persons_per_group.assign(groups.begin(), groups.end());
  return s;
}

// ---------------------------------------------------------------------------
// Ingestion

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

std::optional<std::string> string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

IngestResult ingest_quotes(std::istream& in, const IngestConfig& config,
                           std::span<const Person> registered) {
  IngestReport report;
  std::vector<Quote> quotes;
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> known_persons;
  for (const auto& p : registered) known_persons.insert(p.id);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++report.lines_read;

    auto reject = [&](std::string id, std::string reason) {
      report.rejections.push_back({line_no, std::move(id), std::move(reason)});
    };

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      reject("", "malformed JSON");
      continue;
    }
    if (!j.is_object()) {
      reject("", "record is not an object");
      continue;
    }

    const auto id = string_field(j, "id");
    const auto person_id = string_field(j, "person_id");
    const auto timestamp = string_field(j, "timestamp");
    const auto text = string_field(j, "text");
    if (!id || id->empty()) {
      reject("", "missing id");
      continue;
    }
    if (!person_id || person_id->empty()) {
      reject(*id, "missing person_id");
      continue;
    }
    if (!timestamp) {
      reject(*id, "missing timestamp");
      continue;
    }
    if (!text || trim(*text).empty()) {
      reject(*id, "empty text");
      continue;
    }

    if (!seen_ids.insert(*id).second) {
      throw ValidationError("duplicate quote id '" + *id + "' at line " +
                            std::to_string(line_no));
    }
    if (!known_persons.empty() && !known_persons.contains(*person_id)) {
      throw ValidationError("quote '" + *id + "' at line " + std::to_string(line_no) +
                            " references unknown person '" + *person_id + "'");
    }

    bool month_only = false;
    const auto date = Date::parse(*timestamp, &month_only);
    if (!date) {
      reject(*id, "malformed date '" + *timestamp + "'");
      continue;
    }
    const std::size_t words = word_count(*text);
    if (words > config.max_words) {
      reject(*id, "text has " + std::to_string(words) + " words (limit " +
                      std::to_string(config.max_words) + ")");
      continue;
    }

    Quote q;
    q.id = *id;
    q.person_id = *person_id;
    q.timestamp = *date;
    q.text = *text;
    q.language = string_field(j, "language").value_or("");

    if (const auto t = string_field(j, "terrorism_label"); t && !t->empty()) {
      q.terrorism_label = parse_terrorism_label(*t);
      if (!q.terrorism_label) {
        reject(*id, "invalid terrorism_label '" + *t + "'");
        continue;
      }
    }
    if (const auto b = string_field(j, "brexit_label"); b && !b->empty()) {
      q.brexit_label = parse_brexit_label(*b);
      if (!q.brexit_label) {
        reject(*id, "invalid brexit_label '" + *b + "'");
        continue;
      }
    }
    if (const auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
      if (!it->is_array() || it->empty() ||
          !std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); })) {
        reject(*id, "embedding is not a numeric array");
        continue;
      }
      Eigen::VectorXd v(static_cast<Eigen::Index>(it->size()));
      for (std::size_t k = 0; k < it->size(); ++k) {
        v(static_cast<Eigen::Index>(k)) = (*it)[k].get<double>();
      }
      q.embedding = std::move(v);
    }

    if (month_only) report.month_only_lines.push_back(line_no);
    quotes.push_back(std::move(q));
  }

  std::vector<Person> persons(registered.begin(), registered.end());
  if (persons.empty()) {
    std::unordered_set<std::string> added;
    for (const auto& q : quotes) {
      if (added.insert(q.person_id).second) persons.push_back(Person{q.person_id, q.person_id, "", {}});
    }
  }
  return {Corpus(std::move(persons), std::move(quotes)), std::move(report)};
}

IngestResult ingest_quotes(const std::filesystem::path& path, const IngestConfig& config,
                           std::span<const Person> registered) {
  auto in = open_or_throw(path);
  return ingest_quotes(in, config, registered);
}

std::vector<Person> load_persons(std::istream& in) {
  std::vector<Person> persons;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw ValidationError("persons: malformed JSON at line " + std::to_string(line_no));
    }
    Person p;
    const auto id = string_field(j, "id");
    if (!id || id->empty()) {
      throw ValidationError("persons: missing id at line " + std::to_string(line_no));
    }
    p.id = *id;
    p.display_name = string_field(j, "name").value_or(p.id);
    p.group = string_field(j, "group").value_or("");
    if (const auto c = string_field(j, "category"); c && !c->empty()) {
      p.category = parse_person_category(*c);
      if (!p.category) {
        throw ValidationError("persons: invalid category '" + *c + "' at line " +
                              std::to_string(line_no));
      }
    }
    persons.push_back(std::move(p));
  }
  std::unordered_set<std::string> ids;
  for (const auto& p : persons) {
    if (!ids.insert(p.id).second) throw ValidationError("duplicate person id: " + p.id);
  }
  return persons;
}

std::vector<Person> load_persons(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_persons(in);
}

std::vector<VoteRecord> load_votes(std::istream& in) {
  std::vector<VoteRecord> records;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (lower(t) != "person_id,date,vote") {
        throw ValidationError("votes: expected header 'person_id,date,vote'");
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != 3) {
      throw ValidationError("votes: expected 3 columns at line " + std::to_string(line_no));
    }
    const auto date = Date::parse(cells[1]);
    if (!date) throw ValidationError("votes: malformed date at line " + std::to_string(line_no));
    const std::string v = lower(cells[2]);
    Vote vote;
    if (v == "for") {
      vote = Vote::For;
    } else if (v == "against") {
      vote = Vote::Against;
    } else if (v == "absent") {
      vote = Vote::Absent;
    } else {
      throw ValidationError("votes: unknown vote '" + cells[2] + "' at line " +
                            std::to_string(line_no));
    }
    auto [it, inserted] = index.emplace(cells[0], records.size());
    if (inserted) records.push_back(VoteRecord{cells[0], {}});
    auto& rec = records[it->second];
    if (!rec.votes.empty() && *date < rec.votes.back().first) {
      throw ValidationError("votes: dates for '" + cells[0] + "' decrease at line " +
                            std::to_string(line_no));
    }
    rec.votes.emplace_back(*date, vote);
  }
  return records;
}

std::vector<VoteRecord> load_votes(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_votes(in);
}

// ---------------------------------------------------------------------------
// Filtering and scores

FilterOutcome filter_persons(const Corpus& corpus, std::span<const VoteRecord> votes,
                             const PersonFilter& filter) {
  std::unordered_map<std::string, const VoteRecord*> by_person;
  for (const auto& v : votes) by_person.emplace(v.person_id, &v);
  std::unordered_map<std::string, std::size_t> quote_counts;
  for (const auto& q : corpus.quotes()) ++quote_counts[q.person_id];

  FilterOutcome out;
  for (const auto& p : corpus.persons()) {
    const std::size_t n = quote_counts[p.id];
    if (n < filter.min_quotes) {
      out.removed.emplace_back(p.id, "fewer than " + std::to_string(filter.min_quotes) +
                                         " quotes");
      continue;
    }
    if (filter.require_votes) {
      const auto it = by_person.find(p.id);
      if (it == by_person.end() || it->second->votes.empty()) {
        out.removed.emplace_back(p.id, "empty voting record");
        continue;
      }
    }
    out.kept.push_back(p.id);
  }
  return out;
}

double vote_score(const VoteRecord& record) {
  if (record.votes.empty()) throw ValidationError("empty voting record");
  std::size_t n_for = 0;
  std::size_t n_against = 0;
  for (const auto& [date, v] : record.votes) {
    if (v == Vote::For) ++n_for;
    if (v == Vote::Against) ++n_against;
  }
  if (n_for + n_against == 0) {
    throw ValidationError("voting record of '" + record.person_id + "' has only absences");
  }
  return (static_cast<double>(n_for) - static_cast<double>(n_against)) /
         static_cast<double>(record.votes.size());
}

double attitude_score(std::span<const BrexitLabel> labels) {
  std::size_t pro = 0;
  std::size_t related = 0;
  for (const auto l : labels) {
    if (l == BrexitLabel::O) continue;
    ++related;
    if (l == BrexitLabel::S || l == BrexitLabel::H) ++pro;
  }
  if (related == 0) throw ValidationError("no Brexit-related quotes");
  return static_cast<double>(pro) / static_cast<double>(related);
}

double correlate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("correlate: length mismatch");
  if (xs.size() < 3) throw ValidationError("correlate: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("correlate: constant input");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Scatter export

std::vector<ScatterRow> export_scatter(std::span<const ScatterPoint> points, double jitter,
                                       std::uint64_t seed) {
  if (jitter < 0.0) throw ValidationError("jitter must be non-negative");
  std::mt19937_64 rng(seed);
  // Top 53 bits -> [0, 1); independent of the standard library's distributions.
  auto uniform = [&rng, jitter] {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return jitter * (2.0 * u - 1.0);
  };
  std::vector<ScatterRow> rows;
  rows.reserve(points.size());
  for (const auto& p : points) {
    ScatterRow r{p.x, p.y, p.x, p.y, p.group};
    if (jitter > 0.0) {
      r.x_jittered = p.x + uniform();
      r.y_jittered = p.y + uniform();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_scatter_csv(std::ostream& out, std::span<const ScatterRow> rows) {
  out << "x,y,x_jittered,y_jittered,group\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.x << ',' << r.y << ',' << r.x_jittered << ',' << r.y_jittered << ',' << r.group
        << '\n';
  }
}

}  // namespace mindtrace
