#include "mindtrace/synthetic.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mindtrace/track.hpp"

namespace mindtrace::synthetic {

namespace {

using detail::standard_normal;
using detail::unit_uniform;

const std::array<std::vector<const char*>, 3> kTerrorismWords = {{
    {"community", "schools", "budget", "roads", "healthcare", "jobs", "investment", "families",
     "local", "services", "trade", "housing", "council", "support", "growth"},
    {"traitors", "invaders", "purge", "enemy", "betrayal", "uprising", "corrupt", "elites",
     "destroy", "hatred", "rage", "replace", "regime", "vengeance", "scum"},
    {"attack", "bomb", "kill", "weapons", "explosive", "strike", "target", "blood", "massacre",
     "operation", "armed", "assault", "cells", "detonate", "ambush"},
}};

const std::vector<const char*> kLeaveWords = {"sovereignty", "leave", "borders", "control",
                                              "independence", "brussels", "freedom", "exit"};
const std::vector<const char*> kRemainWords = {"remain", "single", "market", "customs", "union",
                                               "cooperation", "partners", "membership"};
const std::vector<const char*> kFiller = {"the", "we", "must", "our", "people", "today",
                                          "will", "and", "this", "now", "for", "all"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n)) % n;
}

std::string sentence(std::mt19937_64& rng, const std::vector<const char*>& topic, std::size_t topical) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < topical; ++i) words.emplace_back(topic[pick(rng, topic.size())]);
  for (std::size_t i = 0; i < 5; ++i) words.emplace_back(kFiller[pick(rng, kFiller.size())]);
  for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[pick(rng, i)]);
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  return text;
}

int draw_category(std::mt19937_64& rng, const Eigen::Vector3d& p) {
  const double u = unit_uniform(rng) * p.sum();
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    acc += p(i);
    if (u < acc) return i;
  }
  return 2;
}

std::string label_id(const char* prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

CorpusFixture demo_corpus(const CorpusOptions& options) {
  std::mt19937_64 rng(options.seed);
  CorpusFixture out;
  const auto tables = reference_tables(TableVariant::Corrected);
  const std::int64_t start = options.start.days_since_epoch();
  std::size_t quote_no = 0;

  auto add_quotes = [&](const std::string& person, auto&& make) {
    std::int64_t day = start + static_cast<std::int64_t>(pick(rng, 30));
    for (std::size_t q = 0; q < options.quotes_per_person; ++q) {
      Quote quote;
      quote.id = label_id("q", ++quote_no);
      quote.person_id = person;
      quote.timestamp = Date::from_days(day);
      quote.language = "en";
      make(quote);
      out.quotes.push_back(std::move(quote));
      day += 5 + static_cast<std::int64_t>(pick(rng, 56));
    }
  };

  const std::array<std::pair<std::size_t, PersonCategory>, 3> groups = {{
      {options.centrists, PersonCategory::Centrist},
      {options.extremists, PersonCategory::Extremist},
      {options.terrorists, PersonCategory::Terrorist},
  }};
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < groups[static_cast<std::size_t>(k)].first; ++i) {
      Person p;
      p.id = std::string(to_string(groups[static_cast<std::size_t>(k)].second)).substr(0, 1) +
             label_id("", i + 1);
      if (k == 2 && i == 0) p.id = "demo";
      p.display_name = p.id;
      p.group = std::string(to_string(groups[static_cast<std::size_t>(k)].second));
      p.category = groups[static_cast<std::size_t>(k)].second;
      const Eigen::Vector3d p_s = tables.p_s_given_k.col(k);
      add_quotes(p.id, [&](Quote& q) {
        const int s = draw_category(rng, p_s);
        q.terrorism_label = static_cast<TerrorismLabel>(s);
        q.text = sentence(rng, kTerrorismWords[static_cast<std::size_t>(s)], 6);
      });
      out.persons.push_back(std::move(p));
    }
  }

  for (std::size_t i = 0; i < options.mps; ++i) {
    Person p;
    p.id = label_id("mp", i + 1);
    p.display_name = p.id;
    p.group = i % 2 == 0 ? "party_a" : "party_b";
    const double attitude = unit_uniform(rng);
    std::size_t pro = 0;
    std::size_t labelled = 0;
    add_quotes(p.id, [&](Quote& q) {
      if (unit_uniform(rng) < 0.1) {
        q.brexit_label = BrexitLabel::O;
        q.text = sentence(rng, kFiller, 2);
        return;
      }
      const bool leave = unit_uniform(rng) < attitude;
      const bool strong = unit_uniform(rng) < 0.5;
      q.brexit_label = leave ? (strong ? BrexitLabel::H : BrexitLabel::S)
                             : (strong ? BrexitLabel::A : BrexitLabel::N);
      q.text = sentence(rng, leave ? kLeaveWords : kRemainWords, 5);
      pro += leave ? 1 : 0;
      ++labelled;
    });
    const double measured = labelled == 0 ? 0.5 : static_cast<double>(pro) / static_cast<double>(labelled);
    const double score = std::clamp(-measured + options.vote_noise * standard_normal(rng), -1.0, 1.0);
    const auto n = options.votes_per_mp;
    const auto n_for = static_cast<std::size_t>(std::lround((score + 1.0) / 2.0 * static_cast<double>(n)));
    VoteRecord record;
    record.person_id = p.id;
    std::vector<Vote> ballots(n, Vote::Against);
    for (std::size_t v = 0; v < n_for; ++v) ballots[v] = Vote::For;
    for (std::size_t v = n; v > 1; --v) std::swap(ballots[v - 1], ballots[pick(rng, v)]);
    for (std::size_t v = 0; v < n; ++v) {
      record.votes.emplace_back(Date::from_days(start + 20 * static_cast<std::int64_t>(v)), ballots[v]);
    }
    out.votes.push_back(std::move(record));
    out.persons.push_back(std::move(p));
  }
  return out;
}

void write_quotes_jsonl(std::ostream& out, const std::vector<Quote>& quotes) {
  for (const auto& q : quotes) {
    nlohmann::json j = {{"id", q.id},           {"person_id", q.person_id},
                        {"timestamp", q.timestamp.iso()}, {"text", q.text},
                        {"language", q.language}};
    if (q.terrorism_label) j["terrorism_label"] = std::string(1, to_char(*q.terrorism_label));
    if (q.brexit_label) j["brexit_label"] = std::string(1, to_char(*q.brexit_label));
    if (q.embedding) {
      j["embedding"] = std::vector<double>(q.embedding->data(), q.embedding->data() + q.embedding->size());
    }
    out << j.dump() << '\n';
  }
}

void write_persons_jsonl(std::ostream& out, const std::vector<Person>& persons) {
  for (const auto& p : persons) {
    nlohmann::json j = {{"id", p.id}, {"name", p.display_name}, {"group", p.group}};
    if (p.category) j["category"] = std::string(to_string(*p.category));
    out << j.dump() << '\n';
  }
}

void write_votes_csv(std::ostream& out, const std::vector<VoteRecord>& votes) {
  out << "person_id,date,vote\n";
  for (const auto& r : votes) {
    for (const auto& [date, vote] : r.votes) {
      out << r.person_id << ',' << date.iso() << ','
          << (vote == Vote::For ? "for" : vote == Vote::Against ? "against" : "absent") << '\n';
    }
  }
}

std::vector<BehaveRecord> behave_features(std::size_t persons, const FeatureLayout& layout,
                                          int votes_per_person, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<BehaveRecord> out(persons);
  for (std::size_t i = 0; i < persons; ++i) {
    auto& r = out[i];
    r.person_id = label_id("p", i + 1);
    r.motivation.resize(static_cast<Eigen::Index>(layout.motivation));
    for (Eigen::Index j = 0; j < r.motivation.size(); ++j) r.motivation(j) = standard_normal(rng);
    r.opportunity.resize(static_cast<Eigen::Index>(layout.opportunity));
    for (Eigen::Index j = 0; j < r.opportunity.size(); ++j) {
      r.opportunity(j) = unit_uniform(rng) < 0.5 ? 1.0 : 0.0;
    }
    r.capability.resize(static_cast<Eigen::Index>(layout.capability));
    for (Eigen::Index j = 0; j < r.capability.size(); ++j) r.capability(j) = standard_normal(rng);
    r.words = std::floor(200.0 + 800.0 * unit_uniform(rng));
    r.votes = votes_per_person;
  }
  return out;
}

void simulate_votes(std::vector<BehaveRecord>& records, const BnParams& truth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& r : records) {
    const double p = bn_forward(truth, r);
    r.votes_for = 0;
    for (int v = 0; v < r.votes; ++v) r.votes_for += unit_uniform(rng) < p ? 1 : 0;
  }
}

Eigen::MatrixXd linear_gaussian_sample(const Dag& dag, const Eigen::MatrixXd& weights,
                                       std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(dag.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), d);
  const auto order = dag.topological_order();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (const std::size_t v : order) {
      double x = standard_normal(rng);
      for (const std::size_t p : dag.parents(v)) {
        x += weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(p)) *
             out(r, static_cast<Eigen::Index>(p));
      }
      out(r, static_cast<Eigen::Index>(v)) = x;
    }
  }
  return out;
}

}  // namespace mindtrace::synthetic
