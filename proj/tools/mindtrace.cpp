// mindtrace command-line entry point.
//
// Every subcommand writes its data output to --out and a manifest next to it
// (<out>.manifest.json). Exit codes: 2 missing input, 3 invalid input,
// 4 numerical failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mindtrace/behave.hpp"
#include "mindtrace/classify.hpp"
#include "mindtrace/corpus.hpp"
#include "mindtrace/embed.hpp"
#include "mindtrace/error.hpp"
#include "mindtrace/project.hpp"
#include "mindtrace/track.hpp"

#ifndef MINDTRACE_VERSION
#define MINDTRACE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mindtrace;

namespace {

// ---------------------------------------------------------------------------
// Plumbing

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return "fnv1a64:" + hex(fnv1a(ss.str()));
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("--") + what + " is required");
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " file not found: " + path);
}

struct Run {
  std::string command;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::vector<std::string> inputs;
  CLI::App* app = nullptr;

  std::string config_hash() const {
    std::vector<std::string> items;
    for (const auto* opt : app->get_options()) {
      const std::string name = opt->get_name(false, true);
      if (name.empty() || name == "--help" || name == "--out" || name == "--config") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += r + ";";
      } else {
        value = opt->get_default_str();
      }
      items.push_back(name + "=" + value);
    }
    std::sort(items.begin(), items.end());
    std::uint64_t h = fnv1a(command);
    for (const auto& it : items) h = fnv1a(it + "\n", h);
    return hex(h);
  }

  std::ofstream open(const fs::path& path) const {
    if (path.empty()) throw ValidationError("--out is required");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    return f;
  }

  void manifest(const fs::path& output) const {
    json inputs_json = json::array();
    for (const auto& in : inputs) {
      if (in.empty()) continue;
      inputs_json.push_back({{"path", in}, {"digest", file_digest(in)}});
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    const json m = {{"tool", "mindtrace"},
                    {"version", MINDTRACE_VERSION},
                    {"command", command},
                    {"output", output.filename().string()},
                    {"inputs", inputs_json},
                    {"seed", seed},
                    {"config_hash", config_hash()},
                    {"timestamp", ts.str()}};
    auto f = open(fs::path(output.string() + ".manifest.json"));
    f << m.dump(2) << '\n';
  }

  void write_json(const fs::path& path, const json& j) const {
    {
      auto f = open(path);
      f << j.dump(2) << '\n';
    }
    manifest(path);
  }
};

// Appends `--key value` for every `key = value` line of the config file whose
// option was not given on the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string config;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") config = args[i + 1];
  }
  for (const auto& a : args) {
    if (a.rfind("--config=", 0) == 0) config = a.substr(9);
  }
  if (config.empty()) return args;
  std::ifstream in(config);
  if (!in) throw InputError("config file not found: " + config);

  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(config + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t\r\"");
      if (x == std::string::npos) return std::string();
      const auto y = s.find_last_not_of(" \t\r\"");
      return s.substr(x, y - x + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config" || given(key)) continue;
    if (value == "true") {
      extra.push_back("--" + key);
    } else if (value != "false") {
      extra.push_back("--" + key);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

// ---------------------------------------------------------------------------
// Shared inputs

struct CorpusInputs {
  std::string quotes;
  std::string persons;
  std::string embeddings;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t max_words = 100;
};

void add_corpus_options(CLI::App* sub, CorpusInputs& in, bool embeddings) {
  sub->add_option("--quotes", in.quotes, "Quotes (JSON Lines)");
  sub->add_option("--persons", in.persons, "Persons (JSON Lines)");
  sub->add_option("--max-words", in.max_words, "Reject quotes longer than this")->capture_default_str();
  if (embeddings) {
    sub->add_option("--embeddings", in.embeddings, "Embedding sidecar (JSON Lines)");
    sub->add_option("--dim", in.dim, "Embedding dimension")->capture_default_str();
  }
}

void note_inputs(Run& run, const CorpusInputs& in) {
  run.inputs.push_back(in.quotes);
  run.inputs.push_back(in.persons);
  run.inputs.push_back(in.embeddings);
}

struct LoadedCorpus {
  Corpus corpus;
  IngestReport report;
  std::size_t surrogate = 0;
};

LoadedCorpus load_corpus(const CorpusInputs& in, std::uint64_t seed, bool embed) {
  require_file(in.quotes, "quotes");
  std::vector<Person> persons;
  if (!in.persons.empty()) {
    require_file(in.persons, "persons");
    persons = load_persons(in.persons);
  }
  IngestConfig cfg;
  cfg.max_words = in.max_words;
  auto result = ingest_quotes(in.quotes, cfg, persons);
  for (const auto& r : result.report.rejections) {
    std::cerr << "warning: line " << r.line << (r.id.empty() ? "" : " (" + r.id + ")") << ": "
              << r.reason << '\n';
  }
  if (!persons.empty()) {
    std::vector<Quote> quotes = result.corpus.quotes();
    result.corpus = Corpus(persons, std::move(quotes));
  }
  LoadedCorpus out{std::move(result.corpus), std::move(result.report), 0};
  if (!embed) return out;
  if (!in.embeddings.empty()) {
    require_file(in.embeddings, "embeddings");
    auto attached = attach_external(out.corpus, load_embeddings(in.embeddings), in.dim);
    out.corpus = std::move(attached.corpus);
  }
  for (const auto& q : out.corpus.quotes()) {
    if (q.embedding && static_cast<std::size_t>(q.embedding->size()) != in.dim) {
      throw ValidationError("quote " + q.id + " has an embedding of dimension " +
                            std::to_string(q.embedding->size()) + ", expected " + std::to_string(in.dim));
    }
    if (!q.embedding) ++out.surrogate;
  }
  if (out.surrogate > 0) {
    std::cerr << "note: " << out.surrogate << " quotes embedded with the hashing surrogate\n";
    out.corpus = embed_missing(out.corpus, in.dim, seed);
  }
  return out;
}

Axis parse_axis(const std::string& s) {
  if (s == "terrorism") return Axis::Terrorism;
  if (s == "brexit") return Axis::Brexit;
  throw ValidationError("unknown axis '" + s + "' (terrorism | brexit)");
}

struct AxisData {
  Eigen::MatrixXd samples;
  std::vector<int> labels;
  std::vector<const Quote*> quotes;
};

std::optional<int> axis_label(const Quote& q, Axis axis) {
  if (axis == Axis::Terrorism) {
    if (q.terrorism_label) return static_cast<int>(*q.terrorism_label);
  } else if (q.brexit_label) {
    return static_cast<int>(*q.brexit_label);
  }
  return std::nullopt;
}

std::string label_name(int label, Axis axis) {
  return std::string(1, axis == Axis::Terrorism ? to_char(static_cast<TerrorismLabel>(label))
                                                : to_char(static_cast<BrexitLabel>(label)));
}

AxisData axis_data(const Corpus& corpus, Axis axis) {
  AxisData d;
  for (const auto& q : corpus.quotes()) {
    if (q.embedding && axis_label(q, axis)) d.quotes.push_back(&q);
  }
  if (d.quotes.empty()) throw ValidationError("no labelled, embedded quotes on the requested axis");
  const auto dim = d.quotes.front()->embedding->size();
  d.samples.resize(static_cast<Eigen::Index>(d.quotes.size()), dim);
  for (std::size_t i = 0; i < d.quotes.size(); ++i) {
    d.samples.row(static_cast<Eigen::Index>(i)) = d.quotes[i]->embedding->transpose();
    d.labels.push_back(*axis_label(*d.quotes[i], axis));
  }
  return d;
}

json read_json(const std::string& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

DataTable load_table(const std::string& path) {
  require_file(path, "data");
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty table");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      cells.push_back(c);
    }
    return cells;
  };
  const auto header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    rows.push_back(split(line));
    if (rows.back().size() != header.size()) {
      throw ValidationError(path + ": row " + std::to_string(rows.size() + 1) + " has " +
                            std::to_string(rows.back().size()) + " cells, expected " +
                            std::to_string(header.size()));
    }
  }
  auto numeric = [](const std::string& s, double& v) {
    try {
      std::size_t used = 0;
      v = std::stod(s, &used);
      return used == s.size();
    } catch (const std::exception&) {
      return false;
    }
  };
  DataTable t;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < header.size(); ++c) {
    double v = 0.0;
    const bool all = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return numeric(r[c], v); });
    if (all && !rows.empty()) {
      keep.push_back(c);
      t.names.push_back(header[c]);
    }
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      double v = 0.0;
      numeric(rows[r][keep[k]], v);
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return t;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    j.push_back(row);
  }
  return j;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

const std::vector<std::string> kRegionNames = {"centrist", "extremist", "terrorist"};

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(Run& run, const CorpusInputs& in) {
  note_inputs(run, in);
  const auto loaded = load_corpus(in, run.seed, false);
  const auto stats = loaded.corpus.stats();
  json groups = json::object();
  for (const auto& [g, n] : stats.persons_per_group) groups[g] = n;
  json rejections = json::array();
  for (const auto& r : loaded.report.rejections) {
    rejections.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
  }
  const json report = {
      {"seed", run.seed},
      {"lines_read", loaded.report.lines_read},
      {"quotes", stats.quote_count},
      {"persons", stats.person_count},
      {"terrorism_counts",
       {{"c", stats.terrorism_counts[0]}, {"e", stats.terrorism_counts[1]}, {"t", stats.terrorism_counts[2]}}},
      {"terrorism_unlabelled", stats.terrorism_unlabelled},
      {"brexit_counts",
       {{"A", stats.brexit_counts[0]}, {"N", stats.brexit_counts[1]}, {"S", stats.brexit_counts[2]},
        {"H", stats.brexit_counts[3]}, {"O", stats.brexit_counts[4]}}},
      {"brexit_unlabelled", stats.brexit_unlabelled},
      {"persons_per_group", groups},
      {"rejections", rejections},
      {"month_only_lines", loaded.report.month_only_lines}};
  run.write_json(run.out, report);
  std::cout << stats.quote_count << " quotes accepted, " << loaded.report.rejections.size()
            << " rejected\n";
}

void cmd_embed(Run& run, const CorpusInputs& in) {
  note_inputs(run, in);
  const auto loaded = load_corpus(in, run.seed, true);
  {
    auto f = run.open(run.out);
    write_embeddings(f, loaded.corpus);
  }
  run.manifest(run.out);
  std::cout << loaded.corpus.quotes().size() << " vectors written (" << loaded.surrogate
            << " surrogate)\n";
}

struct ProjectArgs {
  std::string axis = "terrorism";
  std::string method = "lda";
  int components = 0;
  bool categories = false;
  double regularizer = 1e-6;
  std::string model;
};

void cmd_project_fit(Run& run, const CorpusInputs& in, const ProjectArgs& a) {
  note_inputs(run, in);
  const auto loaded = load_corpus(in, run.seed, true);
  const Axis axis = parse_axis(a.axis);
  json model;
  if (a.method == "pca") {
    const auto& quotes = loaded.corpus.quotes();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(quotes.size()), static_cast<Eigen::Index>(in.dim));
    for (std::size_t i = 0; i < quotes.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = quotes[i].embedding->transpose();
    const Eigen::Index n_c = a.components > 0 ? a.components : std::min<Eigen::Index>(2, x.rows() - 1);
    model = to_json(pca_fit(x, n_c));
  } else if (a.method == "lda") {
    const auto data = axis_data(loaded.corpus, axis);
    std::vector<int> classes = data.labels;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const Eigen::Index axes = a.components > 0 ? a.components : static_cast<Eigen::Index>(classes.size()) - 1;
    LdaOptions opts;
    opts.regularizer = a.regularizer;
    const auto lda = lda_fit(data.samples, data.labels, axes, opts);
    for (const auto& w : lda.warnings) std::cerr << "warning: " << w << '\n';
    model = to_json(lda);
    model["axis"] = a.axis;

    if (a.categories) {
      if (axis != Axis::Terrorism || lda.projection.rows() != 2) {
        throw ValidationError("category statistics need a 2-axis terrorism LDA");
      }
      std::map<std::string, int> person_category;
      for (const auto& p : loaded.corpus.persons()) {
        if (p.category) person_category[p.id] = static_cast<int>(*p.category);
      }
      std::vector<LabelledPoint> points;
      Eigen::MatrixXd z(static_cast<Eigen::Index>(data.quotes.size()), 2);
      for (std::size_t i = 0; i < data.quotes.size(); ++i) {
        const Eigen::Vector2d zi = lda.apply(Eigen::VectorXd(*data.quotes[i]->embedding));
        z.row(static_cast<Eigen::Index>(i)) = zi.transpose();
        if (person_category.count(data.quotes[i]->person_id)) {
          points.push_back({data.quotes[i]->person_id, data.labels[i], zi});
        }
      }
      const auto cm = estimate_category_model(points, person_category);
      const auto regions = linear_regions_fit(z, data.labels);
      const json cats = {{"type", "categories"}, {"seed", run.seed}, {"model", to_json(cm)},
                         {"regions", to_json(regions)}};
      const fs::path cats_path = fs::path(run.out).parent_path() / "categories.json";
      run.write_json(cats_path, cats);
    }
  } else {
    throw ValidationError("unknown projection method '" + a.method + "' (lda | pca)");
  }
  model["seed"] = run.seed;
  run.write_json(run.out, model);
}

json load_projection(const std::string& path, bool& is_lda, LdaModel& lda, PcaModel& pca) {
  const json j = read_json(path, "model");
  const std::string type = j.value("type", "");
  if (type == "lda") {
    lda = lda_from_json(j);
    is_lda = true;
  } else if (type == "pca") {
    pca = pca_from_json(j);
    is_lda = false;
  } else {
    throw ValidationError(path + ": not a projection model");
  }
  return j;
}

void cmd_project_apply(Run& run, const CorpusInputs& in, const ProjectArgs& a) {
  note_inputs(run, in);
  run.inputs.push_back(a.model);
  bool is_lda = false;
  LdaModel lda;
  PcaModel pca;
  load_projection(a.model, is_lda, lda, pca);
  const auto loaded = load_corpus(in, run.seed, true);
  const Eigen::Index dim = is_lda ? lda.dimension() : pca.dimension();
  const Eigen::Index p = is_lda ? lda.projection.rows() : pca.component_count();
  {
    auto f = run.open(run.out);
    f << "quote_id,person_id,timestamp,terrorism_label,brexit_label";
    for (Eigen::Index i = 0; i < p; ++i) f << ",z" << (i + 1);
    f << '\n' << std::setprecision(17);
    for (const auto& q : loaded.corpus.quotes()) {
      if (q.embedding->size() != dim) throw ValidationError("embedding dimension does not match the model");
      const Eigen::VectorXd z = is_lda ? lda.apply(*q.embedding)
                                       : Eigen::VectorXd(pca.transform(q.embedding->transpose()).transpose());
      f << q.id << ',' << q.person_id << ',' << q.timestamp.iso() << ','
        << (q.terrorism_label ? std::string(1, to_char(*q.terrorism_label)) : "") << ','
        << (q.brexit_label ? std::string(1, to_char(*q.brexit_label)) : "");
      for (Eigen::Index i = 0; i < p; ++i) f << ',' << z(i);
      f << '\n';
    }
  }
  run.manifest(run.out);
}

struct CvArgs {
  std::string axis = "terrorism";
  std::size_t folds = 10;
  std::string grid = "default";
};

void cmd_classify_cv(Run& run, const CorpusInputs& in, const CvArgs& a) {
  note_inputs(run, in);
  const auto loaded = load_corpus(in, run.seed, true);
  const Axis axis = parse_axis(a.axis);
  const auto data = axis_data(loaded.corpus, axis);
  CvOptions opts;
  opts.folds = a.folds;
  opts.seed = run.seed;
  if (a.grid == "small") {
    opts.grid.n_pca = {std::nullopt};
    opts.grid.C = {1.0, 10.0};
    opts.grid.gamma_scale = {1.0};
  } else if (a.grid == "linear") {
    opts.grid.n_pca = {std::nullopt};
    opts.grid.C = {0.1, 1.0, 10.0};
    opts.grid.gamma_scale = {1.0};
    opts.grid.kernel = KernelSpec::Type::Linear;
  } else if (a.grid != "default") {
    throw ValidationError("unknown grid '" + a.grid + "' (default | small | linear)");
  }
  const auto report = cross_validate(data.samples, data.labels, opts);
  json j = to_json(report);
  j["axis"] = a.axis;
  json names = json::array();
  for (const int c : report.classes) names.push_back(label_name(c, axis));
  j["class_names"] = names;
  run.write_json(run.out, j);
  std::cout << "balanced accuracy " << report.balanced_accuracy << '\n';
}

struct TrackArgs {
  std::string lda;
  std::string categories;
  std::string person;
  std::string noise = "state";
  bool reference_tables = false;
  double horizon = 1.0;
};

struct TrackSetup {
  Track track;
  MotionModel motion;
  LinearRegionClassifier regions;
};

TrackSetup run_tracker(Run& run, const CorpusInputs& in, const TrackArgs& a) {
  note_inputs(run, in);
  run.inputs.push_back(a.lda);
  run.inputs.push_back(a.categories);
  if (a.person.empty()) throw ValidationError("--person-id is required");
  bool is_lda = false;
  LdaModel lda;
  PcaModel pca;
  load_projection(a.lda, is_lda, lda, pca);
  if (!is_lda || lda.projection.rows() != 2) throw ValidationError("tracking needs a 2-axis LDA model");
  const json cats = read_json(a.categories, "categories");
  if (cats.value("type", "") != "categories") throw ValidationError(a.categories + ": not a categories file");
  CategoryModel model = category_model_from_json(cats.at("model"));
  if (a.reference_tables) model.tables = reference_tables(TableVariant::Corrected);
  TrackSetup setup;
  setup.regions = linear_regions_from_json(cats.at("regions"));

  const auto loaded = load_corpus(in, run.seed, true);
  if (!loaded.corpus.find_person(a.person)) throw ValidationError("unknown person '" + a.person + "'");
  std::vector<TrackPoint> points;
  for (const auto* q : loaded.corpus.quotes_of(a.person)) {
    if (q->embedding->size() != lda.dimension()) {
      throw ValidationError("embedding dimension does not match the LDA model");
    }
    points.push_back({q->timestamp, lda.apply(*q->embedding)});
  }
  if (points.empty()) throw ValidationError("person '" + a.person + "' has no quotes");

  if (a.noise == "state") {
    setup.track = track_person(points, setup.motion, StateDependentNoise(model), std::nullopt, &setup.regions);
  } else if (a.noise == "fixed") {
    setup.track = track_person(points, setup.motion, FixedNoise(model.gaussians.z_given_s[0].cov),
                               std::nullopt, &setup.regions);
  } else {
    throw ValidationError("unknown noise model '" + a.noise + "' (state | fixed)");
  }
  return setup;
}

void cmd_track_run(Run& run, const CorpusInputs& in, const TrackArgs& a) {
  const auto setup = run_tracker(run, in, a);
  {
    auto f = run.open(run.out);
    write_track_csv(f, setup.track, kRegionNames);
  }
  run.manifest(run.out);
  std::cout << setup.track.size() << " states written\n";
}

void cmd_track_predict(Run& run, const CorpusInputs& in, const TrackArgs& a) {
  const auto setup = run_tracker(run, in, a);
  const StateEstimate s = predict_future(setup.track, a.horizon, setup.motion);
  const int region = setup.regions.predict(s.position());
  Eigen::MatrixXd cov = s.covariance;
  const json j = {{"seed", run.seed},
                  {"person_id", a.person},
                  {"last_measurement", setup.track.back().date.iso()},
                  {"horizon_years", a.horizon},
                  {"mean", vec(s.mean)},
                  {"covariance", matrix_json(cov)},
                  {"position", {s.mean(0), s.mean(2)}},
                  {"region_label", kRegionNames[static_cast<std::size_t>(region)]}};
  run.write_json(run.out, j);
}

struct CorrelateArgs {
  std::string votes;
  std::size_t min_quotes = 3;
};

void cmd_correlate(Run& run, const CorpusInputs& in, const CorrelateArgs& a) {
  note_inputs(run, in);
  run.inputs.push_back(a.votes);
  require_file(a.votes, "votes");
  const auto loaded = load_corpus(in, run.seed, false);
  const auto votes = load_votes(a.votes);
  PersonFilter filter;
  filter.min_quotes = a.min_quotes;
  const auto outcome = filter_persons(loaded.corpus, votes, filter);
  json removed = json::array();
  for (const auto& [id, reason] : outcome.removed) removed.push_back({{"person_id", id}, {"reason", reason}});

  std::map<std::string, const VoteRecord*> by_person;
  for (const auto& v : votes) by_person[v.person_id] = &v;
  json points = json::array();
  std::vector<double> xs, ys;
  for (const auto& id : outcome.kept) {
    std::vector<BrexitLabel> labels;
    for (const auto* q : loaded.corpus.quotes_of(id)) {
      if (q->brexit_label) labels.push_back(*q->brexit_label);
    }
    double attitude = 0.0;
    double score = 0.0;
    try {
      attitude = attitude_score(labels);
      score = vote_score(*by_person.at(id));
    } catch (const ValidationError& e) {
      removed.push_back({{"person_id", id}, {"reason", e.what()}});
      continue;
    }
    const Person* p = loaded.corpus.find_person(id);
    xs.push_back(attitude);
    ys.push_back(score);
    points.push_back({{"person_id", id}, {"attitude", attitude}, {"vote_score", score},
                      {"group", p ? p->group : ""}});
  }
  const double r = correlate(xs, ys);
  run.write_json(run.out, {{"seed", run.seed}, {"pearson_r", r}, {"n", xs.size()},
                           {"points", points}, {"removed", removed}});
  std::cout << "pearson r " << r << " over " << xs.size() << " persons\n";
}

struct ExportArgs {
  std::string kind = "scatter";
  std::string from;
  double jitter = 0.02;
  std::size_t grid = 200;
};

void cmd_export(Run& run, const ExportArgs& a) {
  run.inputs.push_back(a.from);
  const json j = read_json(a.from, "from");
  if (a.kind == "scatter") {
    std::vector<ScatterPoint> pts;
    for (const auto& p : j.at("points")) {
      pts.push_back({p.at("attitude").get<double>(), p.at("vote_score").get<double>(),
                     p.value("group", "")});
    }
    const auto rows = export_scatter(pts, a.jitter, run.seed);
    {
      auto f = run.open(run.out);
      write_scatter_csv(f, rows);
    }
    run.manifest(run.out);
  } else if (a.kind == "regions") {
    if (j.value("type", "") != "categories") throw ValidationError(a.from + ": not a categories file");
    const auto regions = linear_regions_from_json(j.at("regions"));
    if (regions.means.cols() != 2) throw ValidationError("region raster needs a 2-D model");
    const Eigen::VectorXd lo = regions.means.colwise().minCoeff();
    const Eigen::VectorXd hi = regions.means.colwise().maxCoeff();
    const Eigen::VectorXd pad = 4.0 * regions.pooled_covariance.diagonal().cwiseSqrt();
    const auto cells = regions.raster(lo(0) - pad(0), hi(0) + pad(0), lo(1) - pad(1), hi(1) + pad(1),
                                      a.grid, a.grid);
    {
      auto f = run.open(run.out);
      f << "x,y,region_label\n" << std::setprecision(17);
      for (const auto& c : cells) {
        f << c.x << ',' << c.y << ',' << kRegionNames.at(static_cast<std::size_t>(c.label)) << '\n';
      }
    }
    run.manifest(run.out);
  } else {
    throw ValidationError("unknown export kind '" + a.kind + "' (scatter | regions)");
  }
}

struct BehaveArgs {
  std::string data;
  std::string posterior;
  std::size_t chains = 4;
  std::size_t warmup = 1500;
  std::size_t draws = 1500;
  std::size_t thin = 1;
  double kappa = 10.0;
  bool prior_only = false;
  std::size_t restarts = 0;
  std::size_t max_iterations = 10000;
  std::vector<std::string> allow;
  std::vector<std::string> deny;
  std::string import;
  bool serial = false;
};

void cmd_behave_fit(Run& run, const BehaveArgs& a) {
  run.inputs.push_back(a.data);
  require_file(a.data, "data");
  const auto records = load_behave_csv(a.data);
  BnPrior prior;
  prior.concentration = a.kappa;
  if (!(a.kappa > 0.0)) throw ValidationError("--kappa must be positive");
  if (a.prior_only) prior.likelihood_weight = 0.0;
  McmcOptions opts;
  opts.chains = a.chains;
  opts.warmup = a.warmup;
  opts.draws = a.draws;
  opts.thin = a.thin;
  opts.seed = run.seed;
  const auto samples = bn_fit(records, prior, opts);
  run.write_json(run.out, to_json(samples));
  const double worst = samples.rhat.maxCoeff();
  std::cout << "max split-R-hat " << worst << (samples.converged ? "" : " (not converged)") << '\n';
  if (!samples.converged) std::cerr << "warning: chains did not converge (R-hat >= " << opts.rhat_threshold << ")\n";
}

void cmd_behave_predict(Run& run, const BehaveArgs& a) {
  run.inputs.push_back(a.posterior);
  run.inputs.push_back(a.data);
  const auto samples = posterior_from_json(read_json(a.posterior, "posterior"));
  require_file(a.data, "data");
  const auto records = load_behave_csv(a.data);
  std::vector<double> predicted, observed;
  {
    auto f = run.open(run.out);
    f << "person_id,mean,lower,upper,observed\n" << std::setprecision(17);
    for (const auto& r : records) {
      const auto p = bn_predict(samples, r);
      f << r.person_id << ',' << p.mean << ',' << p.lower << ',' << p.upper << ',';
      if (r.votes > 0) {
        const double o = static_cast<double>(r.votes_for) / r.votes;
        f << o;
        predicted.push_back(p.mean);
        observed.push_back(o);
      }
      f << '\n';
    }
  }
  run.manifest(run.out);
  if (!predicted.empty()) std::cout << "rmse " << rmse(predicted, observed) << '\n';
}

std::vector<std::pair<std::string, std::string>> parse_edges(const std::vector<std::string>& specs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : specs) {
    const auto arrow = s.find("->");
    if (arrow == std::string::npos) throw ValidationError("edge '" + s + "' must look like A->B");
    out.emplace_back(s.substr(0, arrow), s.substr(arrow + 2));
  }
  return out;
}

void cmd_behave_hc(Run& run, const BehaveArgs& a) {
  run.inputs.push_back(a.data);
  run.inputs.push_back(a.import);
  const auto table = load_table(a.data);
  json j;
  if (!a.import.empty()) {
    require_file(a.import, "import");
    Dag dag = import_dag(a.import);
    DataTable ordered;
    ordered.names = dag.nodes();
    ordered.values.resize(table.values.rows(), static_cast<Eigen::Index>(dag.size()));
    for (std::size_t v = 0; v < dag.size(); ++v) {
      const auto c = table.index_of(dag.nodes()[v]);
      if (!c) throw ValidationError("no data column for node '" + dag.nodes()[v] + "'");
      ordered.values.col(static_cast<Eigen::Index>(v)) = table.values.col(static_cast<Eigen::Index>(*c));
    }
    for (std::size_t v = 0; v < dag.size(); ++v) {
      const auto pa = dag.parents(v);
      dag.node_scores[v] = node_bic(ordered, v, pa);
    }
    j = to_json(dag);
    j["score"] = bic_score(dag, ordered);
    j["iterations"] = 0;
  } else {
    HcOptions opts;
    opts.seed = run.seed;
    opts.restarts = a.restarts;
    opts.max_iterations = a.max_iterations;
    opts.parallel = !a.serial;
    opts.constraints.allow = parse_edges(a.allow);
    opts.constraints.deny = parse_edges(a.deny);
    const auto result = hc_search(table, opts);
    j = to_json(result.dag);
    j["score"] = result.score;
    j["iterations"] = result.iterations;
  }
  j["seed"] = run.seed;
  run.write_json(run.out, j);
  std::cout << j.at("edges").size() << " edges, BIC " << j.at("score").get<double>() << '\n';
}

void cmd_behave_efa(Run& run, const BehaveArgs& a) {
  run.inputs.push_back(a.data);
  const auto table = load_table(a.data);
  const auto f = efa_fit(table.values);
  for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
  run.write_json(run.out, {{"seed", run.seed},
                           {"variables", table.names},
                           {"eigenvalues", vec(f.eigenvalues)},
                           {"loadings", matrix_json(f.loadings)},
                           {"assignment", f.assignment},
                           {"factors", f.factor_count()},
                           {"warnings", f.warnings}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statement tracking and behaviour modelling toolkit"};
  app.set_version_flag("--version", MINDTRACE_VERSION);
  app.require_subcommand(1);

  std::vector<Run> runs;
  runs.reserve(16);
  CorpusInputs corpus_in;
  ProjectArgs project_args;
  CvArgs cv_args;
  TrackArgs track_args;
  CorrelateArgs correlate_args;
  ExportArgs export_args;
  BehaveArgs behave_args;

  std::function<void()> action;

  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help,
                  const std::string& command) {
    CLI::App* sub = parent->add_subcommand(name, help);
    runs.push_back(Run{});
    Run& run = runs.back();
    run.command = command;
    run.app = sub;
    sub->add_option("--seed", run.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", run.out, "Output file");
    sub->add_option("--config", run.config, "key = value configuration file; flags win");
    return std::pair<CLI::App*, Run*>{sub, &run};
  };

  {
    auto [sub, run] = leaf(&app, "ingest", "Validate and summarise a quote file", "ingest");
    add_corpus_options(sub, corpus_in, false);
    sub->callback([&, run] { action = [&, run] { cmd_ingest(*run, corpus_in); }; });
  }
  {
    auto [sub, run] = leaf(&app, "embed", "Attach or compute quote embeddings", "embed");
    add_corpus_options(sub, corpus_in, true);
    sub->callback([&, run] { action = [&, run] { cmd_embed(*run, corpus_in); }; });
  }
  {
    CLI::App* project = app.add_subcommand("project", "Linear projections");
    project->require_subcommand(1);
    auto [fit, fit_run] = leaf(project, "fit", "Fit an LDA or PCA projection", "project fit");
    add_corpus_options(fit, corpus_in, true);
    fit->add_option("--axis", project_args.axis, "terrorism | brexit")->capture_default_str();
    fit->add_option("--method", project_args.method, "lda | pca")->capture_default_str();
    fit->add_option("--components", project_args.components, "Output dimension (0: automatic)");
    fit->add_option("--regularizer", project_args.regularizer, "LDA scatter regulariser")->capture_default_str();
    fit->add_flag("--categories", project_args.categories,
                  "Also write categories.json (tracker statistics and regions) next to --out");
    fit->callback([&, fit_run] { action = [&, fit_run] { cmd_project_fit(*fit_run, corpus_in, project_args); }; });

    auto [apply, apply_run] = leaf(project, "apply", "Project quotes with a fitted model", "project apply");
    add_corpus_options(apply, corpus_in, true);
    apply->add_option("--model", project_args.model, "Projection model JSON");
    apply->callback([&, apply_run] {
      action = [&, apply_run] { cmd_project_apply(*apply_run, corpus_in, project_args); };
    });
  }
  {
    CLI::App* classify = app.add_subcommand("classify", "Statement classification");
    classify->require_subcommand(1);
    auto [cv, run] = leaf(classify, "cv", "Stratified cross-validation of the kernel classifier", "classify cv");
    add_corpus_options(cv, corpus_in, true);
    cv->add_option("--axis", cv_args.axis, "terrorism | brexit")->capture_default_str();
    cv->add_option("--folds", cv_args.folds, "Outer folds")->capture_default_str();
    cv->add_option("--grid", cv_args.grid, "default | small | linear")->capture_default_str();
    cv->callback([&, run] { action = [&, run] { cmd_classify_cv(*run, corpus_in, cv_args); }; });
  }
  {
    CLI::App* track = app.add_subcommand("track", "Mind-state tracking");
    track->require_subcommand(1);
    for (const char* mode : {"run", "predict"}) {
      const std::string m = mode;
      auto [sub, run] = leaf(track, m, m == "run" ? "Filter one person's quotes" : "Predict a person's future state",
                             "track " + m);
      add_corpus_options(sub, corpus_in, true);
      sub->add_option("--lda", track_args.lda, "2-axis LDA model JSON");
      sub->add_option("--categories", track_args.categories, "categories.json from project fit");
      sub->add_option("--person-id", track_args.person, "Person to track");
      sub->add_option("--noise", track_args.noise, "state | fixed")->capture_default_str();
      sub->add_flag("--reference-tables", track_args.reference_tables, "Use the built-in category tables");
      if (m == "predict") {
        sub->add_option("--horizon", track_args.horizon, "Years past the last quote")->capture_default_str();
        sub->callback([&, run] { action = [&, run] { cmd_track_predict(*run, corpus_in, track_args); }; });
      } else {
        sub->callback([&, run] { action = [&, run] { cmd_track_run(*run, corpus_in, track_args); }; });
      }
    }
  }
  {
    auto [sub, run] = leaf(&app, "correlate", "Correlate stated attitude with voting", "correlate");
    add_corpus_options(sub, corpus_in, false);
    sub->add_option("--votes", correlate_args.votes, "Votes CSV");
    sub->add_option("--min-quotes", correlate_args.min_quotes, "Minimum quotes per person")->capture_default_str();
    sub->callback([&, run] { action = [&, run] { cmd_correlate(*run, corpus_in, correlate_args); }; });
  }
  {
    auto [sub, run] = leaf(&app, "export", "Export plot data as CSV", "export");
    sub->add_option("--kind", export_args.kind, "scatter | regions")->capture_default_str();
    sub->add_option("--from", export_args.from, "correlate output (scatter) or categories.json (regions)");
    sub->add_option("--jitter", export_args.jitter, "Scatter jitter half-width")->capture_default_str();
    sub->add_option("--grid", export_args.grid, "Raster cells per axis")->capture_default_str();
    sub->callback([&, run] { action = [&, run] { cmd_export(*run, export_args); }; });
  }
  {
    CLI::App* behave = app.add_subcommand("behave", "Behaviour models");
    behave->require_subcommand(1);
    auto [fit, fit_run] = leaf(behave, "fit", "Sample the network posterior", "behave fit");
    fit->add_option("--data", behave_args.data, "behave.csv");
    fit->add_option("--chains", behave_args.chains, "Chains")->capture_default_str();
    fit->add_option("--warmup", behave_args.warmup, "Warm-up sweeps per chain")->capture_default_str();
    fit->add_option("--draws", behave_args.draws, "Kept draws per chain")->capture_default_str();
    fit->add_option("--thin", behave_args.thin, "Thinning")->capture_default_str();
    fit->add_option("--kappa", behave_args.kappa, "Dirichlet concentration")->capture_default_str();
    fit->add_flag("--prior-only", behave_args.prior_only, "Ignore the likelihood");
    fit->callback([&, fit_run] { action = [&, fit_run] { cmd_behave_fit(*fit_run, behave_args); }; });

    auto [pred, pred_run] = leaf(behave, "predict", "Posterior predictive vote share", "behave predict");
    pred->add_option("--posterior", behave_args.posterior, "behave fit output");
    pred->add_option("--data", behave_args.data, "behave.csv");
    pred->callback([&, pred_run] { action = [&, pred_run] { cmd_behave_predict(*pred_run, behave_args); }; });

    auto [hc, hc_run] = leaf(behave, "hc", "Hill-climbing structure learning", "behave hc");
    hc->add_option("--data", behave_args.data, "Numeric CSV table");
    hc->add_option("--restarts", behave_args.restarts, "Random restarts")->capture_default_str();
    hc->add_option("--max-iterations", behave_args.max_iterations, "Moves per climb")->capture_default_str();
    hc->add_option("--allow", behave_args.allow, "Required edge A->B (repeatable)");
    hc->add_option("--deny", behave_args.deny, "Forbidden edge A->B (repeatable)");
    hc->add_option("--import", behave_args.import, "Score a given dag.json instead of searching");
    hc->add_flag("--serial", behave_args.serial, "Score candidate moves serially");
    hc->callback([&, hc_run] { action = [&, hc_run] { cmd_behave_hc(*hc_run, behave_args); }; });

    auto [efa, efa_run] = leaf(behave, "efa", "Exploratory factor analysis", "behave efa");
    efa->add_option("--data", behave_args.data, "Numeric CSV table");
    efa->callback([&, efa_run] { action = [&, efa_run] { cmd_behave_efa(*efa_run, behave_args); }; });
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (action) action();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
