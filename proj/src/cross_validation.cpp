#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <random>

#include "mindtrace/classify.hpp"
#include "mindtrace/error.hpp"
#include "mindtrace/project.hpp"

namespace mindtrace {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fisher-Yates with an explicit draw so the permutation does not depend on
// the standard library's shuffle implementation.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::map<int, std::vector<std::size_t>> by_class(std::span<const int> labels,
                                                 std::span<const std::size_t> subset) {
  std::map<int, std::vector<std::size_t>> out;
  for (const auto i : subset) out[labels[i]].push_back(i);
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

std::vector<int> take(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(labels[i]);
  return out;
}

double gamma_for(const Eigen::MatrixXd& features, double scale) {
  const double n = static_cast<double>(features.size());
  const double mean = features.sum() / n;
  const double var = (features.array() - mean).square().sum() / n;
  const double denom = static_cast<double>(features.cols()) * var;
  return denom > 0.0 ? scale / denom : scale;
}

std::size_t class_count(std::span<const int> labels) {
  std::vector<int> c(labels.begin(), labels.end());
  std::sort(c.begin(), c.end());
  return static_cast<std::size_t>(std::unique(c.begin(), c.end()) - c.begin());
}

ConfusionMatrix confusion_of(std::span<const int> truth, std::span<const int> predicted,
                             const std::vector<int>& classes) {
  ConfusionMatrix m = ConfusionMatrix::Zero(static_cast<Eigen::Index>(classes.size()),
                                            static_cast<Eigen::Index>(classes.size()));
  auto index = [&](int label) {
    return static_cast<Eigen::Index>(std::lower_bound(classes.begin(), classes.end(), label) -
                                     classes.begin());
  };
  for (std::size_t i = 0; i < truth.size(); ++i) ++m(index(truth[i]), index(predicted[i]));
  return m;
}

struct Features {
  std::optional<PcaModel> pca;
  Eigen::MatrixXd train;
};

// Fits the reduction on `train` and returns the reduced training features.
Features reduce(const Eigen::MatrixXd& train, std::optional<Eigen::Index> n_pca) {
  Features f;
  if (n_pca) {
    f.pca = pca_fit(train, *n_pca);
    f.train = f.pca->transform(train);
  } else {
    f.train = train;
  }
  return f;
}

Eigen::MatrixXd apply(const Features& f, const Eigen::MatrixXd& x) {
  return f.pca ? f.pca->transform(x) : x;
}

HyperChoice search_grid(const Eigen::MatrixXd& samples, std::span<const int> labels,
                        std::span<const std::size_t> train, const CvOptions& opt,
                        std::uint64_t seed) {
  const HyperGrid& grid = opt.grid;
  HyperChoice fallback;
  fallback.n_pca = std::nullopt;
  fallback.C = grid.C.empty() ? 1.0 : grid.C.front();
  fallback.gamma = grid.gamma_scale.empty() ? 1.0 : grid.gamma_scale.front();
  fallback.validation_balanced_accuracy = -1.0;

  // Stratified inner split.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> inner_train;
  std::vector<std::size_t> inner_val;
  for (auto& [label, idx] : by_class(labels, train)) {
    shuffle_in_place(idx, rng);
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(opt.validation_fraction * static_cast<double>(idx.size()) + 0.5));
    if (idx.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    else n_val = 0;
    inner_val.insert(inner_val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    inner_train.insert(inner_train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(inner_train.begin(), inner_train.end());
  std::sort(inner_val.begin(), inner_val.end());
  const auto train_labels = take(labels, inner_train);
  if (inner_val.empty() || class_count(train_labels) < 2) return fallback;

  const Eigen::MatrixXd x_train = take_rows(samples, inner_train);
  const Eigen::MatrixXd x_val = take_rows(samples, inner_val);
  const auto val_labels = take(labels, inner_val);
  std::vector<int> classes = train_labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (const int l : val_labels) {
    if (!std::binary_search(classes.begin(), classes.end(), l)) {
      classes.insert(std::lower_bound(classes.begin(), classes.end(), l), l);
    }
  }

  const Eigen::Index max_components =
      std::min<Eigen::Index>(x_train.cols(), x_train.rows() - 1);
  Eigen::Index widest = 0;
  for (const auto& n : grid.n_pca) {
    if (n && *n <= max_components) widest = std::max(widest, *n);
  }
  std::optional<PcaModel> widest_pca;
  if (widest > 0) widest_pca = pca_fit(x_train, widest);

  HyperChoice best = fallback;
  for (const auto& n : grid.n_pca) {
    if (n && *n > max_components) continue;
    Eigen::MatrixXd f_train = x_train;
    Eigen::MatrixXd f_val = x_val;
    if (n) {
      const PcaModel pca = widest_pca->truncated(*n);
      f_train = pca.transform(x_train);
      f_val = pca.transform(x_val);
    }
    for (const double c : grid.C) {
      for (const double scale : grid.gamma_scale) {
        const KernelSpec kernel = grid.kernel == KernelSpec::Type::Rbf
                                      ? KernelSpec::rbf(gamma_for(f_train, scale))
                                      : KernelSpec::linear();
        double ba = -1.0;
        try {
          const auto model = svm_fit(f_train, train_labels, kernel, c, opt.svm);
          ba = balanced_accuracy(confusion_of(val_labels, model.predict(f_val), classes));
        } catch (const NumericalError&) {
          // Non-converged grid points are skipped.
        }
        if (ba > best.validation_balanced_accuracy) {
          best.n_pca = n;
          best.C = c;
          best.gamma = scale;  // scale; resolved against the final features
          best.validation_balanced_accuracy = ba;
        }
        if (grid.kernel == KernelSpec::Type::Linear) break;
      }
    }
  }
  return best;
}

}  // namespace

HyperGrid HyperGrid::default_grid() {
  HyperGrid g;
  g.n_pca = {16, 32, 64, 128, std::nullopt};
  g.C = {0.1, 1.0, 10.0, 100.0};
  g.gamma_scale = {0.5, 1.0, 2.0};
  return g;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (labels.size() < folds) {
    throw ValidationError("fewer samples (" + std::to_string(labels.size()) + ") than folds (" +
                          std::to_string(folds) + ")");
  }
  std::vector<std::size_t> all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t deal = 0;
  for (auto& [label, idx] : by_class(labels, all)) {
    shuffle_in_place(idx, rng);
    for (const auto i : idx) fold_of[i] = deal++ % folds;
  }
  return fold_of;
}

CvReport cross_validate(const Eigen::MatrixXd& samples, std::span<const int> labels,
                        const CvOptions& options) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw ValidationError("label count does not match sample count");
  }
  if (class_count(labels) < 2) throw ValidationError("cross-validation needs 2 classes");
  const auto fold_of = stratified_folds(labels, options.folds, options.seed);

  CvReport report;
  report.seed = options.seed;
  report.classes.assign(labels.begin(), labels.end());
  std::sort(report.classes.begin(), report.classes.end());
  report.classes.erase(std::unique(report.classes.begin(), report.classes.end()),
                       report.classes.end());
  report.folds.resize(options.folds);
  report.predictions.assign(labels.size(), 0);

  std::vector<std::exception_ptr> errors(options.folds);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < options.folds; ++f) {
    try {
      std::vector<std::size_t> train;
      std::vector<std::size_t> test;
      for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
      const auto train_labels = take(labels, train);
      if (class_count(train_labels) < 2) {
        throw ValidationError("training fold " + std::to_string(f) + " has a single class");
      }

      HyperChoice choice = search_grid(samples, labels, train, options, mix_seed(options.seed, f));
      const Eigen::MatrixXd x_train = take_rows(samples, train);
      if (choice.n_pca && *choice.n_pca > std::min<Eigen::Index>(x_train.cols(), x_train.rows() - 1)) {
        choice.n_pca.reset();
      }
      const Features features = reduce(x_train, choice.n_pca);
      choice.gamma = options.grid.kernel == KernelSpec::Type::Rbf
                         ? gamma_for(features.train, choice.gamma)
                         : 0.0;
      const KernelSpec kernel = options.grid.kernel == KernelSpec::Type::Rbf
                                    ? KernelSpec::rbf(choice.gamma)
                                    : KernelSpec::linear();
      const auto model = svm_fit(features.train, train_labels, kernel, choice.C, options.svm);
      const auto predicted = model.predict(apply(features, take_rows(samples, test)));

      FoldResult& result = report.folds[f];
      result.test_indices = test;
      result.chosen = choice;
      result.confusion = confusion_of(take(labels, test), predicted, report.classes);
      for (std::size_t t = 0; t < test.size(); ++t) report.predictions[test[t]] = predicted[t];
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const auto k = static_cast<Eigen::Index>(report.classes.size());
  report.pooled = ConfusionMatrix::Zero(k, k);
  for (const auto& f : report.folds) report.pooled += f.confusion;
  report.balanced_accuracy = balanced_accuracy(report.pooled);
  return report;
}

nlohmann::json to_json(const CvReport& report) {
  auto matrix = [](const ConfusionMatrix& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<std::int64_t> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      j.push_back(row);
    }
    return j;
  };
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fold = report.folds[f];
    nlohmann::json chosen = {{"C", fold.chosen.C},
                             {"gamma", fold.chosen.gamma},
                             {"validation_balanced_accuracy", fold.chosen.validation_balanced_accuracy}};
    chosen["n_pca"] = fold.chosen.n_pca ? nlohmann::json(*fold.chosen.n_pca) : nlohmann::json("full");
    folds.push_back({{"fold", f},
                     {"test_size", fold.test_indices.size()},
                     {"confusion", matrix(fold.confusion)},
                     {"balanced_accuracy", balanced_accuracy(fold.confusion)},
                     {"chosen", chosen}});
  }
  return {{"classes", report.classes},
          {"seed", report.seed},
          {"folds", folds},
          {"pooled_confusion", matrix(report.pooled)},
          {"balanced_accuracy", report.balanced_accuracy}};
}

}  // namespace mindtrace
