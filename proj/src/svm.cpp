#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mindtrace/classify.hpp"
#include "mindtrace/error.hpp"
#include "mindtrace/kernels.hpp"

namespace mindtrace {

Eigen::MatrixXd KernelSpec::gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  return type == Type::Rbf ? kernels::rbf_gram(a, b, gamma) : kernels::linear_gram(a, b);
}

double balanced_accuracy(const ConfusionMatrix& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() < 2) {
    throw ValidationError("balanced accuracy needs a square confusion matrix with K >= 2");
  }
  double sum = 0.0;
  int supported = 0;
  for (Eigen::Index k = 0; k < confusion.rows(); ++k) {
    const auto total = confusion.row(k).sum();
    if (total == 0) continue;
    sum += static_cast<double>(confusion(k, k)) / static_cast<double>(total);
    ++supported;
  }
  if (supported == 0) throw ValidationError("confusion matrix has no samples");
  return sum / supported;
}

namespace {

constexpr double kTau = 1e-12;

struct BinarySolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;
  std::size_t iterations = 0;
};

// SMO with second-order working-set selection on the dual
//   min 1/2 a'Qa - e'a,  0 <= a <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
BinarySolution solve_binary(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C,
                            const SvmOptions& opt) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = -Eigen::VectorXd::Ones(n);

  auto upper = [&](Eigen::Index t) { return alpha(t) >= C; };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };
  auto in_up = [&](Eigen::Index t) { return y(t) > 0 ? !upper(t) : !lower(t); };
  auto in_low = [&](Eigen::Index t) { return y(t) > 0 ? !lower(t) : !upper(t); };

  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (; iter < opt.max_iterations; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y(t) * grad(t) >= g_max) {
        g_max = -y(t) * grad(t);
        i = t;
      }
    }
    double g_min = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y(t) * grad(t);
      g_min = std::min(g_min, v);
      if (i < 0) continue;
      const double b = g_max - v;
      if (b > 0.0) {
        double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    gap = g_max - g_min;
    if (i < 0 || j < 0 || gap < opt.tolerance) break;

    const double yi = y(i);
    const double yj = y(j);
    const double old_i = alpha(i);
    const double old_j = alpha(j);
    const double qij = yi * yj * K(i, j);
    if (yi != yj) {
      double quad = K(i, i) + K(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }

    const double di = alpha(i) - old_i;
    const double dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) {
      grad(t) += y(t) * (yi * K(t, i) * di + yj * K(t, j) * dj);
    }
  }

  if (gap >= opt.tolerance && iter >= opt.max_iterations) {
    std::ostringstream os;
    os << "SVM did not converge: " << iter << " iterations, KKT gap " << gap
       << " (tolerance " << opt.tolerance << "), n=" << n << ", C=" << C;
    throw NumericalError(os.str());
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  BinarySolution out;
  out.rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
  out.alpha = std::move(alpha);
  out.iterations = iter;
  return out;
}

}  // namespace

KernelClassifier svm_fit(const Eigen::MatrixXd& samples, std::span<const int> labels,
                         const KernelSpec& kernel, double C, const SvmOptions& options) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw ValidationError("label count does not match sample count");
  }
  if (!(C > 0.0)) throw ValidationError("SVM: C must be positive");
  if (kernel.type == KernelSpec::Type::Rbf && !(kernel.gamma > 0.0)) {
    throw ValidationError("SVM: gamma must be positive for the RBF kernel");
  }

  KernelClassifier model;
  model.kernel = kernel;
  model.C = C;
  model.classes.assign(labels.begin(), labels.end());
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()),
                      model.classes.end());
  if (model.classes.size() < 2) throw ValidationError("SVM needs at least 2 classes");

  const Eigen::MatrixXd full = kernel.gram(samples, samples);

  const auto n_classes = static_cast<int>(model.classes.size());
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      std::vector<Eigen::Index> idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == model.classes[static_cast<std::size_t>(a)] ||
            labels[i] == model.classes[static_cast<std::size_t>(b)]) {
          idx.push_back(static_cast<Eigen::Index>(i));
        }
      }
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd K(m, m);
      Eigen::VectorXd y(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        y(r) = labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])] ==
                       model.classes[static_cast<std::size_t>(a)]
                   ? 1.0
                   : -1.0;
        for (Eigen::Index c = 0; c < m; ++c) {
          K(r, c) = full(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
        }
      }
      K.diagonal().array() += options.diagonal_jitter;

      const BinarySolution sol = solve_binary(K, y, C, options);

      BinaryMachine machine;
      machine.positive_class = a;
      machine.negative_class = b;
      machine.rho = sol.rho;
      machine.iterations = sol.iterations;
      std::vector<Eigen::Index> sv;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (sol.alpha(r) > 0.0) sv.push_back(r);
      }
      const auto n_sv = static_cast<Eigen::Index>(sv.size());
      machine.support_vectors.resize(n_sv, samples.cols());
      machine.coefficients.resize(n_sv);
      machine.alphas.resize(n_sv);
      for (Eigen::Index s = 0; s < n_sv; ++s) {
        const Eigen::Index r = sv[static_cast<std::size_t>(s)];
        const Eigen::Index src = idx[static_cast<std::size_t>(r)];
        machine.support_vectors.row(s) = samples.row(src);
        machine.alphas(s) = sol.alpha(r);
        machine.coefficients(s) = sol.alpha(r) * y(r);
        machine.support_indices.push_back(static_cast<std::size_t>(src));
      }
      model.machines.push_back(std::move(machine));
    }
  }
  return model;
}

Eigen::MatrixXd KernelClassifier::decision_values(const Eigen::MatrixXd& samples) const {
  Eigen::MatrixXd out(samples.rows(), static_cast<Eigen::Index>(machines.size()));
  for (std::size_t m = 0; m < machines.size(); ++m) {
    const auto& machine = machines[m];
    if (machine.support_vectors.rows() == 0) {
      out.col(static_cast<Eigen::Index>(m)).setConstant(-machine.rho);
      continue;
    }
    const Eigen::MatrixXd k = kernel.gram(samples, machine.support_vectors);
    out.col(static_cast<Eigen::Index>(m)) =
        (k * machine.coefficients).array() - machine.rho;
  }
  return out;
}

std::vector<int> KernelClassifier::predict(const Eigen::MatrixXd& samples) const {
  const Eigen::MatrixXd dv = decision_values(samples);
  std::vector<int> out(static_cast<std::size_t>(samples.rows()));
  std::vector<int> votes(classes.size());
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t m = 0; m < machines.size(); ++m) {
      const auto& machine = machines[m];
      ++votes[static_cast<std::size_t>(dv(r, static_cast<Eigen::Index>(m)) > 0.0
                                           ? machine.positive_class
                                           : machine.negative_class)];
    }
    // max_element returns the first maximum: the lowest class index wins ties.
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    out[static_cast<std::size_t>(r)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

int KernelClassifier::predict(const Eigen::VectorXd& x) const {
  return predict(Eigen::MatrixXd(x.transpose())).front();
}

}  // namespace mindtrace
