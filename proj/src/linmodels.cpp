#include "survkit/linmodels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "survkit/errors.hpp"

namespace survkit::linmodels {

namespace {

// Subjects grouped by distinct time, descending, so a single sweep can grow
// the risk-set accumulators incrementally.
struct TimeGroup {
  double time = 0;
  std::vector<int> members;  // row indices
  std::vector<int> deaths;   // subset of members with event = true
};

std::vector<TimeGroup> group_by_time_descending(std::span<const SurvivalOutcome> outcomes) {
  std::vector<int> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return outcomes[static_cast<std::size_t>(a)].time_days > outcomes[static_cast<std::size_t>(b)].time_days;
  });
  std::vector<TimeGroup> groups;
  for (int idx : order) {
    const auto& o = outcomes[static_cast<std::size_t>(idx)];
    if (groups.empty() || groups.back().time != o.time_days) {
      groups.push_back({o.time_days, {}, {}});
    }
    groups.back().members.push_back(idx);
    if (o.event) groups.back().deaths.push_back(idx);
  }
  return groups;
}

void check_dimensions(const Eigen::MatrixXd& X, std::span<const SurvivalOutcome> outcomes) {
  if (static_cast<std::size_t>(X.rows()) != outcomes.size()) {
    throw std::invalid_argument("design matrix rows and outcome count differ");
  }
  if (X.rows() == 0) raise(ErrorCode::EmptyCohort, "no rows in design matrix");
  bool any_event = false;
  for (const auto& o : outcomes) any_event = any_event || o.event;
  if (!any_event) raise(ErrorCode::NoEvents, "partial likelihood undefined without events");
}

struct Standardization {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;  // population sd
};

Standardization standardize_in_place(Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  const auto n = static_cast<double>(X.rows());
  Standardization s;
  s.means = X.colwise().mean().transpose();
  X.rowwise() -= s.means.transpose();
  s.scales = (X.array().square().colwise().sum() / n).sqrt().matrix().transpose();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (s.scales[j] <= 0) {
      raise(ErrorCode::DegenerateColumn, "column '" + names[static_cast<std::size_t>(j)] +
                                             "' is constant; cannot standardize");
    }
    X.col(j) /= s.scales[j];
  }
  return s;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double soft_threshold(double u, double gamma) {
  if (u > gamma) return u - gamma;
  if (u < -gamma) return u + gamma;
  return 0.0;
}

double elastic_net_penalty(const Eigen::VectorXd& beta, double lambda, double alpha) {
  return lambda * (alpha * beta.lpNorm<1>() + 0.5 * (1.0 - alpha) * beta.squaredNorm());
}

double kkt_residual_from_gradient(const Eigen::VectorXd& mean_gradient, const Eigen::VectorXd& beta,
                                  double lambda, double alpha) {
  double worst = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    double r = 0;
    if (beta[j] != 0.0) {
      r = std::abs(mean_gradient[j] + lambda * (1.0 - alpha) * beta[j] +
                   lambda * alpha * (beta[j] > 0 ? 1.0 : -1.0));
    } else {
      r = std::max(0.0, std::abs(mean_gradient[j]) - lambda * alpha);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

StepFunction breslow_cumulative_hazard(const Eigen::VectorXd& eta,
                                       std::span<const SurvivalOutcome> outcomes) {
  if (static_cast<std::size_t>(eta.size()) != outcomes.size()) {
    throw std::invalid_argument("linear predictor length and outcome count differ");
  }
  const auto groups = group_by_time_descending(outcomes);
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;
  double s0 = 0;
  std::vector<double> times;
  std::vector<double> increments;
  for (const auto& g : groups) {
    for (int i : g.members) s0 += std::exp(eta[i] - shift);
    if (g.deaths.empty()) continue;
    times.push_back(g.time);
    increments.push_back(static_cast<double>(g.deaths.size()) / (s0 * std::exp(shift)));
  }
  std::reverse(times.begin(), times.end());
  std::reverse(increments.begin(), increments.end());
  std::vector<double> cumulative(increments.size());
  std::partial_sum(increments.begin(), increments.end(), cumulative.begin());
  return StepFunction(std::move(times), std::move(cumulative), 0.0);
}

Eigen::MatrixXd to_eigen(const FeatureMatrix& matrix) {
  Eigen::MatrixXd X(matrix.n_rows(), matrix.n_cols());
  for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
    for (std::size_t j = 0; j < matrix.n_cols(); ++j) {
      const double v = matrix.at(i, j);
      if (FeatureMatrix::is_missing(v)) {
        raise(ErrorCode::IncompleteMatrix, "missing cell at subject '" + matrix.subject_ids()[i] +
                                               "', column '" + matrix.column_names()[j] +
                                               "'; impute before fitting");
      }
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return X;
}

PartialLikelihood neg_log_partial_likelihood(const Eigen::MatrixXd& X,
                                             std::span<const SurvivalOutcome> outcomes,
                                             const Eigen::VectorXd& beta, HessianMode mode) {
  check_dimensions(X, outcomes);
  if (beta.size() != X.cols()) throw std::invalid_argument("beta length and column count differ");
  if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");

  const Eigen::Index p = X.cols();
  Eigen::VectorXd eta = X * beta;
  // A global shift keeps every exp() in (0, 1]; it cancels exactly in the
  // value because each event contributes one log term and one eta term.
  const double shift = eta.maxCoeff();
  Eigen::VectorXd w = (eta.array() - shift).exp();

  PartialLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(p);
  if (mode == HessianMode::diagonal) out.hessian_diag = Eigen::VectorXd::Zero(p);
  if (mode == HessianMode::full) out.hessian = Eigen::MatrixXd::Zero(p, p);

  double s0 = 0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd s2_diag = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2;
  Eigen::MatrixXd term;
  if (mode == HessianMode::full) {
    s2 = Eigen::MatrixXd::Zero(p, p);
    term.resize(p, p);
  }

  double value = 0;
  for (const auto& g : group_by_time_descending(outcomes)) {
    for (int i : g.members) {
      // Concrete scaled rows keep the scalar sequence (w*x_j)*x_k identical
      // across modes, so the diagonal mode agrees with the full one bit for
      // bit (lazy products would regroup the scalar).
      const Eigen::VectorXd xi = X.row(i).transpose();
      const Eigen::VectorXd wx = w[i] * xi;
      s0 += w[i];
      s1 += wx;
      if (mode == HessianMode::diagonal) {
        s2_diag += wx.cwiseProduct(xi);
      } else if (mode == HessianMode::full) {
        s2.noalias() += wx * xi.transpose();
      }
    }
    const auto d = static_cast<double>(g.deaths.size());
    if (d == 0) continue;

    double d0 = 0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd d2_diag = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2;
    if (mode == HessianMode::full) d2 = Eigen::MatrixXd::Zero(p, p);
    for (int i : g.deaths) {
      const Eigen::VectorXd xi = X.row(i).transpose();
      const Eigen::VectorXd wx = w[i] * xi;
      value -= (eta[i] - shift);
      out.gradient -= xi;
      d0 += w[i];
      d1 += wx;
      if (mode == HessianMode::diagonal) {
        d2_diag += wx.cwiseProduct(xi);
      } else if (mode == HessianMode::full) {
        d2.noalias() += wx * xi.transpose();
      }
    }
    for (double l = 0; l < d; ++l) {
      const double f = l / d;
      const double phi = s0 - f * d0;
      value += std::log(phi);
      const Eigen::VectorXd mu = (s1 - f * d1) / phi;
      out.gradient += mu;
      if (mode == HessianMode::diagonal) {
        out.hessian_diag += (s2_diag - f * d2_diag) / phi - mu.array().square().matrix();
      } else if (mode == HessianMode::full) {
        // Build the whole term before adding it: a lazy `+= A - mu*mu^T`
        // splits into two accumulator updates, which rounds differently from
        // the diagonal mode's single update per entry.
        term = (s2 - f * d2) / phi;
        term.noalias() -= mu * mu.transpose();
        out.hessian += term;
      }
    }
  }
  out.value = value;
  return out;
}

CoxModel cox_fit(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                 const CoxFitOptions& options) {
  Eigen::MatrixXd X = to_eigen(matrix);
  check_dimensions(X, outcomes);
  if (X.cols() == 0) raise(ErrorCode::DegenerateColumn, "design matrix has no columns");
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (X.col(j).minCoeff() == X.col(j).maxCoeff()) {
      raise(ErrorCode::DegenerateColumn,
            "column '" + matrix.column_names()[static_cast<std::size_t>(j)] + "' is constant");
    }
  }

  CoxModel model;
  model.feature_names = matrix.column_names();
  model.feature_means = X.colwise().mean().transpose();
  X.rowwise() -= model.feature_means.transpose();

  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  PartialLikelihood pl = neg_log_partial_likelihood(X, outcomes, beta, HessianMode::full);

  const auto raise_separation = [&](Eigen::Index column, const std::string& what) {
    raise(ErrorCode::Separation, "coefficient for '" +
                                     model.feature_names[static_cast<std::size_t>(column)] + "' " +
                                     what + "; a covariate separates events from censorings");
  };

  constexpr double kEpsilon = std::numeric_limits<double>::epsilon();
  bool converged = false;
  for (int iter = 1; iter <= options.max_iter && !converged; ++iter) {
    Eigen::VectorXd direction = Eigen::VectorXd::Zero(p);
    bool descent = false;
    double ridge = 0;
    for (int attempt = 0; attempt < 8 && !descent; ++attempt) {
      Eigen::MatrixXd H = pl.hessian;
      if (ridge > 0) H.diagonal().array() += ridge;
      direction = H.ldlt().solve(-pl.gradient);
      descent = direction.allFinite() && pl.gradient.dot(direction) < 0;
      ridge = ridge == 0 ? 1e-8 * (1.0 + pl.hessian.diagonal().cwiseAbs().maxCoeff()) : ridge * 100;
    }

    // A stationary point must pin beta down: tiny gradient AND a collapsed
    // Newton step. A tiny gradient with a unit-size step is the signature of
    // a monotone likelihood plateau, and iteration must continue until a
    // divergence guard trips.
    if (pl.gradient.lpNorm<Eigen::Infinity>() <= options.tol) {
      if (direction.allFinite() &&
          direction.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
        converged = true;
        break;
      }
    }
    if (!descent) raise(ErrorCode::NotConverged, "no usable descent direction");

    const double slope = pl.gradient.dot(direction);
    double step = 1.0;
    PartialLikelihood next;
    if (std::abs(slope) <= 64 * kEpsilon * (1.0 + std::abs(pl.value))) {
      // The predicted decrease is below the objective's resolution; a value
      // comparison would reject progress spuriously. Trust the Newton step.
      next = neg_log_partial_likelihood(X, outcomes, beta + direction, HessianMode::full);
    } else {
      bool accepted = false;
      for (int halving = 0; halving < 40 && !accepted; ++halving) {
        next = neg_log_partial_likelihood(X, outcomes, beta + step * direction, HessianMode::full);
        if (next.value <= pl.value + 1e-4 * step * slope) accepted = true;
        else step /= 2;
      }
      if (!accepted) raise(ErrorCode::NotConverged, "line search failed to reduce the objective");
    }

    beta += step * direction;
    pl = std::move(next);
    model.iterations = iter;

    if (beta.lpNorm<Eigen::Infinity>() > options.divergence_bound) {
      Eigen::Index worst = 0;
      beta.cwiseAbs().maxCoeff(&worst);
      raise_separation(worst, "diverged beyond " + std::to_string(options.divergence_bound));
    }
    // Scale-free guard: a linear-predictor spread this wide means hazard
    // ratios beyond exp(30) between cohort members, and the likelihood is
    // numerically flat long before the coefficient bound can trip.
    const Eigen::VectorXd eta = X * beta;
    if (eta.maxCoeff() - eta.minCoeff() > 30.0) {
      Eigen::Index worst = 0;
      beta.cwiseAbs().maxCoeff(&worst);
      raise_separation(worst, "drove the linear predictor spread beyond 30");
    }
  }

  model.final_gradient_norm = pl.gradient.lpNorm<Eigen::Infinity>();
  if (!converged) {
    raise(ErrorCode::NotConverged, "gradient norm " + std::to_string(model.final_gradient_norm) +
                                       " after " + std::to_string(model.iterations) + " iterations");
  }
  model.coefficients = beta;
  model.baseline_hazard = breslow_cumulative_hazard(X * beta, outcomes);
  return model;
}

double cox_linear_predictor(const CoxModel& model, const Eigen::VectorXd& row) {
  if (row.size() != model.coefficients.size()) {
    throw std::invalid_argument("row length and coefficient count differ");
  }
  return model.coefficients.dot(row - model.feature_means);
}

double cox_predict_survival(const CoxModel& model, const Eigen::VectorXd& row, double horizon_days) {
  return std::exp(-model.baseline_hazard(horizon_days) * std::exp(cox_linear_predictor(model, row)));
}

double elastic_net_kkt_residual(const Eigen::MatrixXd& X_std,
                                std::span<const SurvivalOutcome> outcomes,
                                const Eigen::VectorXd& beta_std, double lambda, double alpha) {
  const auto pl = neg_log_partial_likelihood(X_std, outcomes, beta_std, HessianMode::none);
  const Eigen::VectorXd g = pl.gradient / static_cast<double>(X_std.rows());
  return kkt_residual_from_gradient(g, beta_std, lambda, alpha);
}

PenalizedCoxPath elastic_net_cox_fit(const FeatureMatrix& matrix,
                                     std::span<const SurvivalOutcome> outcomes, double alpha,
                                     const std::vector<double>& lambda_grid) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  Eigen::MatrixXd X = to_eigen(matrix);
  check_dimensions(X, outcomes);
  if (X.cols() == 0) raise(ErrorCode::DegenerateColumn, "design matrix has no columns");
  const auto n = static_cast<double>(X.rows());
  const Eigen::Index p = X.cols();

  PenalizedCoxPath path;
  path.alpha = alpha;
  path.feature_names = matrix.column_names();
  const Standardization std_info = standardize_in_place(X, matrix.column_names());
  path.feature_means = std_info.means;
  path.feature_scales = std_info.scales;

  const Eigen::VectorXd g0 =
      neg_log_partial_likelihood(X, outcomes, Eigen::VectorXd::Zero(p), HessianMode::none).gradient / n;
  // The alpha floor keeps lambda_max finite for pure ridge.
  path.lambda_max = g0.lpNorm<Eigen::Infinity>() / std::max(alpha, 0.001);
  if (!(path.lambda_max > 0)) {
    raise(ErrorCode::DegenerateColumn, "gradient vanishes at beta = 0; no penalty path exists");
  }

  if (lambda_grid.empty()) {
    const int n_points = 100;
    const double log_top = std::log(path.lambda_max);
    const double log_bottom = std::log(0.001 * path.lambda_max);
    for (int k = 0; k < n_points; ++k) {
      const double frac = static_cast<double>(k) / (n_points - 1);
      path.lambdas.push_back(std::exp(log_top + frac * (log_bottom - log_top)));
    }
  } else {
    path.lambdas = lambda_grid;
    for (double l : path.lambdas) {
      if (!(l > 0) || !std::isfinite(l)) throw std::invalid_argument("lambda values must be positive");
    }
    std::sort(path.lambdas.begin(), path.lambdas.end(), std::greater<>());
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);  // warm start carrier
  for (double lambda : path.lambdas) {
    const double gamma = lambda * alpha;
    double certified = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < 100; ++outer) {
      const auto pl = neg_log_partial_likelihood(X, outcomes, beta, HessianMode::full);
      const Eigen::VectorXd g = pl.gradient / n;
      certified = kkt_residual_from_gradient(g, beta, lambda, alpha);
      if (certified <= 1e-6) break;

      const Eigen::MatrixXd H = pl.hessian / n;
      // Coordinate descent on the penalized quadratic model around beta.
      Eigen::VectorXd z = beta;
      for (int sweep = 0; sweep < 10000; ++sweep) {
        double max_move = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
          const double denom = H(j, j) + lambda * (1.0 - alpha);
          if (denom <= 1e-12) continue;
          const double c = g[j] + H.row(j).dot(z - beta) - H(j, j) * z[j];
          const double updated = soft_threshold(-c, gamma) / denom;
          max_move = std::max(max_move, std::abs(updated - z[j]));
          z[j] = updated;
        }
        if (max_move <= 1e-11 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) break;
      }

      const Eigen::VectorXd direction = z - beta;
      if (direction.lpNorm<Eigen::Infinity>() <= 1e-14) break;

      const double current = pl.value / n + elastic_net_penalty(beta, lambda, alpha);
      const double decrement =
          g.dot(direction) + elastic_net_penalty(z, lambda, alpha) - elastic_net_penalty(beta, lambda, alpha);
      double step = 1.0;
      bool accepted = false;
      for (int halving = 0; halving < 50 && !accepted; ++halving) {
        const Eigen::VectorXd candidate = beta + step * direction;
        const double value =
            neg_log_partial_likelihood(X, outcomes, candidate, HessianMode::none).value / n +
            elastic_net_penalty(candidate, lambda, alpha);
        if (value <= current + 1e-4 * step * decrement) {
          beta = candidate;
          accepted = true;
        } else {
          step /= 2;
        }
      }
      if (!accepted) break;  // at the numerical floor; certification below decides
    }

    certified = elastic_net_kkt_residual(X, outcomes, beta, lambda, alpha);
    if (certified > 1e-4) {
      raise(ErrorCode::NonConvergenceAtLambda,
            "KKT residual " + std::to_string(certified) + " at lambda " + std::to_string(lambda));
    }
    path.coefficients_std.push_back(beta);
    path.coefficients.push_back(beta.cwiseQuotient(std_info.scales));
    path.kkt_residuals.push_back(certified);
    path.n_nonzero.push_back(static_cast<int>((beta.array() != 0.0).count()));
  }
  return path;
}

BoostedCoxModel coxboost_fit(const FeatureMatrix& matrix, std::span<const SurvivalOutcome> outcomes,
                             double nu, int iterations) {
  if (!(nu > 0)) throw std::invalid_argument("nu must be positive");
  if (iterations < 0) throw std::invalid_argument("iteration count must be non-negative");
  Eigen::MatrixXd X = to_eigen(matrix);
  check_dimensions(X, outcomes);
  if (X.cols() == 0) raise(ErrorCode::DegenerateColumn, "design matrix has no columns");

  BoostedCoxModel model;
  model.feature_names = matrix.column_names();
  model.nu = nu;
  model.iterations = iterations;
  const Standardization std_info = standardize_in_place(X, matrix.column_names());
  model.feature_means = std_info.means;
  model.feature_scales = std_info.scales;

  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int m = 0; m < iterations; ++m) {
    const auto pl = neg_log_partial_likelihood(X, outcomes, beta, HessianMode::diagonal);
    const Eigen::VectorXd score = -pl.gradient;  // log-likelihood gradient
    Eigen::Index best = -1;
    double best_stat = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (pl.hessian_diag[j] <= 0) continue;
      const double stat = score[j] * score[j] / pl.hessian_diag[j];
      if (stat > best_stat) {  // strict: ties resolve to the lowest index
        best_stat = stat;
        best = j;
      }
    }
    if (best < 0) raise(ErrorCode::DegenerateColumn, "no column carries usable information");
    beta[best] += nu * score[best] / pl.hessian_diag[best];
    model.selection_log.push_back(static_cast<int>(best));
  }

  model.coefficients_std = beta;
  model.coefficients = beta.cwiseQuotient(std_info.scales);
  return model;
}

ImputeResult impute_for_linear(const FeatureMatrix& matrix, const ImputeStats* training_stats) {
  ImputeStats stats;
  if (training_stats != nullptr) {
    if (training_stats->column_names != matrix.column_names()) {
      raise(ErrorCode::MismatchedFeatureSets,
            "imputation stats were computed on a different column set");
    }
    stats = *training_stats;
  } else {
    stats.column_names = matrix.column_names();
    for (std::size_t j = 0; j < matrix.n_cols(); ++j) {
      const std::string& name = matrix.column_names()[j];
      if (name.find('=') != std::string::npos) {
        // One-hot column: an absent source value becomes an all-zero group.
        stats.fill_values.push_back(0.0);
        continue;
      }
      std::vector<double> present;
      for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
        if (!FeatureMatrix::is_missing(matrix.at(i, j))) present.push_back(matrix.at(i, j));
      }
      if (present.empty()) {
        raise(ErrorCode::AllMissingColumn, "column '" + name + "' has no present values to impute from");
      }
      stats.fill_values.push_back(median_of(std::move(present)));
    }
  }

  FeatureMatrix filled = matrix;
  for (std::size_t i = 0; i < filled.n_rows(); ++i) {
    for (std::size_t j = 0; j < filled.n_cols(); ++j) {
      if (FeatureMatrix::is_missing(filled.at(i, j))) filled.set(i, j, stats.fill_values[j]);
    }
  }
  return {std::move(filled), std::move(stats)};
}

}  // namespace survkit::linmodels
