#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast::model {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double log1pexp(double z) {
  if (z > 30) return z;
  if (z < -30) return std::exp(z);
  return std::log1p(std::exp(z));
}

// Average precision (step-wise PR area) with tied scores processed as one
// group. Requires at least one positive.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<double>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double total_pos = 0;
  for (double l : labels) total_pos += l != 0.0 ? 1.0 : 0.0;
  if (total_pos == 0) return 0.0;
  double tp = 0, fp = 0, ap = 0, prev_tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k)
      (labels[order[k]] != 0.0 ? tp : fp) += 1.0;
    if (tp > prev_tp) {
      double precision = tp / (tp + fp);
      ap += precision * (tp - prev_tp) / total_pos;
      prev_tp = tp;
    }
    i = j;
  }
  return ap;
}

// Forward-chained time-ordered CV: fold i trains on the first i blocks and
// validates on block i+1 (rows must already be in time order).
struct FoldSpan {
  std::size_t train_end;
  std::size_t val_end;
};

inline std::vector<FoldSpan> forward_chained_folds(std::size_t n, int folds) {
  std::vector<FoldSpan> out;
  std::size_t blocks = static_cast<std::size_t>(folds) + 1;
  for (int i = 1; i <= folds; ++i) {
    std::size_t train_end = n * static_cast<std::size_t>(i) / blocks;
    std::size_t val_end = n * static_cast<std::size_t>(i + 1) / blocks;
    if (train_end == 0 || val_end <= train_end) continue;
    out.push_back({train_end, val_end});
  }
  return out;
}

// ---------------------------------------------------------------------------
// L1-penalized logistic regression via proximal gradient (ISTA with
// backtracking). The intercept is unpenalized.
// ---------------------------------------------------------------------------

struct L1Fit {
  Eigen::VectorXd w;
  double b = 0;
  int iterations = 0;
};

inline L1Fit fit_l1_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             double lambda, int max_iter = 2000,
                             double rel_tol = 1e-9) {
  const auto n = X.rows();
  const auto d = X.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0;

  auto smooth_loss = [&](const Eigen::VectorXd& wv, double bv) {
    Eigen::VectorXd z = X * wv;
    z.array() += bv;
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += log1pexp(z(i)) - y(i) * z(i);
    return s / static_cast<double>(n);
  };
  auto objective = [&](const Eigen::VectorXd& wv, double bv) {
    return smooth_loss(wv, bv) + lambda * wv.cwiseAbs().sum();
  };

  double step = 1.0;
  double obj = objective(w, b);
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd z = X * w;
    z.array() += b;
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(z(i));
    Eigen::VectorXd resid = p - y;
    Eigen::VectorXd gw = X.transpose() * resid / static_cast<double>(n);
    double gb = resid.sum() / static_cast<double>(n);
    double f0 = smooth_loss(w, b);

    Eigen::VectorXd w_new;
    double b_new = 0;
    for (;;) {
      w_new = w - step * gw;
      for (Eigen::Index j = 0; j < d; ++j) {
        double t = lambda * step;
        w_new(j) = w_new(j) > t ? w_new(j) - t
                                : (w_new(j) < -t ? w_new(j) + t : 0.0);
      }
      b_new = b - step * gb;
      Eigen::VectorXd dw = w_new - w;
      double db = b_new - b;
      double quad = f0 + gw.dot(dw) + gb * db +
                    (dw.squaredNorm() + db * db) / (2.0 * step);
      if (smooth_loss(w_new, b_new) <= quad + 1e-15) break;
      step *= 0.5;
      if (step < 1e-12) break;
    }
    double obj_new = objective(w_new, b_new);
    w = std::move(w_new);
    b = b_new;
    if (std::abs(obj - obj_new) <= rel_tol * std::max(1.0, std::abs(obj))) {
      obj = obj_new;
      break;
    }
    obj = obj_new;
    step = std::min(step * 2.0, 1.0);  // allow recovery after backtracking
  }
  return {w, b, it};
}

struct L1SelectionResult {
  std::vector<int> selected;  // column indices, ascending
  double lambda = 0;
  double cv_score = 0;
};

namespace detail {

inline std::vector<int> nonzero_columns(const Eigen::VectorXd& w,
                                        double tol = 1e-8) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (std::abs(w(j)) > tol) idx.push_back(static_cast<int>(j));
  return idx;
}

}  // namespace detail

// L1 feature selection: lambda picked by forward-chained CV on average
// precision, then bisected so the support lands on `target_count` features
// (a tie in support size keeps the CV winner's direction). When bisection
// jumps past the target the largest-magnitude coefficients are kept.
inline L1SelectionResult fit_l1_selection(const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& y,
                                          const std::vector<double>& lambda_grid,
                                          int folds = 3, int target_count = 8) {
  double pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) != 0.0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("labels are single-class");

  auto spans = forward_chained_folds(static_cast<std::size_t>(X.rows()), folds);
  double best_score = -1, best_lambda = lambda_grid.front();
  for (double lambda : lambda_grid) {
    double score_sum = 0;
    int used = 0;
    for (const auto& s : spans) {
      Eigen::MatrixXd Xtr = X.topRows(static_cast<Eigen::Index>(s.train_end));
      Eigen::VectorXd ytr = y.head(static_cast<Eigen::Index>(s.train_end));
      double fold_pos = ytr.sum();
      if (fold_pos == 0 || fold_pos == static_cast<double>(ytr.size())) continue;
      L1Fit fit = fit_l1_logistic(Xtr, ytr, lambda);
      std::vector<double> scores, labels;
      for (std::size_t i = s.train_end; i < s.val_end; ++i) {
        Eigen::Index r = static_cast<Eigen::Index>(i);
        scores.push_back(X.row(r).dot(fit.w) + fit.b);
        labels.push_back(y(r));
      }
      score_sum += average_precision(scores, labels);
      ++used;
    }
    double score = used ? score_sum / used : 0.0;
    if (score > best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }

  auto support_at = [&](double lambda) {
    L1Fit fit = fit_l1_logistic(X, y, lambda);
    return std::pair<std::vector<int>, Eigen::VectorXd>(
        detail::nonzero_columns(fit.w), fit.w);
  };

  auto [sel, w] = support_at(best_lambda);
  double lambda = best_lambda;
  if (static_cast<int>(sel.size()) != target_count) {
    // Support size decreases as lambda grows; bracket then bisect.
    double lo = best_lambda, hi = best_lambda;
    if (static_cast<int>(sel.size()) > target_count) {
      hi = best_lambda;
      while (static_cast<int>(support_at(hi).first.size()) > target_count &&
             hi < 1e6)
        hi *= 4.0;
      lo = hi / 4.0;
    } else {
      lo = best_lambda;
      while (static_cast<int>(support_at(lo).first.size()) < target_count &&
             lo > 1e-12)
        lo /= 4.0;
      hi = lo * 4.0;
    }
    for (int it = 0; it < 60; ++it) {
      double mid = std::sqrt(lo * hi);  // bisect on the log scale
      auto [s_mid, w_mid] = support_at(mid);
      if (static_cast<int>(s_mid.size()) == target_count) {
        sel = s_mid;
        w = w_mid;
        lambda = mid;
        break;
      }
      if (static_cast<int>(s_mid.size()) > target_count)
        lo = mid;
      else
        hi = mid;
      sel = s_mid;
      w = w_mid;
      lambda = mid;
    }
    if (static_cast<int>(sel.size()) > target_count) {
      std::sort(sel.begin(), sel.end(), [&](int a, int b) {
        return std::abs(w(a)) > std::abs(w(b)) ||
               (std::abs(w(a)) == std::abs(w(b)) && a < b);
      });
      sel.resize(static_cast<std::size_t>(target_count));
      std::sort(sel.begin(), sel.end());
    }
  }
  return {sel, lambda, best_score};
}

// ---------------------------------------------------------------------------
// L2 logistic gate
// ---------------------------------------------------------------------------

struct LogisticGate {
  std::vector<std::string> selected;  // feature names, in model order
  Eigen::VectorXd w;
  double b = 0;
  double C = 1.0;              // inverse regularization strength
  double class_weight_neg = 1;
  double class_weight_pos = 5;
  double tau = 0.70;
};

struct GateDiagnostics {
  int iterations = 0;
  double grad_norm = 0;
};

// Weighted cross-entropy + ||w||^2/(2C), Newton iterations to gradient norm
// < 1e-6. Throws on non-convergence with the diagnostics in the message.
inline Eigen::VectorXd fit_l2_logistic(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y, double C,
                                       double w_neg, double w_pos,
                                       GateDiagnostics* diag = nullptr,
                                       int max_iter = 200) {
  const auto n = X.rows();
  const auto d = X.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);  // [w; b]
  Eigen::VectorXd sample_w(n);
  for (Eigen::Index i = 0; i < n; ++i)
    sample_w(i) = y(i) != 0.0 ? w_pos : w_neg;

  auto objective = [&](const Eigen::VectorXd& th) {
    double obj = th.head(d).squaredNorm() / (2.0 * C);
    for (Eigen::Index i = 0; i < n; ++i) {
      double z = X.row(i).dot(th.head(d)) + th(d);
      obj += sample_w(i) * (log1pexp(z) - y(i) * z);
    }
    return obj;
  };

  double gnorm = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd z = X * theta.head(d);
    z.array() += theta(d);
    Eigen::VectorXd p(n), r(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      r(i) = sample_w(i) * (p(i) - y(i));
      h(i) = std::max(sample_w(i) * p(i) * (1 - p(i)), 1e-12);
    }
    Eigen::VectorXd grad(d + 1);
    grad.head(d) = X.transpose() * r + theta.head(d) / C;
    grad(d) = r.sum();
    gnorm = grad.norm();
    if (gnorm < 1e-6) break;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d + 1, d + 1);
    H.topLeftCorner(d, d) = X.transpose() * h.asDiagonal() * X;
    H.topLeftCorner(d, d).diagonal().array() += 1.0 / C;
    Eigen::VectorXd Xh = X.transpose() * h;
    H.block(0, d, d, 1) = Xh;
    H.block(d, 0, 1, d) = Xh.transpose();
    H(d, d) = h.sum();
    Eigen::VectorXd delta = H.ldlt().solve(grad);

    double f0 = objective(theta);
    double t = 1.0;
    while (t > 1e-12 && objective(theta - t * delta) > f0 - 1e-4 * t * grad.dot(delta))
      t *= 0.5;
    theta -= t * delta;
  }
  if (diag) {
    diag->iterations = it;
    diag->grad_norm = gnorm;
  }
  if (gnorm >= 1e-6)
    throw std::runtime_error("gate fit did not converge: grad norm " +
                             std::to_string(gnorm) + " after " +
                             std::to_string(it) + " iterations");
  return theta;
}

// Final gate: C chosen on the same forward-chained CV (average precision at
// the class-weighted fit), tau supplied by the caller.
inline LogisticGate fit_l2_gate(const Eigen::MatrixXd& X_sel,
                                const Eigen::VectorXd& y,
                                const std::vector<std::string>& names,
                                double w_neg = 1.0, double w_pos = 5.0,
                                const std::vector<double>& c_grid = {1e-3, 1e-2,
                                                                     1e-1, 1.0},
                                int folds = 3, double tau = 0.70) {
  auto spans = forward_chained_folds(static_cast<std::size_t>(X_sel.rows()),
                                     folds);
  double best_score = -1;
  double best_c = c_grid.front();
  for (double C : c_grid) {
    double score_sum = 0;
    int used = 0;
    for (const auto& s : spans) {
      Eigen::MatrixXd Xtr = X_sel.topRows(static_cast<Eigen::Index>(s.train_end));
      Eigen::VectorXd ytr = y.head(static_cast<Eigen::Index>(s.train_end));
      double fold_pos = ytr.sum();
      if (fold_pos == 0 || fold_pos == static_cast<double>(ytr.size())) continue;
      Eigen::VectorXd theta;
      try {
        theta = fit_l2_logistic(Xtr, ytr, C, w_neg, w_pos);
      } catch (const std::exception&) {
        continue;
      }
      std::vector<double> scores, labels;
      for (std::size_t i = s.train_end; i < s.val_end; ++i) {
        Eigen::Index r = static_cast<Eigen::Index>(i);
        scores.push_back(X_sel.row(r).dot(theta.head(X_sel.cols())) +
                         theta(X_sel.cols()));
        labels.push_back(y(r));
      }
      score_sum += average_precision(scores, labels);
      ++used;
    }
    double score = used ? score_sum / used : 0.0;
    if (score > best_score) {
      best_score = score;
      best_c = C;
    }
  }
  Eigen::VectorXd theta = fit_l2_logistic(X_sel, y, best_c, w_neg, w_pos);
  LogisticGate gate;
  gate.selected = names;
  gate.w = theta.head(X_sel.cols());
  gate.b = theta(X_sel.cols());
  gate.C = best_c;
  gate.class_weight_neg = w_neg;
  gate.class_weight_pos = w_pos;
  gate.tau = tau;
  return gate;
}

struct GatePrediction {
  std::vector<double> probability;  // NaN for rejected rows
  std::vector<bool> pass;
  std::vector<std::string> rejected_reasons;  // empty string when accepted
  double pass_rate = 0;                       // over non-rejected rows
};

// sigma(w.x + b) with pass at p >= tau. Rows missing a selected feature are
// rejected with the offending feature named.
template <typename RowAccess>
GatePrediction gate_predict_rows(const LogisticGate& gate, std::size_t n_rows,
                                 RowAccess&& value_at) {
  GatePrediction out;
  out.probability.assign(n_rows, kMissing);
  out.pass.assign(n_rows, false);
  out.rejected_reasons.assign(n_rows, "");
  std::size_t scored = 0, passed = 0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    double z = gate.b;
    bool ok = true;
    for (std::size_t j = 0; j < gate.selected.size(); ++j) {
      double v = value_at(r, j);
      if (is_missing(v)) {
        out.rejected_reasons[r] = "missing feature " + gate.selected[j];
        ok = false;
        break;
      }
      z += gate.w(static_cast<Eigen::Index>(j)) * v;
    }
    if (!ok) continue;
    double p = sigmoid(z);
    out.probability[r] = p;
    out.pass[r] = p >= gate.tau;
    ++scored;
    if (out.pass[r]) ++passed;
  }
  out.pass_rate = scored ? static_cast<double>(passed) / scored : 0.0;
  return out;
}

}  // namespace stormcast::model
