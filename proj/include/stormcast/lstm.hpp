#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/logistic.hpp"  // sigmoid

namespace stormcast::model {

// Parameters of a single gated recurrent cell plus its affine readout.
// One step is evaluated from zero initial hidden/cell state, so the
// hidden-to-hidden matrices and the forget gate receive no gradient; they
// are kept so the cell is the standard four-gate form.
struct LstmParams {
  Eigen::MatrixXd Wi, Wf, Wg, Wo;  // hidden x input
  Eigen::MatrixXd Ui, Uf, Ug, Uo;  // hidden x hidden
  Eigen::VectorXd bi, bf, bg, bo;  // hidden
  Eigen::VectorXd w_out;           // hidden
  double b_out = 0;

  Eigen::Index hidden() const { return Wi.rows(); }
  Eigen::Index inputs() const { return Wi.cols(); }

  static LstmParams zeros(Eigen::Index n_in, Eigen::Index n_hidden) {
    LstmParams p;
    for (auto* m : {&p.Wi, &p.Wf, &p.Wg, &p.Wo})
      *m = Eigen::MatrixXd::Zero(n_hidden, n_in);
    for (auto* m : {&p.Ui, &p.Uf, &p.Ug, &p.Uo})
      *m = Eigen::MatrixXd::Zero(n_hidden, n_hidden);
    for (auto* v : {&p.bi, &p.bf, &p.bg, &p.bo})
      *v = Eigen::VectorXd::Zero(n_hidden);
    p.w_out = Eigen::VectorXd::Zero(n_hidden);
    p.b_out = 0;
    return p;
  }

  // Uniform +/- 1/sqrt(fan_in), seeded.
  static LstmParams init(Eigen::Index n_in, Eigen::Index n_hidden,
                         std::uint64_t seed) {
    LstmParams p = zeros(n_in, n_hidden);
    Rng rng(seed);
    auto fill = [&](Eigen::MatrixXd& m, double bound) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = rng.uniform(-bound, bound);
    };
    auto fillv = [&](Eigen::VectorXd& v, double bound) {
      for (Eigen::Index r = 0; r < v.size(); ++r)
        v(r) = rng.uniform(-bound, bound);
    };
    double in_bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    double hid_bound = 1.0 / std::sqrt(static_cast<double>(n_hidden));
    fill(p.Wi, in_bound);
    fill(p.Wf, in_bound);
    fill(p.Wg, in_bound);
    fill(p.Wo, in_bound);
    fill(p.Ui, hid_bound);
    fill(p.Uf, hid_bound);
    fill(p.Ug, hid_bound);
    fill(p.Uo, hid_bound);
    fillv(p.bi, in_bound);
    fillv(p.bf, in_bound);
    fillv(p.bg, in_bound);
    fillv(p.bo, in_bound);
    fillv(p.w_out, hid_bound);
    p.b_out = rng.uniform(-hid_bound, hid_bound);
    return p;
  }

  // Flat views used by the optimizer and the serializer. Order is part of
  // the bundle format: Wi Wf Wg Wo Ui Uf Ug Uo bi bf bg bo w_out b_out.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(Wi);
    fn(Wf);
    fn(Wg);
    fn(Wo);
    fn(Ui);
    fn(Uf);
    fn(Ug);
    fn(Uo);
    fn(bi);
    fn(bf);
    fn(bg);
    fn(bo);
    fn(w_out);
  }
};

struct CellCache {
  Eigen::VectorXd i, f, g, o, c, tanh_c, h;
  double yhat = 0;
};

// One step from zero state: c = i.g, h = o.tanh(c), yhat = w_out.h + b_out.
inline double cell_forward(const LstmParams& p, const Eigen::VectorXd& x,
                           CellCache* cache = nullptr) {
  if (x.size() != p.inputs())
    throw std::invalid_argument("input size " + std::to_string(x.size()) +
                                " != expected " + std::to_string(p.inputs()));
  Eigen::VectorXd zi = p.Wi * x + p.bi;
  Eigen::VectorXd zf = p.Wf * x + p.bf;
  Eigen::VectorXd zg = p.Wg * x + p.bg;
  Eigen::VectorXd zo = p.Wo * x + p.bo;
  Eigen::VectorXd i = zi.unaryExpr([](double v) { return sigmoid(v); });
  Eigen::VectorXd f = zf.unaryExpr([](double v) { return sigmoid(v); });
  Eigen::VectorXd g = zg.array().tanh();
  Eigen::VectorXd o = zo.unaryExpr([](double v) { return sigmoid(v); });
  Eigen::VectorXd c = i.cwiseProduct(g);
  Eigen::VectorXd tc = c.array().tanh();
  Eigen::VectorXd h = o.cwiseProduct(tc);
  double yhat = p.w_out.dot(h) + p.b_out;
  if (cache) *cache = {i, f, g, o, c, tc, h, yhat};
  return yhat;
}

struct LstmGradients {
  LstmParams g;  // same shapes, gradient per tensor

  explicit LstmGradients(const LstmParams& like)
      : g(LstmParams::zeros(like.inputs(), like.hidden())) {}
};

// Accumulates d(yhat - target)^2 / d(params) into grads. Returns the
// squared error for this sample.
inline double cell_backward(const LstmParams& p, const Eigen::VectorXd& x,
                            double target, LstmGradients& grads) {
  CellCache cc;
  cell_forward(p, x, &cc);
  double err = cc.yhat - target;
  double dy = 2.0 * err;

  grads.g.w_out += dy * cc.h;
  grads.g.b_out += dy;
  Eigen::VectorXd dh = dy * p.w_out;

  Eigen::VectorXd d_o = dh.cwiseProduct(cc.tanh_c);
  Eigen::VectorXd dc = dh.cwiseProduct(cc.o).cwiseProduct(
      (1.0 - cc.tanh_c.array().square()).matrix());
  Eigen::VectorXd di = dc.cwiseProduct(cc.g);
  Eigen::VectorXd dg = dc.cwiseProduct(cc.i);
  // Forget gate multiplies the zero initial cell state: no gradient.

  Eigen::VectorXd dzi =
      di.cwiseProduct(cc.i).cwiseProduct((1.0 - cc.i.array()).matrix());
  Eigen::VectorXd dzg = dg.cwiseProduct((1.0 - cc.g.array().square()).matrix());
  Eigen::VectorXd dzo =
      d_o.cwiseProduct(cc.o).cwiseProduct((1.0 - cc.o.array()).matrix());

  grads.g.Wi += dzi * x.transpose();
  grads.g.Wg += dzg * x.transpose();
  grads.g.Wo += dzo * x.transpose();
  grads.g.bi += dzi;
  grads.g.bg += dzg;
  grads.g.bo += dzo;
  return err * err;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 2;
  double val_fraction = 0.10;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int hidden = 16;
};

struct RecurrentRegressor {
  std::vector<std::string> input_features;
  LstmParams params;
  TrainConfig config;

  double predict(const Eigen::VectorXd& x) const {
    return cell_forward(params, x);
  }
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_mse = 0;
  double final_train_mse = 0;
};

namespace detail {

class Adam {
 public:
  Adam(const LstmParams& like, const TrainConfig& cfg)
      : cfg_(cfg), m_(LstmParams::zeros(like.inputs(), like.hidden())),
        v_(LstmParams::zeros(like.inputs(), like.hidden())) {}

  void step(LstmParams& p, const LstmParams& grad) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    auto update = [&](Eigen::MatrixXd& theta, const Eigen::MatrixXd& g,
                      Eigen::MatrixXd& m, Eigen::MatrixXd& v) {
      m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * g;
      v = cfg_.adam_beta2 * v.array().matrix() +
          (1.0 - cfg_.adam_beta2) * g.array().square().matrix();
      theta.array() -= cfg_.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + cfg_.adam_eps);
    };
    auto updatev = [&](Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                       Eigen::VectorXd& m, Eigen::VectorXd& v) {
      m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * g;
      v = cfg_.adam_beta2 * v.array().matrix() +
          (1.0 - cfg_.adam_beta2) * g.array().square().matrix();
      theta.array() -= cfg_.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + cfg_.adam_eps);
    };
    update(p.Wi, grad.Wi, m_.Wi, v_.Wi);
    update(p.Wf, grad.Wf, m_.Wf, v_.Wf);
    update(p.Wg, grad.Wg, m_.Wg, v_.Wg);
    update(p.Wo, grad.Wo, m_.Wo, v_.Wo);
    update(p.Ui, grad.Ui, m_.Ui, v_.Ui);
    update(p.Uf, grad.Uf, m_.Uf, v_.Uf);
    update(p.Ug, grad.Ug, m_.Ug, v_.Ug);
    update(p.Uo, grad.Uo, m_.Uo, v_.Uo);
    updatev(p.bi, grad.bi, m_.bi, v_.bi);
    updatev(p.bf, grad.bf, m_.bf, v_.bf);
    updatev(p.bg, grad.bg, m_.bg, v_.bg);
    updatev(p.bo, grad.bo, m_.bo, v_.bo);
    updatev(p.w_out, grad.w_out, m_.w_out, v_.w_out);
    // Scalar output bias.
    m_out_ = cfg_.adam_beta1 * m_out_ + (1.0 - cfg_.adam_beta1) * grad.b_out;
    v_out_ = cfg_.adam_beta2 * v_out_ +
             (1.0 - cfg_.adam_beta2) * grad.b_out * grad.b_out;
    p.b_out -= cfg_.learning_rate * (m_out_ / bc1) /
               (std::sqrt(v_out_ / bc2) + cfg_.adam_eps);
  }

 private:
  TrainConfig cfg_;
  LstmParams m_, v_;
  double m_out_ = 0, v_out_ = 0;
  int t_ = 0;
};

inline double mse_over(const LstmParams& p,
                       const std::vector<Eigen::VectorXd>& X,
                       const std::vector<double>& y,
                       const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double s = 0;
  for (std::size_t i : idx) {
    double e = cell_forward(p, X[i]) - y[i];
    s += e * e;
  }
  return s / static_cast<double>(idx.size());
}

}  // namespace detail

// Adam on batch-mean squared error over seeded shuffled mini-batches. The
// validation slice is the final val_fraction of rows in their given (time)
// order; training stops when validation MSE has not improved for `patience`
// epochs and the best weights are restored.
inline RecurrentRegressor train_regressor(
    const std::vector<Eigen::VectorXd>& X, const std::vector<double>& y,
    const std::vector<std::string>& feature_names, const TrainConfig& cfg,
    TrainReport* report = nullptr) {
  if (X.empty()) throw std::invalid_argument("no training rows");
  if (X.size() != y.size()) throw std::invalid_argument("X/y size mismatch");

  std::size_t n = X.size();
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(n)));
  if (n_val == 0 && n >= 10) n_val = 1;
  std::size_t n_train = n - n_val;
  if (n_train == 0) {
    n_train = n;
    n_val = 0;
  }
  std::vector<std::size_t> train_idx(n_train), val_idx(n_val);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(val_idx.begin(), val_idx.end(), n_train);

  LstmParams params = LstmParams::init(static_cast<Eigen::Index>(X[0].size()),
                                       cfg.hidden, cfg.seed);
  detail::Adam adam(params, cfg);
  Rng shuffler(derive_seed(cfg.seed, 0x5f5));

  LstmParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0, since_best = 0, epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    shuffler.shuffle(train_idx);
    for (std::size_t start = 0; start < n_train;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(n_train,
                                 start + static_cast<std::size_t>(cfg.batch_size));
      LstmGradients grads(params);
      for (std::size_t k = start; k < end; ++k)
        cell_backward(params, X[train_idx[k]], y[train_idx[k]], grads);
      double inv = 1.0 / static_cast<double>(end - start);
      grads.g.for_each_tensor([&](auto& t) { t *= inv; });
      grads.g.b_out *= inv;
      adam.step(params, grads.g);
    }
    double val_mse = n_val ? detail::mse_over(params, X, y, val_idx)
                           : detail::mse_over(params, X, y, train_idx);
    if (val_mse < best_val) {
      best_val = val_mse;
      best = params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      ++epoch;
      break;
    }
  }

  RecurrentRegressor reg;
  reg.input_features = feature_names;
  reg.params = best;
  reg.config = cfg;
  if (report) {
    report->epochs_run = epoch;
    report->best_epoch = best_epoch;
    report->best_val_mse = best_val;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    report->final_train_mse = detail::mse_over(best, X, y, all);
  }
  return reg;
}

// State-level series assembled from per-row predictions: each gate-passed
// row contributes expm1(prediction), clamped at zero, to hour t0+horizon;
// simultaneous county contributions are summed. Hours that receive no
// contribution are left missing (the Available-hours scope).
struct StateSeriesPrediction {
  std::int64_t start_hour = 0;
  std::vector<double> values;     // NaN where unavailable
  std::vector<bool> available;
};

template <typename RowInput>
StateSeriesPrediction predict_state_series(
    const RecurrentRegressor& reg, std::size_t n_rows,
    const std::vector<std::int64_t>& row_hours, const std::vector<bool>& pass,
    RowInput&& input_for_row, std::int64_t axis_start, std::size_t axis_len,
    int horizon = 48) {
  StateSeriesPrediction out;
  out.start_hour = axis_start;
  out.values.assign(axis_len, kMissing);
  out.available.assign(axis_len, false);
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (!pass[r]) continue;
    Eigen::VectorXd x;
    if (!input_for_row(r, x)) continue;  // missing regressor inputs
    double log_pred = reg.predict(x);
    double customers = std::max(std::expm1(log_pred), 0.0);
    std::int64_t target_hour = row_hours[r] + horizon;
    std::int64_t k = target_hour - axis_start;
    if (k < 0 || k >= static_cast<std::int64_t>(axis_len)) continue;
    std::size_t ki = static_cast<std::size_t>(k);
    out.values[ki] = (out.available[ki] ? out.values[ki] : 0.0) + customers;
    out.available[ki] = true;
  }
  return out;
}

}  // namespace stormcast::model
