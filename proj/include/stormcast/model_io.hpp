#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stormcast/features.hpp"
#include "stormcast/logistic.hpp"
#include "stormcast/lstm.hpp"

namespace stormcast::model {

// Self-describing model bundle. Byte layout (everything little-endian, see
// docs/model_bundle.md): magic "SCB1", u32 version, scaler block (feature
// names + min/max), optional gate block, regressor block (tensors as
// row-major 64-bit floats in the order Wi Wf Wg Wo Ui Uf Ug Uo bi bf bg bo
// w_out b_out), then the training configuration and seed.
struct ModelBundle {
  std::vector<std::string> scaler_features;
  features::ScalerParams scaler;
  std::optional<LogisticGate> gate;
  RecurrentRegressor regressor;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  Reader(const std::string& data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }

  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size())
      throw std::runtime_error("truncated model bundle");
  }

  const std::string& data_;
  std::size_t pos_ = 0;
};

inline void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

inline void put_vector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

inline Eigen::MatrixXd read_matrix(Reader& in, Eigen::Index rows,
                                   Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.f64();
  return m;
}

inline Eigen::VectorXd read_vector(Reader& in, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = in.f64();
  return v;
}

}  // namespace detail

inline std::string serialize_bundle(const ModelBundle& b) {
  using namespace detail;
  std::string out;
  out.append("SCB1");
  put_u32(out, 1);

  put_u32(out, static_cast<std::uint32_t>(b.scaler_features.size()));
  for (std::size_t i = 0; i < b.scaler_features.size(); ++i) {
    put_str(out, b.scaler_features[i]);
    put_f64(out, b.scaler.min[i]);
    put_f64(out, b.scaler.max[i]);
  }

  out.push_back(b.gate ? 1 : 0);
  if (b.gate) {
    const LogisticGate& g = *b.gate;
    put_u32(out, static_cast<std::uint32_t>(g.selected.size()));
    for (const auto& s : g.selected) put_str(out, s);
    put_vector(out, g.w);
    put_f64(out, g.b);
    put_f64(out, g.C);
    put_f64(out, g.class_weight_neg);
    put_f64(out, g.class_weight_pos);
    put_f64(out, g.tau);
  }

  const RecurrentRegressor& r = b.regressor;
  put_u32(out, static_cast<std::uint32_t>(r.input_features.size()));
  for (const auto& s : r.input_features) put_str(out, s);
  put_u32(out, static_cast<std::uint32_t>(r.params.hidden()));
  put_matrix(out, r.params.Wi);
  put_matrix(out, r.params.Wf);
  put_matrix(out, r.params.Wg);
  put_matrix(out, r.params.Wo);
  put_matrix(out, r.params.Ui);
  put_matrix(out, r.params.Uf);
  put_matrix(out, r.params.Ug);
  put_matrix(out, r.params.Uo);
  put_vector(out, r.params.bi);
  put_vector(out, r.params.bf);
  put_vector(out, r.params.bg);
  put_vector(out, r.params.bo);
  put_vector(out, r.params.w_out);
  put_f64(out, r.params.b_out);

  const TrainConfig& c = r.config;
  put_f64(out, c.learning_rate);
  put_u32(out, static_cast<std::uint32_t>(c.batch_size));
  put_u32(out, static_cast<std::uint32_t>(c.max_epochs));
  put_u32(out, static_cast<std::uint32_t>(c.patience));
  put_f64(out, c.val_fraction);
  put_u64(out, c.seed);
  put_f64(out, c.adam_beta1);
  put_f64(out, c.adam_beta2);
  put_f64(out, c.adam_eps);
  return out;
}

inline ModelBundle deserialize_bundle(const std::string& data) {
  using namespace detail;
  if (data.size() < 8 || data.substr(0, 4) != "SCB1")
    throw std::runtime_error("not a model bundle (bad magic)");
  Reader in(data.substr(4));
  std::uint32_t version = in.u32();
  if (version != 1)
    throw std::runtime_error("unsupported bundle version " +
                             std::to_string(version));
  ModelBundle b;
  std::uint32_t nf = in.u32();
  b.scaler_features.resize(nf);
  b.scaler.min.resize(nf);
  b.scaler.max.resize(nf);
  for (std::uint32_t i = 0; i < nf; ++i) {
    b.scaler_features[i] = in.str();
    b.scaler.min[i] = in.f64();
    b.scaler.max[i] = in.f64();
  }

  if (in.u8()) {
    LogisticGate g;
    std::uint32_t ns = in.u32();
    g.selected.resize(ns);
    for (std::uint32_t i = 0; i < ns; ++i) g.selected[i] = in.str();
    g.w = read_vector(in, static_cast<Eigen::Index>(ns));
    g.b = in.f64();
    g.C = in.f64();
    g.class_weight_neg = in.f64();
    g.class_weight_pos = in.f64();
    g.tau = in.f64();
    b.gate = std::move(g);
  }

  RecurrentRegressor& r = b.regressor;
  std::uint32_t ni = in.u32();
  r.input_features.resize(ni);
  for (std::uint32_t i = 0; i < ni; ++i) r.input_features[i] = in.str();
  Eigen::Index hidden = static_cast<Eigen::Index>(in.u32());
  Eigen::Index inputs = static_cast<Eigen::Index>(ni);
  r.params.Wi = read_matrix(in, hidden, inputs);
  r.params.Wf = read_matrix(in, hidden, inputs);
  r.params.Wg = read_matrix(in, hidden, inputs);
  r.params.Wo = read_matrix(in, hidden, inputs);
  r.params.Ui = read_matrix(in, hidden, hidden);
  r.params.Uf = read_matrix(in, hidden, hidden);
  r.params.Ug = read_matrix(in, hidden, hidden);
  r.params.Uo = read_matrix(in, hidden, hidden);
  r.params.bi = read_vector(in, hidden);
  r.params.bf = read_vector(in, hidden);
  r.params.bg = read_vector(in, hidden);
  r.params.bo = read_vector(in, hidden);
  r.params.w_out = read_vector(in, hidden);
  r.params.b_out = in.f64();

  TrainConfig& c = r.config;
  c.learning_rate = in.f64();
  c.batch_size = static_cast<int>(in.u32());
  c.max_epochs = static_cast<int>(in.u32());
  c.patience = static_cast<int>(in.u32());
  c.val_fraction = in.f64();
  c.seed = in.u64();
  c.adam_beta1 = in.f64();
  c.adam_beta2 = in.f64();
  c.adam_eps = in.f64();
  c.hidden = static_cast<int>(hidden);
  return b;
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_bundle(ss.str());
}

inline void save_bundle(const ModelBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::string data = serialize_bundle(b);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace stormcast::model
