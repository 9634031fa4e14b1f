#include "neurasr/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "neurasr/error.hpp"
#include "neurasr/files.hpp"

namespace neurasr::nn {

using nlohmann::json;

Matrix init_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  // column-major fill order keeps the stream layout independent of Eigen internals
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

GruParameters GruParameters::create(int input_dim, int hidden, Rng& rng, const std::string& prefix) {
  if (input_dim < 1 || hidden < 1) throw ArgumentError("GRU dimensions must be positive");
  GruParameters p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  auto make = [&](const char* name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    return Parameter(prefix + "." + name, init_uniform(rows, cols, fan_in, rng));
  };
  p.w_z = make("w_z", hidden, input_dim, input_dim);
  p.w_r = make("w_r", hidden, input_dim, input_dim);
  p.w_h = make("w_h", hidden, input_dim, input_dim);
  p.u_z = make("u_z", hidden, hidden, hidden);
  p.u_r = make("u_r", hidden, hidden, hidden);
  p.u_h = make("u_h", hidden, hidden, hidden);
  p.b_z = make("b_z", hidden, 1, hidden);
  p.b_r = make("b_r", hidden, 1, hidden);
  p.b_h = make("b_h", hidden, 1, hidden);
  return p;
}

std::vector<Parameter*> GruParameters::parameters() {
  return {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h};
}

GruVars bind(Tape& tape, GruParameters& p) {
  GruVars g;
  g.w_z = tape.param(p.w_z);
  g.w_r = tape.param(p.w_r);
  g.w_h = tape.param(p.w_h);
  g.u_z = tape.param(p.u_z);
  g.u_r = tape.param(p.u_r);
  g.u_h = tape.param(p.u_h);
  g.b_z = tape.param(p.b_z);
  g.b_r = tape.param(p.b_r);
  g.b_h = tape.param(p.b_h);
  g.hidden = p.hidden;
  return g;
}

namespace {

// Shared recurrence once the input projections (W x + b) are known.
Var gru_recur(const GruVars& g, const Var& xz, const Var& xr, const Var& xh, const Var& h) {
  const Var z = ad::sigmoid(xz + ad::matmul(g.u_z, h));
  const Var r = ad::sigmoid(xr + ad::matmul(g.u_r, h));
  const Var n = ad::tanh(xh + ad::matmul(g.u_h, r * h));
  // (1 - z) * h + z * n  ==  h + z * (n - h)
  return h + z * (n - h);
}

}  // namespace

Var gru_step(const GruVars& g, const Var& x, const Var& h) {
  if (x.cols() != 1 || x.rows() != g.w_z.cols()) {
    throw ArgumentError("gru_step: input must be a " + std::to_string(g.w_z.cols()) + "x1 vector");
  }
  if (h.cols() != 1 || h.rows() != g.hidden) {
    throw ArgumentError("gru_step: state must be a " + std::to_string(g.hidden) + "x1 vector");
  }
  const Var xz = ad::matmul(g.w_z, x) + g.b_z;
  const Var xr = ad::matmul(g.w_r, x) + g.b_r;
  const Var xh = ad::matmul(g.w_h, x) + g.b_h;
  return gru_recur(g, xz, xr, xh, h);
}

std::vector<Var> gru_sequence(const GruVars& g, const Var& inputs, const Var& h0) {
  if (inputs.rows() != g.w_z.cols()) throw ArgumentError("gru_sequence: input dimension mismatch");
  if (h0.cols() != 1 || h0.rows() != g.hidden) throw ArgumentError("gru_sequence: bad initial state");
  const Var pz = ad::add_colwise(ad::matmul(g.w_z, inputs), g.b_z);
  const Var pr = ad::add_colwise(ad::matmul(g.w_r, inputs), g.b_r);
  const Var ph = ad::add_colwise(ad::matmul(g.w_h, inputs), g.b_h);
  std::vector<Var> states;
  states.reserve(static_cast<std::size_t>(inputs.cols()));
  Var h = h0;
  for (Eigen::Index t = 0; t < inputs.cols(); ++t) {
    h = gru_recur(g, ad::column(pz, t), ad::column(pr, t), ad::column(ph, t), h);
    states.push_back(h);
  }
  return states;
}

DenseParameters DenseParameters::create(int in_dim, int out_dim, Rng& rng, const std::string& prefix) {
  DenseParameters d;
  d.w = Parameter(prefix + ".w", init_uniform(out_dim, in_dim, in_dim, rng));
  d.b = Parameter(prefix + ".b", init_uniform(out_dim, 1, in_dim, rng));
  return d;
}

std::vector<Parameter*> DenseParameters::parameters() { return {&w, &b}; }

Var dense_softmax(const Var& w, const Var& b, const Var& h) {
  if (w.cols() != h.rows() || h.cols() != 1 || b.rows() != w.rows() || b.cols() != 1) {
    throw ArgumentError("dense_softmax: shape mismatch");
  }
  return ad::softmax(ad::matmul(w, h) + b);
}

void AdamState::init(std::span<Parameter* const> params) {
  m.clear();
  v.clear();
  for (const Parameter* p : params) {
    m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  step = 0;
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (state.m.empty() && !params.empty()) state.init(params);
  if (state.m.size() != params.size()) throw ArgumentError("adam state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols()) {
      throw ArgumentError("adam_step: shape mismatch for " + p.name);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * p.grad;
    v = state.beta2 * v + (1.0 - state.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

namespace {

void append_le(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

void read_le(const std::string& in, std::size_t& offset, Matrix& m) {
  if (offset + static_cast<std::size_t>(m.size()) * 8 > in.size()) throw SchemaError("checkpoint data truncated");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(b)])) << (8 * b);
    }
    m.data()[i] = std::bit_cast<double>(bits);
    offset += 8;
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, std::span<Parameter* const> params,
                     const AdamState& adam, std::uint64_t seed, const json& extra) {
  json header;
  header["format"] = "neurasr-checkpoint";
  header["version"] = 1;
  header["seed"] = seed;
  header["step"] = adam.step;
  header["adam"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps},
                    {"has_moments", adam.m.size() == params.size()}};
  header["tensors"] = json::array();
  std::string bin;
  for (const Parameter* p : params) {
    header["tensors"].push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}});
    append_le(bin, p->value);
  }
  if (adam.m.size() == params.size()) {
    for (const auto& m : adam.m) append_le(bin, m);
    for (const auto& v : adam.v) append_le(bin, v);
  }
  if (!extra.is_null()) header["extra"] = extra;
  header["data_file"] = with_suffix(stem, ".bin").filename().string();
  write_text_file(with_suffix(stem, ".json"), header.dump(2) + "\n");
  write_text_file(with_suffix(stem, ".bin"), bin);
}

json load_checkpoint(const std::filesystem::path& stem, std::span<Parameter* const> params, AdamState* adam) {
  json header;
  try {
    header = json::parse(read_text_file(with_suffix(stem, ".json")));
  } catch (const json::exception& e) {
    throw SchemaError(stem.string() + ".json: " + e.what());
  }
  const std::string bin = read_text_file(with_suffix(stem, ".bin"));
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) throw SchemaError("checkpoint tensor count mismatch");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != p.name || t.at("shape")[0].get<Eigen::Index>() != p.value.rows() ||
        t.at("shape")[1].get<Eigen::Index>() != p.value.cols()) {
      throw SchemaError("checkpoint tensor " + t.at("name").get<std::string>() + " does not match " + p.name);
    }
    read_le(bin, offset, p.value);
    p.zero_grad();
  }
  if (adam) {
    const auto& a = header.at("adam");
    adam->lr = a.at("lr").get<double>();
    adam->beta1 = a.at("beta1").get<double>();
    adam->beta2 = a.at("beta2").get<double>();
    adam->eps = a.at("eps").get<double>();
    adam->init(params);
    adam->step = header.at("step").get<std::int64_t>();
    if (a.at("has_moments").get<bool>()) {
      for (auto& m : adam->m) read_le(bin, offset, m);
      for (auto& v : adam->v) read_le(bin, offset, v);
    }
  }
  return header;
}

}  // namespace neurasr::nn
