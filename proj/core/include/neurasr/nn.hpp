#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "neurasr/autodiff.hpp"
#include "neurasr/random.hpp"

namespace neurasr::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
Matrix init_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

struct GruParameters {
  int input_dim = 0;
  int hidden = 0;
  Parameter w_z, w_r, w_h;  // hidden x input
  Parameter u_z, u_r, u_h;  // hidden x hidden
  Parameter b_z, b_r, b_h;  // hidden x 1

  static GruParameters create(int input_dim, int hidden, Rng& rng, const std::string& prefix = "gru");
  std::vector<Parameter*> parameters();
};

/// GRU parameters bound to one tape.
struct GruVars {
  Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
  int hidden = 0;
};

GruVars bind(Tape& tape, GruParameters& p);

/// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wh x + Uh (r*h) + bh), h' = (1 - z)*h + z*n
Var gru_step(const GruVars& g, const Var& x, const Var& h);

/// Runs the cell over the columns of `inputs` (input_dim x T); input
/// projections are computed for all steps at once. Returns T states.
std::vector<Var> gru_sequence(const GruVars& g, const Var& inputs, const Var& h0);

struct DenseParameters {
  Parameter w;  // out x in
  Parameter b;  // out x 1

  static DenseParameters create(int in_dim, int out_dim, Rng& rng, const std::string& prefix = "dense");
  std::vector<Parameter*> parameters();
};

/// softmax(W h + b)
Var dense_softmax(const Var& w, const Var& b, const Var& h);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void init(std::span<Parameter* const> params);
};

/// Bias-corrected Adam update from each parameter's grad.
void adam_step(AdamState& state, std::span<Parameter* const> params);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the pre-clip norm.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grads(std::span<Parameter* const> params);

/// Checkpoint = <stem>.json header (names, shapes, step, seed, extras) plus
/// <stem>.bin with little-endian float64 values: parameters, then Adam m, then v.
void save_checkpoint(const std::filesystem::path& stem, std::span<Parameter* const> params,
                     const AdamState& adam, std::uint64_t seed, const nlohmann::json& extra = {});
/// Restores values into existing parameters (names and shapes must match). Returns the header.
nlohmann::json load_checkpoint(const std::filesystem::path& stem, std::span<Parameter* const> params,
                               AdamState* adam = nullptr);

}  // namespace neurasr::nn
