#include "neurasr/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "neurasr/acoustic_features.hpp"
#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"
#include "neurasr/random.hpp"

namespace neurasr::kpca {

using nlohmann::json;

namespace {

double int_pow(double base, int exponent) {
  double r = 1.0;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

Eigen::MatrixXd apply_scaling(const KpcaModel& model, const Eigen::MatrixXd& frames) {
  if (!model.standardize) return frames;
  return ((frames.rowwise() - model.input_mean).array().rowwise() / model.input_scale.array()).matrix();
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelParams& kernel) {
  Eigen::MatrixXd k = kernel.gamma * (a * b.transpose());
  k.array() += kernel.coef0;
  if (kernel.degree != 1) k = k.unaryExpr([&](double v) { return int_pow(v, kernel.degree); });
  return k;
}

Eigen::MatrixXd center_kernel(const Eigen::MatrixXd& k) {
  const Eigen::RowVectorXd col_means = k.colwise().mean();
  const Eigen::VectorXd row_means = k.rowwise().mean();
  const double total = k.mean();
  Eigen::MatrixXd c = k;
  c.rowwise() -= col_means;
  c.colwise() -= row_means;
  c.array() += total;
  return c;
}

Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& frames, Eigen::Index max_rows, std::uint64_t seed) {
  if (frames.rows() <= max_rows) return frames;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(frames.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // partial Fisher-Yates
  for (Eigen::Index i = 0; i < max_rows; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(frames.rows() - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(max_rows));
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(max_rows, frames.cols());
  for (Eigen::Index i = 0; i < max_rows; ++i) out.row(i) = frames.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

KpcaModel kpca_fit(const Eigen::MatrixXd& frames, int n_components) {
  KpcaOptions options;
  options.n_components = n_components;
  return kpca_fit(frames, options);
}

KpcaModel kpca_fit(const Eigen::MatrixXd& input, const KpcaOptions& options) {
  if (options.n_components < 1) throw ArgumentError("n_components must be >= 1");
  if (!input.allFinite()) throw InputError("kpca input contains non-finite values");
  const Eigen::MatrixXd frames = subsample_rows(input, options.max_frames, options.subsample_seed);
  if (frames.rows() < options.n_components) {
    throw ArgumentError("kpca needs at least n_components frames (" + std::to_string(frames.rows()) +
                        " < " + std::to_string(options.n_components) + ")");
  }

  KpcaModel model;
  model.kernel = options.kernel;
  if (model.kernel.gamma <= 0.0) model.kernel.gamma = 1.0 / static_cast<double>(frames.cols());
  model.n_components = options.n_components;
  model.subsample_seed = options.subsample_seed;
  model.standardize = options.standardize;
  model.input_mean = Eigen::RowVectorXd::Zero(frames.cols());
  model.input_scale = Eigen::RowVectorXd::Ones(frames.cols());
  if (options.standardize) {
    model.input_mean = frames.colwise().mean();
    const Eigen::MatrixXd centered = frames.rowwise() - model.input_mean;
    model.input_scale = (centered.colwise().squaredNorm() / static_cast<double>(frames.rows())).cwiseSqrt();
    for (Eigen::Index c = 0; c < model.input_scale.size(); ++c) {
      if (!(model.input_scale(c) > 1e-12)) model.input_scale(c) = 1.0;
    }
  }
  model.training_frames = apply_scaling(model, frames);

  const Eigen::MatrixXd k = kernel_matrix(model.training_frames, model.training_frames, model.kernel);
  model.kernel_row_means = k.rowwise().mean();
  model.kernel_mean = k.mean();
  const Eigen::MatrixXd kc = center_kernel(k);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kc);
  if (solver.info() != Eigen::Success) throw Error("kpca eigendecomposition failed");
  const Eigen::Index n = kc.rows();
  model.eigenvalues.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.eigenvalues(i) = std::max(0.0, solver.eigenvalues()(n - 1 - i));
  }
  const double total = model.eigenvalues.sum();
  model.explained_variance_ratio =
      total > 0.0 ? Eigen::VectorXd(model.eigenvalues / total) : Eigen::VectorXd::Zero(n);

  const double lambda_floor = 1e-12 * std::max(model.eigenvalues(0), 1e-300);
  model.eigenvectors.resize(n, options.n_components);
  for (int c = 0; c < options.n_components; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    const double lambda = model.eigenvalues(c);
    model.eigenvectors.col(c) = lambda > lambda_floor ? Eigen::VectorXd(v / std::sqrt(lambda))
                                                      : Eigen::VectorXd::Zero(n);
  }
  model.training_embedding = kc * model.eigenvectors;
  return model;
}

Eigen::MatrixXd kpca_transform(const KpcaModel& model, const Eigen::MatrixXd& frames) {
  if (frames.cols() != model.input_dim()) {
    throw ArgumentError("kpca_transform expects " + std::to_string(model.input_dim()) + " columns, got " +
                        std::to_string(frames.cols()));
  }
  if (frames.rows() == 0) return Eigen::MatrixXd(0, model.n_components);
  const Eigen::MatrixXd x = apply_scaling(model, frames);
  Eigen::MatrixXd k = kernel_matrix(x, model.training_frames, model.kernel);
  const Eigen::VectorXd new_means = k.rowwise().mean();
  k.rowwise() -= model.kernel_row_means.transpose();
  k.colwise() -= new_means;
  k.array() += model.kernel_mean;
  return k * model.eigenvectors;
}

FeatureSequence build_final_eeg_features(const FeatureSequence& seq, const KpcaModel& model) {
  FeatureSequence reduced;
  reduced.source = seq.source;
  reduced.frame_rate_hz = seq.frame_rate_hz;
  reduced.frames = kpca_transform(model, seq.frames);
  for (int c = 0; c < model.n_components; ++c) reduced.dim_labels.push_back("kpc" + std::to_string(c + 1));
  return features::add_deltas(reduced);
}

void save_model(const KpcaModel& model, const std::filesystem::path& path) {
  json j;
  j["schema_version"] = 1;
  j["kernel"] = {{"degree", model.kernel.degree}, {"gamma", model.kernel.gamma}, {"coef0", model.kernel.coef0}};
  j["n_components"] = model.n_components;
  j["subsample_seed"] = model.subsample_seed;
  j["standardize"] = model.standardize;
  j["input_mean"] = vector_to_json(model.input_mean.transpose());
  j["input_scale"] = vector_to_json(model.input_scale.transpose());
  j["training_frames"] = matrix_to_json(model.training_frames);
  j["eigenvalues"] = vector_to_json(model.eigenvalues);
  j["eigenvectors"] = matrix_to_json(model.eigenvectors);
  j["explained_variance_ratio"] = vector_to_json(model.explained_variance_ratio);
  j["kernel_row_means"] = vector_to_json(model.kernel_row_means);
  j["kernel_mean"] = model.kernel_mean;
  j["training_embedding"] = matrix_to_json(model.training_embedding);
  write_text_file(path, j.dump() + "\n");
}

KpcaModel load_model(const std::filesystem::path& path) {
  KpcaModel m;
  try {
    const json j = json::parse(read_text_file(path));
    m.kernel.degree = j.at("kernel").at("degree").get<int>();
    m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    m.kernel.coef0 = j.at("kernel").at("coef0").get<double>();
    m.n_components = j.at("n_components").get<int>();
    m.subsample_seed = j.at("subsample_seed").get<std::uint64_t>();
    m.standardize = j.at("standardize").get<bool>();
    m.input_mean = vector_from_json(j.at("input_mean")).transpose();
    m.input_scale = vector_from_json(j.at("input_scale")).transpose();
    m.training_frames = matrix_from_json(j.at("training_frames"));
    m.eigenvalues = vector_from_json(j.at("eigenvalues"));
    m.eigenvectors = matrix_from_json(j.at("eigenvectors"), m.n_components);
    m.explained_variance_ratio = vector_from_json(j.at("explained_variance_ratio"));
    m.kernel_row_means = vector_from_json(j.at("kernel_row_means"));
    m.kernel_mean = j.at("kernel_mean").get<double>();
    m.training_embedding = matrix_from_json(j.at("training_embedding"), m.n_components);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return m;
}

void write_variance_csv(const KpcaModel& model, const std::filesystem::path& path) {
  std::string out = "component,ratio,cumulative\n";
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < model.explained_variance_ratio.size(); ++i) {
    const double r = model.explained_variance_ratio(i);
    if (r <= 0.0) break;
    cumulative += r;
    out += std::to_string(i + 1) + "," + csv::format_number(r) + "," + csv::format_number(cumulative) + "\n";
  }
  write_text_file(path, out);
}

}  // namespace neurasr::kpca
