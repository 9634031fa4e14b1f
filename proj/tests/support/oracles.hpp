#pragma once

// Reference implementations used only by tests. They follow the textbook
// definitions directly and share no code with the library.

#include <cmath>
#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// ---- CTC ------------------------------------------------------------------

inline std::vector<int> collapse(const std::vector<int>& path, int blank = 0) {
  std::vector<int> merged;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i == 0 || path[i] != path[i - 1]) merged.push_back(path[i]);
  }
  std::vector<int> out;
  for (int t : merged) {
    if (t != blank) out.push_back(t);
  }
  return out;
}

/// Calls fn on each of the vocab^steps paths, in lexicographic order.
inline void for_each_path(int vocab, int steps, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(static_cast<std::size_t>(steps), 0);
  while (true) {
    fn(path);
    int i = steps - 1;
    while (i >= 0 && path[static_cast<std::size_t>(i)] == vocab - 1) path[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) return;
    ++path[static_cast<std::size_t>(i)];
  }
}

/// Sum over all paths that collapse to `labels` of prod_t probs(t, path_t).
inline double path_probability(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for_each_path(static_cast<int>(probs.cols()), static_cast<int>(probs.rows()), [&](const std::vector<int>& p) {
    if (collapse(p) != labels) return;
    double prod = 1.0;
    for (std::size_t t = 0; t < p.size(); ++t) prod *= probs(static_cast<Eigen::Index>(t), p[t]);
    total += prod;
  });
  return total;
}

/// Every label sequence of length 0..max_len over symbols 1..vocab-1.
inline std::vector<std::vector<int>> all_label_sequences(int vocab, int max_len) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : frontier) {
      for (int c = 1; c < vocab; ++c) {
        auto e = s;
        e.push_back(c);
        next.push_back(e);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

inline Eigen::MatrixXd random_distribution(std::mt19937_64& rng, int steps, int vocab) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd p(steps, vocab);
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < vocab; ++k) p(t, k) = u(rng);
    p.row(t) /= p.row(t).sum();
  }
  return p;
}

// ---- edit distance ----------------------------------------------------------

/// Plain exponential recursion, no memo.
template <class T>
long recursive_distance(const std::vector<T>& a, std::size_t i, const std::vector<T>& b, std::size_t j) {
  if (i == a.size()) return static_cast<long>(b.size() - j);
  if (j == b.size()) return static_cast<long>(a.size() - i);
  const long sub = recursive_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const long del = recursive_distance(a, i + 1, b, j) + 1;
  const long ins = recursive_distance(a, i, b, j + 1) + 1;
  return std::min(sub, std::min(del, ins));
}

template <class T>
long recursive_distance(const std::vector<T>& a, const std::vector<T>& b) {
  return recursive_distance(a, 0, b, 0);
}

// ---- finite differences -----------------------------------------------------

/// Central differences of f() with respect to every entry of x (x is perturbed in place).
inline Eigen::MatrixXd numeric_gradient(const std::function<double()>& f, Eigen::MatrixXd& x, double h = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest elementwise |a - n| / max(|a|, |n|, floor).
inline double max_relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                                 double floor = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
  }
  return worst;
}

// ---- PCA --------------------------------------------------------------------

struct Pca {
  Eigen::VectorXd variances;  // descending
  Eigen::MatrixXd scores;     // N x k
};

/// Covariance-matrix PCA of already centered rows.
inline Pca covariance_pca(const Eigen::MatrixXd& x, int k) {
  const Eigen::MatrixXd cov = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::Index d = cov.rows();
  Pca out;
  out.variances.resize(d);
  Eigen::MatrixXd axes(d, k);
  for (Eigen::Index i = 0; i < d; ++i) out.variances(i) = es.eigenvalues()(d - 1 - i);
  for (int i = 0; i < k; ++i) axes.col(i) = es.eigenvectors().col(d - 1 - i);
  out.scores = x * axes;
  return out;
}

// ---- MFCC -------------------------------------------------------------------

/// Direct textbook MFCC: per-frame pre-emphasis, Hamming window, |DFT|^2 / n_fft,
/// triangular mel filters (mel = 1127 ln(1 + f/700)), natural log, orthonormal DCT-II.
inline Eigen::MatrixXd mfcc(const std::vector<double>& audio, double rate = 16000.0, int frame = 400,
                            int hop = 160, int n_fft = 512, int n_mels = 26, int n_ceps = 13,
                            double low = 0.0, double high = 8000.0, double pre = 0.97) {
  const double pi = std::numbers::pi;
  auto mel = [](double f) { return 1127.0 * std::log(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::exp(m / 1127.0) - 1.0); };
  std::vector<double> pts;
  for (int i = 0; i < n_mels + 2; ++i) pts.push_back(inv(mel(low) + (mel(high) - mel(low)) * i / (n_mels + 1)));
  const int frames = static_cast<int>((audio.size() - static_cast<std::size_t>(frame)) / static_cast<std::size_t>(hop)) + 1;
  Eigen::MatrixXd out(frames, n_ceps);
  for (int t = 0; t < frames; ++t) {
    std::vector<double> x(static_cast<std::size_t>(frame));
    for (int n = 0; n < frame; ++n) {
      const double cur = audio[static_cast<std::size_t>(t * hop + n)];
      const double prev = n == 0 ? 0.0 : audio[static_cast<std::size_t>(t * hop + n - 1)];
      x[static_cast<std::size_t>(n)] = (cur - pre * prev) * (0.54 - 0.46 * std::cos(2.0 * pi * n / (frame - 1)));
    }
    std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
    for (int k = 0; k <= n_fft / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (int n = 0; n < frame; ++n) acc += x[static_cast<std::size_t>(n)] * std::polar(1.0, -2.0 * pi * k * n / n_fft);
      power[static_cast<std::size_t>(k)] = std::norm(acc) / n_fft;
    }
    std::vector<double> logmel(static_cast<std::size_t>(n_mels));
    for (int m = 0; m < n_mels; ++m) {
      const double l = pts[static_cast<std::size_t>(m)];
      const double c = pts[static_cast<std::size_t>(m) + 1];
      const double r = pts[static_cast<std::size_t>(m) + 2];
      double e = 0.0;
      for (int k = 0; k <= n_fft / 2; ++k) {
        const double f = k * rate / n_fft;
        e += std::max(0.0, std::min((f - l) / (c - l), (r - f) / (r - c))) * power[static_cast<std::size_t>(k)];
      }
      logmel[static_cast<std::size_t>(m)] = std::log(std::max(e, 1e-10));
    }
    for (int q = 0; q < n_ceps; ++q) {
      double s = 0.0;
      for (int m = 0; m < n_mels; ++m) s += logmel[static_cast<std::size_t>(m)] * std::cos(pi * q * (m + 0.5) / n_mels);
      out(t, q) = s * std::sqrt((q == 0 ? 1.0 : 2.0) / n_mels);
    }
  }
  return out;
}

// ---- filters ----------------------------------------------------------------

/// Sampled sine of unit amplitude.
inline std::vector<double> sine(double freq, double rate, int samples) {
  std::vector<double> x(static_cast<std::size_t>(samples));
  for (int n = 0; n < samples; ++n) x[static_cast<std::size_t>(n)] = std::sin(2.0 * std::numbers::pi * freq * n / rate);
  return x;
}

/// Amplitude of the `freq` component of y[from..], by least-squares fit of sin and cos.
inline double fitted_amplitude(const std::vector<double>& y, double freq, double rate, std::size_t from) {
  double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
  for (std::size_t n = from; n < y.size(); ++n) {
    const double w = 2.0 * std::numbers::pi * freq * static_cast<double>(n) / rate;
    const double s = std::sin(w), c = std::cos(w);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    ys += y[n] * s;
    yc += y[n] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (ys * cc - yc * sc) / det;
  const double b = (yc * ss - ys * sc) / det;
  return std::hypot(a, b);
}

/// |H(e^jw)| in dB of a cascade given as rows {b0, b1, b2, a1, a2} (a0 = 1).
inline double cascade_gain_db(const std::vector<std::array<double, 5>>& sections, double freq, double rate) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq / rate);
  std::complex<double> h = 1.0;
  for (const auto& s : sections) {
    h *= (s[0] + s[1] * z1 + s[2] * z1 * z1) / (1.0 + s[3] * z1 + s[4] * z1 * z1);
  }
  return 20.0 * std::log10(std::abs(h));
}

}  // namespace oracle
