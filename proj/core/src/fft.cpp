#include "neurasr/fft.hpp"

#include <algorithm>
#include <mutex>

#include <fftw3.h>

#include "neurasr/error.hpp"

namespace neurasr::dsp {

namespace {
// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

RealFft::RealFft(std::size_t size) : size_(size), impl_(std::make_unique<Impl>()) {
  if (size == 0) throw ArgumentError("fft size must be positive");
  std::lock_guard lock(planner_mutex());
  impl_->in = fftw_alloc_real(size);
  impl_->out = fftw_alloc_complex(size / 2 + 1);
  impl_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(size), impl_->in, impl_->out, FFTW_ESTIMATE);
  if (!impl_->plan) throw Error("fftw planning failed");
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::power_spectrum(std::span<const double> input, std::span<double> out) {
  if (input.size() > size_) throw ArgumentError("fft input longer than transform size");
  if (out.size() != bins()) throw ArgumentError("fft output span has wrong size");
  std::copy(input.begin(), input.end(), impl_->in);
  std::fill(impl_->in + input.size(), impl_->in + size_, 0.0);
  fftw_execute(impl_->plan);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = impl_->out[k][0] * impl_->out[k][0] + impl_->out[k][1] * impl_->out[k][1];
  }
}

}  // namespace neurasr::dsp
