#pragma once

#include <memory>
#include <span>
#include <vector>

namespace neurasr::dsp {

/// Real-input DFT of a fixed length backed by FFTW. Not shareable across
/// threads; create one per worker.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }

  /// |X_k|^2 for k = 0..size/2. Input shorter than size() is zero padded.
  void power_spectrum(std::span<const double> input, std::span<double> out);

 private:
  struct Impl;
  std::size_t size_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace neurasr::dsp
