#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace neurasr {

enum class FeatureSource { kEeg, kMfcc, kFused };

std::string_view to_string(FeatureSource source);
FeatureSource parse_feature_source(std::string_view text);

inline constexpr double kFeatureRateHz = 100.0;

/// Time-major feature matrix: one row per 10 ms frame.
struct FeatureSequence {
  Eigen::MatrixXd frames;  // T x D
  std::vector<std::string> dim_labels;
  FeatureSource source = FeatureSource::kEeg;
  double frame_rate_hz = kFeatureRateHz;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index dims() const { return frames.cols(); }

  /// Throws InputError on non-finite entries, label mismatch or T == 0.
  void validate() const;
};

/// Header row of dim labels, then one row per frame.
void write_feature_csv(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_feature_csv(const std::filesystem::path& path, FeatureSource source);

}  // namespace neurasr
