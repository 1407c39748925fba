#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "features/feature_cube.hpp"

namespace lidarsphere {

enum class ReductionKind { kPca, kMnf, kIca };

const char* to_string(ReductionKind kind);
ReductionKind parse_reduction_kind(const std::string& name);

/// A fitted linear projection x -> components^T (x - mean).
struct ReductionModel {
  ReductionKind kind = ReductionKind::kPca;
  std::vector<std::string> input_channels;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;      // C_in x k, one column per output component
  Eigen::MatrixXd noise_whitening;  // MNF only: inverse square root of the noise covariance
  std::vector<double> explained;   // PCA: variances; MNF: signal-to-noise ratios; ICA: empty
  bool converged = true;
  int iterations = 0;

  std::size_t input_dim() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(components.cols()); }
};

struct IcaOptions {
  std::uint64_t seed = 42;
  int max_iterations = 500;
  double tolerance = 1e-6;
  /// Fit on at most this many valid pixels (evenly strided); 0 = all.
  std::size_t max_fit_samples = 100000;
};

/// Valid pixels as an n x C matrix.
Eigen::MatrixXd valid_pixel_matrix(const FeatureCube& cube);

/// Principal components: top-k covariance eigenvectors, largest-magnitude
/// entry of each made positive. Throws DataError if the data rank is below k.
ReductionModel pca_fit(const FeatureCube& cube, std::size_t k = 3);

/// Minimum noise fraction. Noise covariance is half the covariance of
/// horizontal first differences over valid neighbor pairs, ridge-regularized by
/// `ridge` times its mean diagonal. Components are ordered by descending SNR.
ReductionModel mnf_fit(const FeatureCube& cube, std::size_t k = 3, double ridge = 1e-6);

/// FastICA on PCA-whitened data, logcosh contrast, symmetric decorrelation.
ReductionModel ica_fit(const FeatureCube& cube, std::size_t k = 3, const IcaOptions& options = {});

/// Raw projected scores, one map per component; void pixels are 0.
std::vector<RealMap> scores(const ReductionModel& model, const FeatureCube& cube);

/// Scores min-max normalized to [0, 1] over valid pixels (constant -> 0).
/// Output channels are named "<kind>1", "<kind>2", ... in lower case.
FeatureCube transform(const ReductionModel& model, const FeatureCube& cube);

std::string model_to_json(const ReductionModel& model);
ReductionModel model_from_json(const std::string& text);
void save_model(const ReductionModel& model, const std::filesystem::path& path);
ReductionModel load_model(const std::filesystem::path& path);

}  // namespace lidarsphere
