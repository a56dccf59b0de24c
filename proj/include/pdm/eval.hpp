#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pdm/image.hpp"

namespace pdm {

// A set of feature vectors, one row per sample.
struct FeatureSet {
  Eigen::MatrixXd matrix;  // n x d
  std::string provenance;  // free-form description of the extractor

  Eigen::Index count() const { return matrix.rows(); }
  Eigen::Index dim() const { return matrix.cols(); }
};

// Frechet distance between Gaussian fits of the two feature sets:
//   ||mu_r - mu_g||^2 + tr(S_r + S_g - 2 (S_r^1/2 S_g S_r^1/2)^1/2)
// Matrix square roots go through symmetric eigendecompositions with negative
// eigenvalues clipped to zero; the final value is clipped to be non-negative.
double fid(const FeatureSet& real, const FeatureSet& generated);
double fid_from_moments(const Eigen::VectorXd& mu_r, const Eigen::MatrixXd& cov_r,
                        const Eigen::VectorXd& mu_g, const Eigen::MatrixXd& cov_g);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// k-NN manifold precision/recall: a point counts as covered when it lies
// within the k-th neighbour radius of some point of the other set, boundary
// inclusive. Radii exclude the point itself. Requires more than k points in
// each set.
PrecisionRecall improved_pr(const FeatureSet& real, const FeatureSet& generated, int k = 3);

// Isotropic empirical semivariogram over a set of equally shaped fields.
struct Variogram {
  Eigen::ArrayXd bin_centers;          // strictly increasing lag bins
  Eigen::ArrayXd gamma;                // mean semivariance per bin
  Eigen::ArrayXd band_low, band_high;  // 2.5 / 97.5 percentiles across fields
  Eigen::Array<std::int64_t, Eigen::Dynamic, 1> pair_counts;  // full pair population per bin
  double delta = 0.5;       // bin half-width the curve was computed with
  bool subsampled = false;  // true when any bin exceeded the pair budget
};

struct VariogramOptions {
  double max_lag = 0.0;                  // <= 0 means half the grid diagonal
  double delta = 0.5;                    // bin half-width around integer lags
  std::int64_t pair_budget = 1'000'000;  // per field; above it, pairs are subsampled
  std::uint64_t seed = 0;                // subsampling seed
};

// gamma(h) = sum over pairs at distance in (h - delta, h + delta] of
// (z_i - z_j)^2 / (2 |N(h)|), computed per field and averaged. Bands track
// the spread of the per-field curves. Bins with no pairs are dropped.
Variogram semivariogram(const std::vector<ImageTensor>& fields,
                        const VariogramOptions& options = {});

enum class FeatureMethod { flatten, flatten_pca };

// flatten: raw pixels, one row per image. flatten_pca: center and project
// onto the top principal components of `fit_on` (the images themselves when
// fit_on is null). The fit is deterministic, so passing the same fit_on for
// two extractions applies the identical projection to both.
FeatureSet feature_extract(const std::vector<ImageTensor>& images, FeatureMethod method,
                           int pca_dim = 0, const std::vector<ImageTensor>* fit_on = nullptr);

void save_features(const std::string& path, const FeatureSet& features);
FeatureSet load_features(const std::string& path);

}  // namespace pdm
