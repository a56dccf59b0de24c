#include "pdm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdm/error.hpp"
#include "pdm/io_util.hpp"
#include "pdm/rng.hpp"

namespace pdm {

namespace {

void require_features(const FeatureSet& f, const char* who) {
  if (f.count() < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 samples");
  if (!f.matrix.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite feature values");
}

void fit_gaussian(const FeatureSet& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  mu = f.matrix.colwise().mean();
  Eigen::MatrixXd centered = f.matrix.rowwise() - mu.transpose();
  cov = centered.transpose() * centered / static_cast<double>(f.count() - 1);
}

// Symmetric PSD square root; eigenvalues below zero (noise from the
// decomposition) are clipped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw NumericError("fid: eigendecomposition failed");
  Eigen::ArrayXd lam = es.eigenvalues().array().max(0.0).sqrt();
  return es.eigenvectors() * lam.matrix().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid_from_moments(const Eigen::VectorXd& mu_r, const Eigen::MatrixXd& cov_r,
                        const Eigen::VectorXd& mu_g, const Eigen::MatrixXd& cov_g) {
  if (mu_r.size() != mu_g.size() || cov_r.rows() != cov_g.rows())
    throw std::invalid_argument("fid: feature dimensions differ");

  Eigen::MatrixXd root_r = psd_sqrt(cov_r);
  Eigen::MatrixXd inner = root_r * cov_g * root_r;
  inner = 0.5 * (inner + inner.transpose()).eval();  // symmetrize rounding noise
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success)
    throw NumericError("fid: eigendecomposition failed");
  double trace_sqrt = es.eigenvalues().array().max(0.0).sqrt().sum();

  double value = (mu_r - mu_g).squaredNorm() + cov_r.trace() + cov_g.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

double fid(const FeatureSet& real, const FeatureSet& generated) {
  require_features(real, "fid");
  require_features(generated, "fid");
  if (real.dim() != generated.dim())
    throw std::invalid_argument("fid: feature dimensions differ");
  Eigen::VectorXd mu_r, mu_g;
  Eigen::MatrixXd cov_r, cov_g;
  fit_gaussian(real, mu_r, cov_r);
  fit_gaussian(generated, mu_g, cov_g);
  return fid_from_moments(mu_r, cov_r, mu_g, cov_g);
}

namespace {

// Squared distance from row i of `a` to every row of `b`.
Eigen::VectorXd sq_dists(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b) {
  return (b.rowwise() - a.row(i)).rowwise().squaredNorm();
}

// Squared k-NN radius of every point of `set` within itself (self excluded).
Eigen::VectorXd knn_radii_sq(const Eigen::MatrixXd& set, int k) {
  Eigen::VectorXd radii(set.rows());
  std::vector<double> d(static_cast<size_t>(set.rows()));
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    Eigen::VectorXd di = sq_dists(set, i, set);
    d.assign(di.data(), di.data() + di.size());
    d.erase(d.begin() + i);  // drop self
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    radii[i] = d[static_cast<size_t>(k - 1)];
  }
  return radii;
}

// Fraction of rows of `probes` lying inside the union of balls around
// `manifold` rows with the given squared radii.
double covered_fraction(const Eigen::MatrixXd& probes, const Eigen::MatrixXd& manifold,
                        const Eigen::VectorXd& radii_sq) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    Eigen::VectorXd d = (manifold.rowwise() - probes.row(i)).rowwise().squaredNorm();
    if ((d.array() <= radii_sq.array()).any()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probes.rows());
}

}  // namespace

PrecisionRecall improved_pr(const FeatureSet& real, const FeatureSet& generated, int k) {
  require_features(real, "improved_pr");
  require_features(generated, "improved_pr");
  if (real.dim() != generated.dim())
    throw std::invalid_argument("improved_pr: feature dimensions differ");
  if (k < 1) throw std::invalid_argument("improved_pr: k must be positive");
  if (real.count() <= k || generated.count() <= k)
    throw std::invalid_argument("improved_pr: each set needs more than k samples");

  Eigen::VectorXd real_radii = knn_radii_sq(real.matrix, k);
  Eigen::VectorXd gen_radii = knn_radii_sq(generated.matrix, k);
  PrecisionRecall pr;
  pr.precision = covered_fraction(generated.matrix, real.matrix, real_radii);
  pr.recall = covered_fraction(real.matrix, generated.matrix, gen_radii);
  return pr;
}

namespace {

struct Offset {
  int dy;
  int dx;
  double dist;
};

// Anchor count for offset (dy, dx) on an h x w grid.
std::int64_t offset_pairs(int h, int w, const Offset& o) {
  return static_cast<std::int64_t>(h - o.dy) * (w - std::abs(o.dx));
}

// Sum of squared differences over all pairs with the given offset.
double offset_sum_sq(const ImageTensor& f, int c, const Offset& o) {
  auto m = f.channel(c);
  int h = f.height, w = f.width;
  int c0 = std::max(0, -o.dx);
  int cols = w - std::abs(o.dx);
  auto a = m.block(0, c0, h - o.dy, cols);
  auto b = m.block(o.dy, c0 + o.dx, h - o.dy, cols);
  return (a - b).array().square().sum();
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double rank = q / 100.0 * static_cast<double>(v.size() - 1);
  auto lo = static_cast<size_t>(rank);
  if (lo + 1 >= v.size()) return v.back();
  double frac = rank - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

Variogram semivariogram(const std::vector<ImageTensor>& fields, const VariogramOptions& options) {
  if (fields.empty()) throw std::invalid_argument("semivariogram: no fields");
  if (fields[0].channels != 1)
    throw std::invalid_argument("semivariogram: fields must be single-channel");
  for (size_t i = 1; i < fields.size(); ++i)
    require_same_shape(fields[0], fields[i], "semivariogram");
  if (!(options.delta > 0.0)) throw std::invalid_argument("semivariogram: delta must be positive");

  const int h = fields[0].height, w = fields[0].width;
  const double max_lag =
      options.max_lag > 0.0 ? options.max_lag : 0.5 * std::hypot(double(h - 1), double(w - 1));
  const int n_bins = static_cast<int>(std::floor(max_lag));
  if (n_bins < 1) throw std::invalid_argument("semivariogram: max_lag too small for any bin");

  // Enumerate displacement classes once; each offset lands in every integer
  // bin whose (h - delta, h + delta] window contains its distance.
  std::vector<std::vector<Offset>> bin_offsets(static_cast<size_t>(n_bins));
  for (int dy = 0; dy < h; ++dy) {
    for (int dx = dy == 0 ? 1 : -(w - 1); dx < w; ++dx) {
      double dist = std::hypot(double(dy), double(dx));
      int lo = std::max(1, static_cast<int>(std::ceil(dist - options.delta)));
      for (int b = lo; b <= n_bins && b - options.delta < dist; ++b)
        if (dist <= b + options.delta) bin_offsets[static_cast<size_t>(b - 1)].push_back({dy, dx, dist});
    }
  }

  const int n_fields = static_cast<int>(fields.size());
  const int channels = fields[0].channels;
  Eigen::MatrixXd per_field(n_fields, n_bins);
  Eigen::Array<std::int64_t, Eigen::Dynamic, 1> counts =
      Eigen::Array<std::int64_t, Eigen::Dynamic, 1>::Zero(n_bins);
  bool any_subsampled = false;

  for (int b = 0; b < n_bins; ++b) {
    std::int64_t total = 0;
    for (const Offset& o : bin_offsets[static_cast<size_t>(b)]) total += offset_pairs(h, w, o);
    total *= channels;
    counts[b] = total;
    if (total == 0) continue;

    const bool exact = total <= options.pair_budget;
    if (!exact) any_subsampled = true;
    for (int fi = 0; fi < n_fields; ++fi) {
      double sum_sq = 0.0;
      std::int64_t used = 0;
      if (exact) {
        for (const Offset& o : bin_offsets[static_cast<size_t>(b)])
          for (int c = 0; c < channels; ++c) sum_sq += offset_sum_sq(fields[static_cast<size_t>(fi)], c, o);
        used = total;
      } else {
        // Subsample pairs proportionally per offset, uniform anchors with
        // replacement. Seeded per (field, bin), so results are reproducible
        // and independent of evaluation order.
        Rng rng(derive_stream(options.seed,
                              static_cast<std::uint64_t>(fi) * 131071u + static_cast<std::uint64_t>(b)));
        const ImageTensor& f = fields[static_cast<size_t>(fi)];
        for (const Offset& o : bin_offsets[static_cast<size_t>(b)]) {
          std::int64_t pairs_here = offset_pairs(h, w, o) * channels;
          std::int64_t m = std::max<std::int64_t>(
              1, (pairs_here * options.pair_budget + total / 2) / total);
          int rows = h - o.dy, cols = w - std::abs(o.dx);
          int c0 = std::max(0, -o.dx);
          for (std::int64_t s = 0; s < m; ++s) {
            auto idx = rng.uniform_int(static_cast<std::uint64_t>(rows) * cols * channels);
            int c = static_cast<int>(idx / (static_cast<std::uint64_t>(rows) * cols));
            auto rem = idx % (static_cast<std::uint64_t>(rows) * cols);
            int y = static_cast<int>(rem / cols);
            int x = c0 + static_cast<int>(rem % cols);
            double d = f(c, y, x) - f(c, y + o.dy, x + o.dx);
            sum_sq += d * d;
          }
          used += m;
        }
      }
      per_field(fi, b) = sum_sq / (2.0 * static_cast<double>(used));
    }
  }

  // Keep populated bins only.
  std::vector<int> keep;
  for (int b = 0; b < n_bins; ++b)
    if (counts[b] > 0) keep.push_back(b);
  if (keep.empty()) throw std::invalid_argument("semivariogram: no pairs within max_lag");

  Variogram out;
  out.delta = options.delta;
  out.subsampled = any_subsampled;
  out.bin_centers.resize(static_cast<Eigen::Index>(keep.size()));
  out.gamma.resize(static_cast<Eigen::Index>(keep.size()));
  out.band_low.resize(static_cast<Eigen::Index>(keep.size()));
  out.band_high.resize(static_cast<Eigen::Index>(keep.size()));
  out.pair_counts.resize(static_cast<Eigen::Index>(keep.size()));
  std::vector<double> column(static_cast<size_t>(n_fields));
  for (size_t i = 0; i < keep.size(); ++i) {
    int b = keep[i];
    out.bin_centers[static_cast<Eigen::Index>(i)] = b + 1;
    out.pair_counts[static_cast<Eigen::Index>(i)] = counts[b];
    out.gamma[static_cast<Eigen::Index>(i)] = per_field.col(b).mean();
    for (int fi = 0; fi < n_fields; ++fi) column[static_cast<size_t>(fi)] = per_field(fi, b);
    out.band_low[static_cast<Eigen::Index>(i)] = percentile(column, 2.5);
    out.band_high[static_cast<Eigen::Index>(i)] = percentile(column, 97.5);
  }
  return out;
}

FeatureSet feature_extract(const std::vector<ImageTensor>& images, FeatureMethod method,
                           int pca_dim, const std::vector<ImageTensor>* fit_on) {
  if (images.empty()) throw std::invalid_argument("feature_extract: no images");
  for (size_t i = 1; i < images.size(); ++i)
    require_same_shape(images[0], images[i], "feature_extract");

  const Eigen::Index dim = images[0].size();
  Eigen::MatrixXd flat(static_cast<Eigen::Index>(images.size()), dim);
  for (size_t i = 0; i < images.size(); ++i)
    flat.row(static_cast<Eigen::Index>(i)) = images[i].data.matrix().transpose();

  if (method == FeatureMethod::flatten) {
    return {std::move(flat), "flatten"};
  }

  const std::vector<ImageTensor>& basis_images = fit_on ? *fit_on : images;
  if (basis_images.empty()) throw std::invalid_argument("feature_extract: empty fit set");
  require_same_shape(images[0], basis_images[0], "feature_extract: fit set");
  if (pca_dim < 1 || pca_dim > dim)
    throw std::invalid_argument("feature_extract: pca_dim outside 1..pixel count");
  if (static_cast<Eigen::Index>(basis_images.size()) < pca_dim)
    throw std::invalid_argument("feature_extract: fit set smaller than pca_dim");

  Eigen::MatrixXd fit(static_cast<Eigen::Index>(basis_images.size()), dim);
  for (size_t i = 0; i < basis_images.size(); ++i)
    fit.row(static_cast<Eigen::Index>(i)) = basis_images[i].data.matrix().transpose();
  Eigen::RowVectorXd mean = fit.colwise().mean();
  Eigen::MatrixXd centered = fit.rowwise() - mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  Eigen::MatrixXd components = svd.matrixV().leftCols(pca_dim);

  FeatureSet out;
  out.matrix = (flat.rowwise() - mean) * components;
  out.provenance = "flatten_pca d=" + std::to_string(pca_dim);
  return out;
}

void save_features(const std::string& path, const FeatureSet& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("save_features: cannot open '" + path + "' for writing");
  os.write("PDMF", 4);
  io::write_u32(os, 1);
  io::write_u64(os, static_cast<std::uint64_t>(features.count()));
  io::write_u64(os, static_cast<std::uint64_t>(features.dim()));
  for (Eigen::Index i = 0; i < features.count(); ++i)
    for (Eigen::Index j = 0; j < features.dim(); ++j) io::write_f64(os, features.matrix(i, j));
  if (!os) throw DataError("save_features: write to '" + path + "' failed");
}

FeatureSet load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_features: cannot open '" + path + "'");
  const std::string ctx = "features '" + path + "'";
  io::expect_magic(is, "PDMF", ctx);
  std::uint32_t version = io::read_u32(is, ctx);
  if (version != 1) throw DataError(ctx + ": unsupported version " + std::to_string(version));
  std::uint64_t n = io::read_u64(is, ctx);
  std::uint64_t d = io::read_u64(is, ctx);
  if (n == 0 || d == 0) throw DataError(ctx + ": empty feature matrix");
  if (n > (1u << 24) || d > (1u << 24)) throw DataError(ctx + ": implausible dimensions");
  FeatureSet f;
  f.provenance = path;
  f.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < d; ++j)
      f.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = io::read_f64(is, ctx);
  if (!f.matrix.allFinite()) throw DataError(ctx + ": non-finite feature values");
  return f;
}

}  // namespace pdm
