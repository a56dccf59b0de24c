#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdm/eval.hpp"
#include "pdm/image.hpp"

namespace pdm {

enum class NormalizationMode { unit_interval, symmetric };

// Per-sample affine record: normalized = (original - offset) / scale.
struct NormalizationRecord {
  std::int64_t sample_id = 0;
  NormalizationMode mode = NormalizationMode::unit_interval;
  double offset = 0.0;
  double scale = 1.0;
};

struct DatasetMeta {
  std::string name;
  std::string source;
};

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;                  // empty when absent
  std::vector<NormalizationRecord> ledger;  // empty when not normalized
  DatasetMeta meta;

  int count() const { return static_cast<int>(images.size()); }
};

// Per-sample min/max normalization to [0, 1] (unit_interval) or [-1, 1]
// (symmetric). Constant images map to 0 with scale 1. Every sample gets a
// ledger row so generated outputs can be mapped back.
Dataset normalize(const Dataset& input, NormalizationMode mode);

struct RescaledImages {
  std::vector<ImageTensor> images;
  std::vector<std::int64_t> record_indices;  // ledger row drawn for each image
};

// Inverse of normalize for generated samples: each image picks a uniformly
// random ledger row (seeded) and applies original = normalized * scale + offset.
RescaledImages rescale_generated(const std::vector<ImageTensor>& images,
                                 const std::vector<NormalizationRecord>& ledger,
                                 std::uint64_t seed);

void save_ledger(const std::string& path, const std::vector<NormalizationRecord>& ledger);
std::vector<NormalizationRecord> load_ledger(const std::string& path);

// n stationary Gaussian random fields on a side x side grid with exponential
// covariance sigma2 * exp(-dist / rho), drawn by dense Cholesky. The target
// semivariogram is gamma(h) = sigma2 * (1 - exp(-h / rho)).
Dataset synth_grf(int n, int side, double sigma2, double rho, std::uint64_t seed);

// n images of iid N(mu0, sigma0_sq) pixels with the given shape.
Dataset synth_gaussian(int n, int channels, int height, int width, double mu0, double sigma0_sq,
                       std::uint64_t seed);

// IDX (big-endian) image file, optionally paired with an IDX label file.
// Pixels come back as doubles in [0, 255].
Dataset load_idx(const std::string& images_path, const std::string& labels_path = "");

// PDMT tensor container.
void save_tensor(const std::string& path, const Dataset& data);
Dataset load_tensor(const std::string& path);

// Binary 8-bit PGM contact sheet: single-channel images laid out on a
// rows x cols grid with a 1-pixel separator. Each image is min/max stretched
// independently unless a fixed [lo, hi] range is supplied; constant images
// render mid-gray.
void export_pgm(const std::string& path, const std::vector<ImageTensor>& images, int rows,
                int cols, bool fixed_range = false, double lo = 0.0, double hi = 1.0);

void save_variogram_csv(const std::string& path, const Variogram& v);

}  // namespace pdm
