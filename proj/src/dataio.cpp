#include "pdm/dataio.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pdm/error.hpp"
#include "pdm/io_util.hpp"
#include "pdm/rng.hpp"

namespace pdm {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* mode_name(NormalizationMode m) {
  return m == NormalizationMode::unit_interval ? "unit_interval" : "symmetric";
}

NormalizationMode mode_from_name(const std::string& s, const std::string& ctx) {
  if (s == "unit_interval") return NormalizationMode::unit_interval;
  if (s == "symmetric") return NormalizationMode::symmetric;
  throw DataError(ctx + ": unknown normalization mode '" + s + "'");
}

}  // namespace

Dataset normalize(const Dataset& input, NormalizationMode mode) {
  Dataset out;
  out.labels = input.labels;
  out.meta = input.meta;
  out.images.reserve(input.images.size());
  out.ledger.reserve(input.images.size());

  for (size_t i = 0; i < input.images.size(); ++i) {
    const ImageTensor& img = input.images[i];
    if (!all_finite(img))
      throw DataError("normalize: sample " + std::to_string(i) + " has non-finite values");
    double lo = img.data.minCoeff();
    double hi = img.data.maxCoeff();

    NormalizationRecord rec;
    rec.sample_id = static_cast<std::int64_t>(i);
    rec.mode = mode;
    ImageTensor scaled = img;
    if (hi == lo) {
      // Constant image: map to zero, remember the level in the offset.
      rec.offset = lo;
      rec.scale = 1.0;
      scaled.data.setZero();
    } else if (mode == NormalizationMode::unit_interval) {
      rec.offset = lo;
      rec.scale = hi - lo;
      scaled.data = (img.data - lo) / (hi - lo);
    } else {
      // [-1, 1]: x -> 2 (x - lo) / (hi - lo) - 1 == (x - offset) / scale
      rec.offset = 0.5 * (lo + hi);
      rec.scale = 0.5 * (hi - lo);
      scaled.data = (img.data - rec.offset) / rec.scale;
    }
    out.images.push_back(std::move(scaled));
    out.ledger.push_back(rec);
  }
  return out;
}

RescaledImages rescale_generated(const std::vector<ImageTensor>& images,
                                 const std::vector<NormalizationRecord>& ledger,
                                 std::uint64_t seed) {
  if (ledger.empty()) throw std::invalid_argument("rescale_generated: ledger is empty");
  RescaledImages out;
  out.images.reserve(images.size());
  out.record_indices.reserve(images.size());
  Rng rng(derive_stream(seed, 0x7265736361ULL));
  for (const ImageTensor& img : images) {
    auto idx = static_cast<std::int64_t>(rng.uniform_int(ledger.size()));
    const NormalizationRecord& rec = ledger[static_cast<size_t>(idx)];
    ImageTensor scaled = img;
    scaled.data = img.data * rec.scale + rec.offset;
    out.images.push_back(std::move(scaled));
    out.record_indices.push_back(idx);
  }
  return out;
}

void save_ledger(const std::string& path, const std::vector<NormalizationRecord>& ledger) {
  std::ofstream os(path);
  if (!os) throw DataError("save_ledger: cannot open '" + path + "' for writing");
  os << "sample_id,mode,offset,scale\n";
  for (const auto& rec : ledger)
    os << rec.sample_id << "," << mode_name(rec.mode) << "," << format_g17(rec.offset) << ","
       << format_g17(rec.scale) << "\n";
  if (!os) throw DataError("save_ledger: write to '" + path + "' failed");
}

std::vector<NormalizationRecord> load_ledger(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("load_ledger: cannot open '" + path + "'");
  const std::string ctx = "ledger '" + path + "'";
  std::string line;
  if (!std::getline(is, line) || line != "sample_id,mode,offset,scale")
    throw DataError(ctx + ": missing or wrong header row");
  std::vector<NormalizationRecord> ledger;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id_s, mode_s, off_s, scale_s;
    if (!std::getline(ls, id_s, ',') || !std::getline(ls, mode_s, ',') ||
        !std::getline(ls, off_s, ',') || !std::getline(ls, scale_s))
      throw DataError(ctx + ": malformed row at line " + std::to_string(line_no));
    NormalizationRecord rec;
    try {
      rec.sample_id = std::stoll(id_s);
      rec.offset = std::stod(off_s);
      rec.scale = std::stod(scale_s);
    } catch (const std::exception&) {
      throw DataError(ctx + ": unparsable number at line " + std::to_string(line_no));
    }
    rec.mode = mode_from_name(mode_s, ctx);
    if (!(rec.scale != 0.0) || !std::isfinite(rec.scale) || !std::isfinite(rec.offset))
      throw DataError(ctx + ": invalid offset/scale at line " + std::to_string(line_no));
    ledger.push_back(rec);
  }
  if (ledger.empty()) throw DataError(ctx + ": no records");
  return ledger;
}

Dataset synth_grf(int n, int side, double sigma2, double rho, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_grf: n must be positive");
  if (side < 2 || side > 64)
    throw std::invalid_argument("synth_grf: side must be in 2..64 (dense Cholesky)");
  if (!(sigma2 > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("synth_grf: sigma2 and rho must be positive");

  const int npix = side * side;
  Eigen::MatrixXd cov(npix, npix);
  for (int i = 0; i < npix; ++i) {
    int yi = i / side, xi = i % side;
    for (int j = 0; j <= i; ++j) {
      int yj = j / side, xj = j % side;
      double dist = std::hypot(double(yi - yj), double(xi - xj));
      double c = sigma2 * std::exp(-dist / rho);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  // Tiny diagonal jitter keeps the factorization stable for smooth fields.
  cov.diagonal().array() += 1e-10 * sigma2;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("synth_grf: covariance Cholesky factorization failed");
  Eigen::MatrixXd chol = llt.matrixL();

  Dataset out;
  out.meta.name = "grf";
  out.meta.source = "synth_grf side=" + std::to_string(side) + " sigma2=" + format_g17(sigma2) +
                    " rho=" + format_g17(rho);
  out.images.reserve(static_cast<size_t>(n));
  Eigen::VectorXd z(npix);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_stream(seed, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < npix; ++j) z[j] = rng.normal();
    ImageTensor img(1, side, side);
    img.data = (chol * z).array();
    out.images.push_back(std::move(img));
  }
  return out;
}

Dataset synth_gaussian(int n, int channels, int height, int width, double mu0, double sigma0_sq,
                       std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_gaussian: n must be positive");
  if (!(sigma0_sq >= 0.0)) throw std::invalid_argument("synth_gaussian: sigma0_sq negative");
  Dataset out;
  out.meta.name = "gaussian";
  out.meta.source = "synth_gaussian mu0=" + format_g17(mu0) +
                    " sigma0_sq=" + format_g17(sigma0_sq);
  const double sd = std::sqrt(sigma0_sq);
  out.images.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_stream(seed, static_cast<std::uint64_t>(i)));
    ImageTensor img(channels, height, width);
    for (Eigen::Index j = 0; j < img.size(); ++j) img.data[j] = mu0 + sd * rng.normal();
    out.images.push_back(std::move(img));
  }
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream is(images_path, std::ios::binary);
  if (!is) throw DataError("load_idx: cannot open '" + images_path + "'");
  const std::string ctx = "idx '" + images_path + "'";

  std::uint32_t magic = io::read_u32_be(is, ctx);
  if (magic != 0x00000803u)
    throw DataError(ctx + ": bad magic " + std::to_string(magic) +
                    ", expected 2051 (idx3-ubyte images)");
  std::uint32_t n = io::read_u32_be(is, ctx);
  std::uint32_t rows = io::read_u32_be(is, ctx);
  std::uint32_t cols = io::read_u32_be(is, ctx);
  if (n == 0 || rows == 0 || cols == 0 || rows > 4096 || cols > 4096 || n > (1u << 24))
    throw DataError(ctx + ": implausible dimensions " + std::to_string(n) + "x" +
                    std::to_string(rows) + "x" + std::to_string(cols));

  Dataset out;
  out.meta.name = "idx";
  out.meta.source = images_path;
  out.images.reserve(n);
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    io::read_bytes(is, buf.data(), buf.size(), ctx);
    ImageTensor img(1, static_cast<int>(rows), static_cast<int>(cols));
    for (size_t j = 0; j < buf.size(); ++j) img.data[static_cast<Eigen::Index>(j)] = buf[j];
    out.images.push_back(std::move(img));
  }

  if (!labels_path.empty()) {
    std::ifstream ls(labels_path, std::ios::binary);
    if (!ls) throw DataError("load_idx: cannot open '" + labels_path + "'");
    const std::string lctx = "idx '" + labels_path + "'";
    std::uint32_t lmagic = io::read_u32_be(ls, lctx);
    if (lmagic != 0x00000801u)
      throw DataError(lctx + ": bad magic " + std::to_string(lmagic) +
                      ", expected 2049 (idx1-ubyte labels)");
    std::uint32_t ln = io::read_u32_be(ls, lctx);
    if (ln != n)
      throw DataError(lctx + ": label count " + std::to_string(ln) +
                      " does not match image count " + std::to_string(n));
    out.labels.resize(ln);
    std::vector<unsigned char> lbuf(ln);
    io::read_bytes(ls, lbuf.data(), lbuf.size(), lctx);
    for (std::uint32_t i = 0; i < ln; ++i) out.labels[i] = lbuf[i];
  }
  return out;
}

void save_tensor(const std::string& path, const Dataset& data) {
  if (data.images.empty()) throw std::invalid_argument("save_tensor: no images");
  for (size_t i = 1; i < data.images.size(); ++i)
    require_same_shape(data.images[0], data.images[i], "save_tensor");
  if (!data.labels.empty() && data.labels.size() != data.images.size())
    throw std::invalid_argument("save_tensor: label count does not match image count");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("save_tensor: cannot open '" + path + "' for writing");
  os.write("PDMT", 4);
  io::write_u32(os, 1);
  io::write_u64(os, static_cast<std::uint64_t>(data.images.size()));
  io::write_u32(os, static_cast<std::uint32_t>(data.images[0].channels));
  io::write_u32(os, static_cast<std::uint32_t>(data.images[0].height));
  io::write_u32(os, static_cast<std::uint32_t>(data.images[0].width));
  for (const ImageTensor& img : data.images)
    for (Eigen::Index j = 0; j < img.size(); ++j) io::write_f64(os, img.data[j]);
  if (!data.labels.empty()) {
    os.write("LBLS", 4);
    io::write_u64(os, static_cast<std::uint64_t>(data.labels.size()));
    for (int l : data.labels) io::write_u32(os, static_cast<std::uint32_t>(l));
  }
  if (!os) throw DataError("save_tensor: write to '" + path + "' failed");
}

Dataset load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_tensor: cannot open '" + path + "'");
  const std::string ctx = "tensors '" + path + "'";
  io::expect_magic(is, "PDMT", ctx);
  std::uint32_t version = io::read_u32(is, ctx);
  if (version != 1) throw DataError(ctx + ": unsupported version " + std::to_string(version));
  std::uint64_t n = io::read_u64(is, ctx);
  std::uint32_t c = io::read_u32(is, ctx);
  std::uint32_t h = io::read_u32(is, ctx);
  std::uint32_t w = io::read_u32(is, ctx);
  if (n == 0 || c == 0 || h == 0 || w == 0 || n > (1u << 24) || c > 1024 || h > 65536 ||
      w > 65536)
    throw DataError(ctx + ": implausible header " + std::to_string(n) + "x" + std::to_string(c) +
                    "x" + std::to_string(h) + "x" + std::to_string(w));

  Dataset out;
  out.meta.name = "pdmt";
  out.meta.source = path;
  out.images.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    ImageTensor img(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    for (Eigen::Index j = 0; j < img.size(); ++j) img.data[j] = io::read_f64(is, ctx);
    if (!all_finite(img))
      throw DataError(ctx + ": non-finite values in sample " + std::to_string(i));
    out.images.push_back(std::move(img));
  }

  // Optional trailing blocks.
  while (true) {
    char tag[4];
    is.read(tag, 4);
    if (is.gcount() == 0 && is.eof()) break;
    if (is.gcount() != 4) throw DataError(ctx + ": truncated block tag");
    std::uint64_t count = io::read_u64(is, ctx);
    if (std::string(tag, 4) == "LBLS") {
      if (count != n) throw DataError(ctx + ": LBLS count does not match image count");
      out.labels.resize(n);
      for (std::uint64_t i = 0; i < n; ++i)
        out.labels[i] = static_cast<int>(io::read_u32(is, ctx));
    } else {
      throw DataError(ctx + ": unknown block '" + std::string(tag, 4) + "'");
    }
  }
  return out;
}

void export_pgm(const std::string& path, const std::vector<ImageTensor>& images, int rows,
                int cols, bool fixed_range, double lo, double hi) {
  if (images.empty()) throw std::invalid_argument("export_pgm: no images");
  if (rows < 1 || cols < 1 || static_cast<size_t>(rows) * cols < images.size())
    throw std::invalid_argument("export_pgm: grid too small for image count");
  if (images[0].channels != 1)
    throw std::invalid_argument("export_pgm: images must be single-channel");
  for (size_t i = 1; i < images.size(); ++i)
    require_same_shape(images[0], images[i], "export_pgm");
  if (fixed_range && !(hi > lo))
    throw std::invalid_argument("export_pgm: fixed range needs hi > lo");

  const int ih = images[0].height, iw = images[0].width;
  const int H = rows * ih + (rows - 1);
  const int W = cols * iw + (cols - 1);
  std::vector<unsigned char> canvas(static_cast<size_t>(H) * W, 0);

  for (size_t i = 0; i < images.size(); ++i) {
    const ImageTensor& img = images[i];
    double a = lo, b = hi;
    if (!fixed_range) {
      a = img.data.minCoeff();
      b = img.data.maxCoeff();
    }
    int gy = static_cast<int>(i) / cols, gx = static_cast<int>(i) % cols;
    int oy = gy * (ih + 1), ox = gx * (iw + 1);
    for (int y = 0; y < ih; ++y)
      for (int x = 0; x < iw; ++x) {
        double v = img(0, y, x);
        unsigned char px;
        if (b == a) {
          px = 127;
        } else {
          double s = (v - a) / (b - a);
          s = std::clamp(s, 0.0, 1.0);
          px = static_cast<unsigned char>(std::lround(s * 255.0));
        }
        canvas[static_cast<size_t>(oy + y) * W + (ox + x)] = px;
      }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("export_pgm: cannot open '" + path + "' for writing");
  os << "P5\n" << W << " " << H << "\n255\n";
  os.write(reinterpret_cast<const char*>(canvas.data()),
           static_cast<std::streamsize>(canvas.size()));
  if (!os) throw DataError("export_pgm: write to '" + path + "' failed");
}

void save_variogram_csv(const std::string& path, const Variogram& v) {
  std::ofstream os(path);
  if (!os) throw DataError("save_variogram_csv: cannot open '" + path + "' for writing");
  os << "h,gamma,count,band_low,band_high\n";
  for (Eigen::Index i = 0; i < v.bin_centers.size(); ++i)
    os << format_g17(v.bin_centers[i]) << "," << format_g17(v.gamma[i]) << ","
       << v.pair_counts[i] << "," << format_g17(v.band_low[i]) << ","
       << format_g17(v.band_high[i]) << "\n";
  if (!os) throw DataError("save_variogram_csv: write to '" + path + "' failed");
}

}  // namespace pdm
