#pragma once

// Target-similarity maps: normalized cross-correlation (gray and color),
// region-averaged SSIM with border trimming, and externally supplied maps.

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsearch/core.hpp"
#include "vsearch/dataset_io.hpp"
#include "vsearch/image.hpp"

namespace vsearch {

enum class SimilarityKind { cross_correlation, ssim, external_map };

inline const char* to_string(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::cross_correlation: return "cross_correlation";
    case SimilarityKind::ssim: return "ssim";
    case SimilarityKind::external_map: return "external_map";
  }
  return "?";
}

inline SimilarityKind similarity_kind_from_string(const std::string& s) {
  if (s == "cross_correlation") return SimilarityKind::cross_correlation;
  if (s == "ssim") return SimilarityKind::ssim;
  if (s == "external_map") return SimilarityKind::external_map;
  throw Error("unknown similarity kind '" + s + "'");
}

struct SimilaritySource {
  SimilarityKind kind = SimilarityKind::cross_correlation;
  /// external_map only. May contain "{trial_id}", substituted per trial;
  /// relative paths resolve against the dataset root.
  std::string map_path;

  void validate() const {
    if (kind == SimilarityKind::external_map && map_path.empty()) throw Error("external_map requires map_path");
  }
};

inline std::string expand_trial_pattern(std::string pattern, const std::string& trial_id) {
  const std::string key = "{trial_id}";
  for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos + trial_id.size()))
    pattern.replace(pos, key.size(), trial_id);
  return pattern;
}

namespace detail {

inline void require_fits(const GrayImage& image, const GrayImage& tmpl) {
  if (tmpl.rows() > image.rows() || tmpl.cols() > image.cols())
    throw Error("template (" + std::to_string(tmpl.rows()) + "x" + std::to_string(tmpl.cols()) +
                ") larger than image (" + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) + ")");
}

// Summed-area table over a zero-padded copy of `src`; pad cells on each side.
class PaddedIntegral {
 public:
  PaddedIntegral(const GrayImage& src, int pad_r, int pad_c, bool squared)
      : pad_r_(pad_r), pad_c_(pad_c), rows_(src.rows() + 2 * pad_r + 1), cols_(src.cols() + 2 * pad_c + 1) {
    table_.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (int r = 1; r < rows_; ++r) {
      double run = 0.0;
      for (int c = 1; c < cols_; ++c) {
        const int sr = r - 1 - pad_r_;
        const int sc = c - 1 - pad_c_;
        double v = 0.0;
        if (sr >= 0 && sr < src.rows() && sc >= 0 && sc < src.cols()) v = squared ? src(sr, sc) * src(sr, sc) : src(sr, sc);
        run += v;
        at(r, c) = at(r - 1, c) + run;
      }
    }
  }

  /// Sum over source rows [r0, r0+h) and cols [c0, c0+w); coordinates may
  /// reach into the padding.
  double sum(int r0, int c0, int h, int w) const {
    const int a = r0 + pad_r_;
    const int b = c0 + pad_c_;
    return at(a + h, b + w) - at(a, b + w) - at(a + h, b) + at(a, b);
  }

 private:
  double& at(int r, int c) { return table_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return table_[static_cast<std::size_t>(r) * cols_ + c]; }

  int pad_r_, pad_c_, rows_, cols_;
  std::vector<double> table_;
};

}  // namespace detail

/// Normalized cross-correlation of `tmpl` against the zero-padded image
/// window centered on every pixel. Windows or templates without variance
/// score 0.
inline Grid<double> cross_correlation_map(const GrayImage& image, const GrayImage& tmpl) {
  detail::require_fits(image, tmpl);
  const int th = tmpl.rows(), tw = tmpl.cols();
  const int oy = th / 2, ox = tw / 2;
  const double n = static_cast<double>(th) * tw;

  double tmean = 0.0;
  for (double v : tmpl) tmean += v;
  tmean /= n;
  Grid<double> centered(th, tw);
  double tvar = 0.0;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    centered[i] = tmpl[i] - tmean;
    tvar += centered[i] * centered[i];
  }

  Grid<double> out(image.rows(), image.cols(), 0.0);
  if (tvar <= 1e-12 * std::max(1.0, tmean * tmean * n)) return out;

  const detail::PaddedIntegral sums(image, th, tw, false);
  const detail::PaddedIntegral squares(image, th, tw, true);
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const int r0 = r - oy, c0 = c - ox;
      const double s = sums.sum(r0, c0, th, tw);
      const double ss = squares.sum(r0, c0, th, tw);
      const double wvar = ss - s * s / n;
      if (wvar <= 1e-10 * std::max(1.0, ss)) continue;
      double num = 0.0;
      for (int i = 0; i < th; ++i) {
        const int ir = r0 + i;
        if (ir < 0 || ir >= image.rows()) continue;
        const int j0 = std::max(0, -c0);
        const int j1 = std::min(tw, image.cols() - c0);
        for (int j = j0; j < j1; ++j) num += centered(i, j) * image(ir, c0 + j);
      }
      out(r, c) = std::clamp(num / std::sqrt(tvar * wvar), -1.0, 1.0);
    }
  }
  return out;
}

/// Per-channel cross-correlation combined with the luma weights.
inline Grid<double> cross_correlation_color(const std::vector<GrayImage>& image, const std::vector<GrayImage>& tmpl) {
  if (image.size() != 3 || tmpl.size() != 3)
    throw Error("channel-count mismatch: expected 3 image and 3 template channels, got " +
                std::to_string(image.size()) + " and " + std::to_string(tmpl.size()));
  Grid<double> out(image[0].rows(), image[0].cols(), 0.0);
  for (int ch = 0; ch < 3; ++ch) {
    const auto m = cross_correlation_map(image[ch], tmpl[ch]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += kLumaWeights[ch] * m[i];
  }
  return out;
}

inline Grid<double> cross_correlation_color(const RgbImage& image, const RgbImage& tmpl) {
  return cross_correlation_color(std::vector<GrayImage>(image.channels.begin(), image.channels.end()),
                                 std::vector<GrayImage>(tmpl.channels.begin(), tmpl.channels.end()));
}

struct SsimParams {
  double dynamic_range = 255.0;
  double sigma = 1.5;
  int radius = 5;  // 11 taps

  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }
};

namespace detail {

// Normalized 1D Gaussian weights for every position of an axis of length n,
// truncated to the axis.
struct AxisWeights {
  std::vector<int> first;              // first tap index per position
  std::vector<std::vector<double>> w;  // weights per position
};

inline AxisWeights axis_weights(int n, const SsimParams& p) {
  AxisWeights aw;
  aw.first.resize(n);
  aw.w.resize(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - p.radius);
    const int hi = std::min(n - 1, i + p.radius);
    aw.first[i] = lo;
    double total = 0.0;
    for (int k = lo; k <= hi; ++k) {
      const double d = k - i;
      aw.w[i].push_back(std::exp(-d * d / (2 * p.sigma * p.sigma)));
      total += aw.w[i].back();
    }
    for (double& v : aw.w[i]) v /= total;
  }
  return aw;
}

// Mean local SSIM between two equally sized patches, given precomputed
// truncated weights for their shape.
inline double mean_patch_ssim(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
                              const AxisWeights& rw, const AxisWeights& cw, const SsimParams& p,
                              std::vector<double>& scratch) {
  // Five moment planes filtered along columns first, then along rows.
  const std::size_t n = static_cast<std::size_t>(h) * w;
  scratch.assign(5 * n, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double m[5] = {0, 0, 0, 0, 0};
      const auto& wt = cw.w[c];
      for (std::size_t k = 0; k < wt.size(); ++k) {
        const std::size_t idx = static_cast<std::size_t>(r) * w + cw.first[c] + k;
        const double a = x[idx], b = y[idx];
        m[0] += wt[k] * a;
        m[1] += wt[k] * b;
        m[2] += wt[k] * a * a;
        m[3] += wt[k] * b * b;
        m[4] += wt[k] * a * b;
      }
      for (int q = 0; q < 5; ++q) scratch[q * n + static_cast<std::size_t>(r) * w + c] = m[q];
    }
  }
  const double c1 = p.c1(), c2 = p.c2();
  double total = 0.0;
  for (int r = 0; r < h; ++r) {
    const auto& wt = rw.w[r];
    for (int c = 0; c < w; ++c) {
      double m[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < wt.size(); ++k) {
        const std::size_t idx = static_cast<std::size_t>(rw.first[r] + k) * w + c;
        for (int q = 0; q < 5; ++q) m[q] += wt[k] * scratch[q * n + idx];
      }
      const double mx = m[0], my = m[1];
      const double vx = m[2] - mx * mx, vy = m[3] - my * my, cxy = m[4] - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace detail

/// Region-averaged SSIM. For every pixel p the template-sized image region
/// centered on p is compared with the template; template pixels that fall
/// outside the image are trimmed and the remainder is compared with the
/// matching region. Inside a region, local statistics use an 11-tap Gaussian
/// window (sigma 1.5) truncated and renormalized at the region edges.
inline Grid<double> ssim_map(const GrayImage& image, const GrayImage& tmpl, const SsimParams& params = {}) {
  detail::require_fits(image, tmpl);
  const int th = tmpl.rows(), tw = tmpl.cols();
  const int oy = th / 2, ox = tw / 2;
  Grid<double> out(image.rows(), image.cols());

  // Truncated weights only depend on the trimmed region extent.
  std::vector<std::optional<detail::AxisWeights>> row_cache(th + 1), col_cache(tw + 1);
  auto weights = [&](std::vector<std::optional<detail::AxisWeights>>& cache, int n) -> const detail::AxisWeights& {
    if (!cache[n]) cache[n] = detail::axis_weights(n, params);
    return *cache[n];
  };

  std::vector<double> x, y, scratch;
  for (int r = 0; r < image.rows(); ++r) {
    const int ir0 = std::max(0, r - oy), ir1 = std::min(image.rows(), r - oy + th);
    for (int c = 0; c < image.cols(); ++c) {
      const int ic0 = std::max(0, c - ox), ic1 = std::min(image.cols(), c - ox + tw);
      const int h = ir1 - ir0, w = ic1 - ic0;
      x.resize(static_cast<std::size_t>(h) * w);
      y.resize(x.size());
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          x[static_cast<std::size_t>(i) * w + j] = tmpl(ir0 + i - (r - oy), ic0 + j - (c - ox));
          y[static_cast<std::size_t>(i) * w + j] = image(ir0 + i, ic0 + j);
        }
      out(r, c) = detail::mean_patch_ssim(x, y, h, w, weights(row_cache, h), weights(col_cache, w), params, scratch);
    }
  }
  return out;
}

/// Affine rescale to [0, 1]; a constant map becomes all 0.5.
inline Grid<double> minmax_normalize(Grid<double> g) {
  const auto [lo_it, hi_it] = std::minmax_element(g.begin(), g.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    for (double& v : g) v = 0.5;
    return g;
  }
  for (double& v : g) v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return g;
}

/// Block mean over fovea-sized cells; partial edge cells average the pixels
/// they actually contain.
inline ProbabilityGrid downsample_to_grid(const Grid<double>& map, const DatasetSpec& spec) {
  Grid<double> src = map;
  if (map.rows() != spec.image_height || map.cols() != spec.image_width)
    src = resample_bilinear(map, spec.image_height, spec.image_width);
  const int cs = spec.cell_size;
  ProbabilityGrid out(spec.grid_rows(), spec.grid_cols(), 0.0);
  for (int gr = 0; gr < out.rows(); ++gr) {
    for (int gc = 0; gc < out.cols(); ++gc) {
      const int r1 = std::min(src.rows(), (gr + 1) * cs), c1 = std::min(src.cols(), (gc + 1) * cs);
      double sum = 0.0;
      for (int r = gr * cs; r < r1; ++r)
        for (int c = gc * cs; c < c1; ++c) sum += src(r, c);
      out(gr, gc) = sum / (static_cast<double>(r1 - gr * cs) * (c1 - gc * cs));
    }
  }
  return out;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// Where similarity inputs come from and how they are computed.
struct SimilarityContext {
  fs::path dataset_root;
  /// Resolution at which template matching runs; empty means native.
  std::optional<Dims> working;
  /// FGRID cache of raw template-matching maps; empty disables caching.
  fs::path cache_dir;
};

namespace detail {

inline GrayImage resize_to(const GrayImage& g, int rows, int cols) { return resample_bilinear(g, rows, cols); }

inline DecodedImage scale_decoded(const DecodedImage& d, double sy, double sx) {
  const int rows = std::max(1, static_cast<int>(std::lround(d.rows() * sy)));
  const int cols = std::max(1, static_cast<int>(std::lround(d.cols() * sx)));
  DecodedImage out;
  for (const auto& p : d.planes) out.planes.push_back(resize_to(p, rows, cols));
  return out;
}

// Raw template-matching map at working resolution, quantized to binary32 so
// that cached and freshly computed maps are indistinguishable.
inline Grid<double> raw_template_map(const Trial& trial, SimilarityKind kind, const DatasetSpec& spec,
                                     const SimilarityContext& ctx) {
  const fs::path image_path = ctx.dataset_root / trial.image_ref;
  const fs::path tmpl_path = ctx.dataset_root / trial.target_template_ref;
  const std::string image_bytes = read_text(image_path);
  const std::string tmpl_bytes = read_text(tmpl_path);
  std::string token = to_string(kind);
  if (ctx.working) token += "@" + std::to_string(ctx.working->height) + "x" + std::to_string(ctx.working->width);
  if (spec.color) token += "+color";

  fs::path cache_file;
  if (!ctx.cache_dir.empty()) {
    cache_file = ctx.cache_dir / (sha256_hex(image_bytes + tmpl_bytes + token) + ".fgrid");
    if (fs::exists(cache_file)) return read_fgrid(cache_file);
  }

  DecodedImage image = load_image(image_path);
  DecodedImage tmpl = load_image(tmpl_path);
  if (ctx.working && (ctx.working->height != image.rows() || ctx.working->width != image.cols())) {
    const double sy = static_cast<double>(ctx.working->height) / image.rows();
    const double sx = static_cast<double>(ctx.working->width) / image.cols();
    DecodedImage resized;
    for (const auto& p : image.planes) resized.planes.push_back(resize_to(p, ctx.working->height, ctx.working->width));
    image = std::move(resized);
    tmpl = scale_decoded(tmpl, sy, sx);
  }

  Grid<double> raw;
  if (kind == SimilarityKind::cross_correlation && spec.color) {
    const RgbImage a = image.rgb(), b = tmpl.rgb();
    raw = cross_correlation_color(a, b);
  } else if (kind == SimilarityKind::cross_correlation) {
    raw = cross_correlation_map(image.gray(), tmpl.gray());
  } else {
    raw = ssim_map(image.gray(), tmpl.gray());
  }
  for (double& v : raw) v = static_cast<float>(v);
  if (!cache_file.empty()) {
    fs::create_directories(ctx.cache_dir);
    // Write-then-rename keeps concurrent workers from reading a partial file.
    const fs::path tmp = cache_file.string() + ".tmp" + std::to_string(stable_hash(trial.trial_id));
    save_map(raw, tmp);
    fs::rename(tmp, cache_file);
  }
  return raw;
}

}  // namespace detail

/// Similarity map for one trial, min-max normalized to [0, 1], at the
/// dataset's native image resolution.
inline Grid<double> build_similarity(const Trial& trial, const SimilaritySource& src, const DatasetSpec& spec,
                                     const SimilarityContext& ctx = {}) {
  src.validate();
  Grid<double> raw;
  if (src.kind == SimilarityKind::external_map) {
    fs::path path = expand_trial_pattern(src.map_path, trial.trial_id);
    if (path.is_relative()) path = ctx.dataset_root / path;
    if (!fs::exists(path)) throw Error("missing similarity map " + path.string());
    raw = load_map(path, spec.image_height, spec.image_width);
  } else {
    if (!trial.has_template()) throw Error("template required");
    raw = detail::raw_template_map(trial, src.kind, spec, ctx);
  }
  Grid<double> normalized = minmax_normalize(std::move(raw));
  if (normalized.rows() != spec.image_height || normalized.cols() != spec.image_width)
    normalized = resample_bilinear(normalized, spec.image_height, spec.image_width);
  return normalized;
}

}  // namespace vsearch
