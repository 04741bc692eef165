// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <Eigen/Eigenvalues>
#include <sstream>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw InputError(std::string(what) + ": shapes differ " + a.shape().str() + " vs " + b.shape().str());
  }
  if (a.empty()) throw InputError(std::string(what) + ": empty input");
}

std::vector<double> gaussian_taps(int window, double sigma) {
  std::vector<double> taps(window);
  const int r = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    taps[i] = std::exp(-((i - r) * (i - r)) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable valid-mode filtering of one plane.
std::vector<double> filter_valid(const double* src, int h, int w, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * src[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

std::string format_metric(const std::optional<double>& v, int precision) {
  if (!v) return "null";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, *v);
  return buf;
}

}  // namespace

Tensor to_display(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
  return out;
}

double l1_percent(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "l1_percent");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
  return 100.0 * acc / static_cast<double>(pred.size());
}

double masked_l1_percent(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  require_same(pred, gt, "masked_l1_percent");
  const Shape s = pred.shape();
  if (!(mask.shape() == Shape{s.n, 1, s.h, s.w})) {
    throw InputError("masked_l1_percent: mask " + mask.shape().str() + " does not match " + s.str());
  }
  double acc = 0.0;
  double count = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const double* m = mask.plane(n, 0);
    for (int c = 0; c < s.c; ++c) {
      const double* p = pred.plane(n, c);
      const double* g = gt.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        if (m[i] > 0.5) {
          acc += std::abs(p[i] - g[i]);
          count += 1.0;
        }
      }
    }
  }
  return count > 0.0 ? 100.0 * acc / count : 0.0;
}

double mean_squared_error(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "mean_squared_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double psnr(const Tensor& pred, const Tensor& gt) {
  const double mse = mean_squared_error(pred, gt);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& pred, const Tensor& gt, const SsimOptions& options) {
  require_same(pred, gt, "ssim");
  const Shape s = pred.shape();
  if (s.h < options.window || s.w < options.window) {
    throw InputError("ssim: image " + s.str() + " is smaller than the " + std::to_string(options.window) +
                     "x" + std::to_string(options.window) + " window");
  }
  const std::vector<double> taps = gaussian_taps(options.window, options.sigma);
  const double c1 = std::pow(options.k1 * options.data_range, 2);
  const double c2 = std::pow(options.k2 * options.data_range, 2);
  std::vector<double> xx(s.plane()), yy(s.plane()), xy(s.plane());
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* x = pred.plane(n, c);
      const double* y = gt.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = filter_valid(x, s.h, s.w, taps);
      const auto my = filter_valid(y, s.h, s.w, taps);
      const auto mxx = filter_valid(xx.data(), s.h, s.w, taps);
      const auto myy = filter_valid(yy.data(), s.h, s.w, taps);
      const auto mxy = filter_valid(xy.data(), s.h, s.w, taps);
      double plane_sum = 0.0;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        plane_sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
      total += plane_sum / static_cast<double>(mx.size());
    }
  }
  return total / (static_cast<double>(s.n) * s.c);
}

// --- evaluation ---------------------------------------------------------------------

std::optional<std::size_t> bin_index(const std::vector<MaskBin>& bins, double ratio) {
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const bool last = i + 1 == bins.size();
    if (ratio >= bins[i].lower && (ratio < bins[i].upper || (last && ratio <= bins[i].upper))) return i;
  }
  return std::nullopt;
}

EvalReport evaluate(const InpaintFn& model, const std::vector<EvalCase>& cases, const std::vector<MaskBin>& bins) {
  struct Acc {
    double l1 = 0.0, psnr = 0.0, ssim = 0.0;
    std::size_t n = 0;
    void add(double a, double b, double c) {
      l1 += a;
      psnr += b;
      ssim += c;
      ++n;
    }
    void write(BinMetrics& out) const {
      out.n_images = n;
      if (n == 0) return;
      out.l1_percent = l1 / n;
      out.psnr_db = psnr / n;
      out.ssim = ssim / n;
    }
  };
  for (const MaskBin& b : bins) b.validate();
  std::vector<Acc> per_bin(bins.size());
  Acc overall;
  EvalReport report;
  for (const EvalCase& c : cases) {
    const Shape s = c.image.shape();
    if (!(c.mask.shape() == Shape{s.n, 1, s.h, s.w})) {
      throw InputError("evaluate: mask " + c.mask.shape().str() + " does not match image " + s.str());
    }
    Tensor masked = c.image;
    for (int n = 0; n < s.n; ++n) {
      for (int ch = 0; ch < s.c; ++ch) {
        double* p = masked.plane(n, ch);
        const double* m = c.mask.plane(n, 0);
        for (std::size_t i = 0; i < s.plane(); ++i) p[i] *= 1.0 - m[i];
      }
    }
    const Tensor raw = model(masked, c.mask);
    if (!(raw.shape() == s)) throw InputError("evaluate: model returned " + raw.shape().str() + " for " + s.str());
    Tensor composited = c.image;
    for (int n = 0; n < s.n; ++n) {
      for (int ch = 0; ch < s.c; ++ch) {
        double* p = composited.plane(n, ch);
        const double* r = raw.plane(n, ch);
        const double* m = c.mask.plane(n, 0);
        for (std::size_t i = 0; i < s.plane(); ++i) p[i] = (1.0 - m[i]) * p[i] + m[i] * r[i];
      }
    }
    const Tensor pred = to_display(composited);
    const Tensor gt = to_display(c.image);
    const double a = l1_percent(pred, gt);
    const double b = psnr(pred, gt);
    const double d = ssim(pred, gt);
    overall.add(a, b, d);
    if (auto idx = bin_index(bins, hole_ratio(c.mask))) {
      per_bin[*idx].add(a, b, d);
    } else {
      ++report.unbinned;
    }
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    BinMetrics m;
    m.bin = bins[i];
    per_bin[i].write(m);
    report.bins.push_back(m);
  }
  report.overall.bin = MaskBin{0.0, 1.0};
  overall.write(report.overall);
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %8s %10s %10s %8s\n", "bin", "images", "L1(%)", "PSNR(dB)", "SSIM");
  out << line;
  auto row = [&](const std::string& label, const BinMetrics& m) {
    std::snprintf(line, sizeof(line), "%-10s %8zu %10s %10s %8s\n", label.c_str(), m.n_images,
                  format_metric(m.l1_percent, 3).c_str(), format_metric(m.psnr_db, 2).c_str(),
                  format_metric(m.ssim, 4).c_str());
    out << line;
  };
  for (const BinMetrics& m : bins) row(m.bin.label(), m);
  row("all", overall);
  return out.str();
}

std::string EvalReport::key_values() const {
  std::ostringstream out;
  auto emit = [&](const std::string& label, const BinMetrics& m) {
    out << "bin." << label << ".n_images=" << m.n_images << "\n";
    out << "bin." << label << ".l1_percent=" << format_metric(m.l1_percent, 6) << "\n";
    out << "bin." << label << ".psnr_db=" << format_metric(m.psnr_db, 6) << "\n";
    out << "bin." << label << ".ssim=" << format_metric(m.ssim, 6) << "\n";
  };
  for (const BinMetrics& m : bins) emit(m.bin.label(), m);
  emit("all", overall);
  out << "unbinned=" << unbinned << "\n";
  return out.str();
}

// --- Frechet distance -------------------------------------------------------------------

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& cov2) {
  const auto d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d) {
    throw InputError("frechet_distance: inconsistent dimensions");
  }
  // tr((C1 C2)^(1/2)) = tr((C1^(1/2) C2 C1^(1/2))^(1/2)), which stays symmetric.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(cov1);
  const Eigen::VectorXd root1 = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd s1 = e1.eigenvectors() * root1.asDiagonal() * e1.eigenvectors().transpose();
  const Eigen::MatrixXd inner = s1 * cov2 * s1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = e2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt;
}

double frechet_distance(const Eigen::MatrixXd& features1, const Eigen::MatrixXd& features2) {
  if (features1.cols() != features2.cols() || features1.rows() < 2 || features2.rows() < 2) {
    throw InputError("frechet_distance: need at least two samples per set with matching feature widths");
  }
  auto fit = [](const Eigen::MatrixXd& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = f.colwise().mean().transpose();
    const Eigen::MatrixXd centered = f.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(f.rows() - 1);
  };
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd cov1, cov2;
  fit(features1, mu1, cov1);
  fit(features2, mu2, cov2);
  return frechet_distance(mu1, cov1, mu2, cov2);
}

}  // namespace tsi
