// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsi::oracle {

std::vector<Tensor> features(const FeatureExtractor& fx, const Tensor& image) {
  std::vector<Tensor> taps;
  Tensor h = image;
  for (int stage = 1; stage <= 5; ++stage) {
    const std::string name = "stage" + std::to_string(stage);
    if (stage > 1 && h.shape().h >= 2 && h.shape().w >= 2 && h.shape().h % 2 == 0 && h.shape().w % 2 == 0) {
      const Shape s = h.shape();
      Tensor pooled(Shape{s.n, s.c, s.h / 2, s.w / 2});
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int y = 0; y < s.h / 2; ++y)
            for (int x = 0; x < s.w / 2; ++x)
              pooled.at(n, c, y, x) = (h.at(n, c, 2 * y, 2 * x) + h.at(n, c, 2 * y, 2 * x + 1) +
                                       h.at(n, c, 2 * y + 1, 2 * x) + h.at(n, c, 2 * y + 1, 2 * x + 1)) / 4.0;
      h = pooled;
    }
    const Tensor& w = fx.params().find(name + ".weight")->var.value();
    const Tensor& b = fx.params().find(name + ".bias")->var.value();
    const Shape s = h.shape();
    Tensor out(Shape{s.n, w.shape().n, s.h, s.w});
    for (int n = 0; n < s.n; ++n) {
      for (int co = 0; co < w.shape().n; ++co) {
        for (int y = 0; y < s.h; ++y) {
          for (int x = 0; x < s.w; ++x) {
            double acc = b.at(0, co, 0, 0);
            for (int ci = 0; ci < s.c; ++ci) {
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = y + ky - 1;
                  const int ix = x + kx - 1;
                  if (iy < 0 || ix < 0 || iy >= s.h || ix >= s.w) continue;
                  acc += w.at(co, ci, ky, kx) * h.at(n, ci, iy, ix);
                }
              }
            }
            out.at(n, co, y, x) = std::max(acc, 0.0);
          }
        }
      }
    }
    h = out;
    taps.push_back(h);
  }
  return taps;
}

double mean_abs(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double clamped_l1(const Tensor& pred, const Tensor& gt) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(std::clamp(pred[i], -1.0, 1.0) - gt[i]);
  return acc / static_cast<double>(pred.size());
}

Tensor gram(const Tensor& f) {
  const Shape s = f.shape();
  Tensor g(Shape{s.n, 1, s.c, s.c});
  const double norm = static_cast<double>(s.c) * s.h * s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int a = 0; a < s.c; ++a) {
      for (int b = 0; b < s.c; ++b) {
        double acc = 0.0;
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x) acc += f.at(n, a, y, x) * f.at(n, b, y, x);
        g.at(n, 0, a, b) = acc / norm;
      }
    }
  }
  return g;
}

double pyramid(const std::vector<Tensor>& detailed, const std::vector<Tensor>& structure,
               const std::vector<Tensor>& detailed_gt, const std::vector<Tensor>& structure_gt) {
  double total = 0.0;
  for (std::size_t l = 0; l < detailed.size(); ++l) total += clamped_l1(detailed[l], detailed_gt[l]);
  for (std::size_t l = 0; l < structure.size(); ++l) total += clamped_l1(structure[l], structure_gt[l]);
  return total;
}

double perceptual(const FeatureExtractor& fx, const Tensor& pred, const Tensor& gt) {
  const auto fp = features(fx, pred);
  const auto fg = features(fx, gt);
  double total = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) total += mean_abs(fp[i], fg[i]);
  return total;
}

double style(const FeatureExtractor& fx, const Tensor& pred, const Tensor& gt) {
  const auto fp = features(fx, pred);
  const auto fg = features(fx, gt);
  double total = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) total += mean_abs(gram(fp[i]), gram(fg[i]));
  return total;
}

RaLsgan ralsgan(const Tensor& r, const Tensor& f) {
  double mr = 0.0, mf = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) mr += r[i] / static_cast<double>(r.size());
  for (std::size_t i = 0; i < f.size(); ++i) mf += f[i] / static_cast<double>(f.size());
  RaLsgan out{0.0, 0.0};
  for (std::size_t i = 0; i < r.size(); ++i) {
    out.discriminator += std::pow(r[i] - mf - 1.0, 2) / static_cast<double>(r.size());
    out.generator += std::pow(r[i] - mf + 1.0, 2) / static_cast<double>(r.size());
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    out.discriminator += std::pow(f[i] - mr + 1.0, 2) / static_cast<double>(f.size());
    out.generator += std::pow(f[i] - mr - 1.0, 2) / static_cast<double>(f.size());
  }
  return out;
}

double l1_percent(const Tensor& a, const Tensor& b) { return 100.0 * mean_abs(a, b); }

double psnr(const Tensor& a, const Tensor& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  return mse == 0.0 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
  const int k = 11;
  const double sigma = 1.5;
  double w[11][11];
  double total = 0.0;
  for (int y = 0; y < k; ++y) {
    for (int x = 0; x < k; ++x) {
      w[y][x] = std::exp(-((y - 5) * (y - 5) + (x - 5) * (x - 5)) / (2 * sigma * sigma));
      total += w[y][x];
    }
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const Shape s = a.shape();
  double sum = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double plane = 0.0;
      int count = 0;
      for (int y0 = 0; y0 + k <= s.h; ++y0) {
        for (int x0 = 0; x0 + k <= s.w; ++x0) {
          double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
          for (int y = 0; y < k; ++y) {
            for (int x = 0; x < k; ++x) {
              const double wt = w[y][x] / total;
              const double va = a.at(n, c, y0 + y, x0 + x);
              const double vb = b.at(n, c, y0 + y, x0 + x);
              ma += wt * va;
              mb += wt * vb;
              aa += wt * va * va;
              bb += wt * vb * vb;
              ab += wt * va * vb;
            }
          }
          const double va = aa - ma * ma;
          const double vb = bb - mb * mb;
          const double cov = ab - ma * mb;
          plane += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++count;
        }
      }
      sum += plane / count;
    }
  }
  return sum / (s.n * s.c);
}

}  // namespace tsi::oracle
