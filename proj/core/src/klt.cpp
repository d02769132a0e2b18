#include <algorithm>
#include <cmath>

#include "adaptvo/error.hpp"
#include "adaptvo/frontend.hpp"

namespace adaptvo {
namespace {

struct Gradients {
  GrayImage gx;
  GrayImage gy;
};

Gradients central_gradients(const GrayImage& img) {
  const int w = img.width(), h = img.height();
  Gradients g{GrayImage(w, h), GrayImage(w, h)};
  for (int y = 0; y < h; ++y) {
    const float* r = img.row(y);
    const float* up = img.row(std::max(y - 1, 0));
    const float* dn = img.row(std::min(y + 1, h - 1));
    float* gx = g.gx.row(y);
    float* gy = g.gy.row(y);
    for (int x = 0; x < w; ++x) {
      gx[x] = 0.5f * (r[std::min(x + 1, w - 1)] - r[std::max(x - 1, 0)]);
      gy[x] = 0.5f * (dn[x] - up[x]);
    }
  }
  return g;
}

// Bilinear sampling of a (2*half+1)^2 patch centred at (px, py). All patch
// pixels share the same fractional offset, so the weights are computed once;
// indices are clamped to the border.
class PatchSampler {
 public:
  explicit PatchSampler(int half) : half_(half), n_(2 * half + 1), cols0_(n_), cols1_(n_), rows0_(n_), rows1_(n_) {}

  int size() const { return n_ * n_; }

  void place(const GrayImage& img, double px, double py) {
    const double fx = std::floor(px), fy = std::floor(py);
    ax_ = static_cast<float>(px - fx);
    ay_ = static_cast<float>(py - fy);
    const int ix = static_cast<int>(fx) - half_;
    const int iy = static_cast<int>(fy) - half_;
    const int w = img.width(), h = img.height();
    for (int k = 0; k < n_; ++k) {
      cols0_[k] = std::clamp(ix + k, 0, w - 1);
      cols1_[k] = std::clamp(ix + k + 1, 0, w - 1);
      rows0_[k] = std::clamp(iy + k, 0, h - 1);
      rows1_[k] = std::clamp(iy + k + 1, 0, h - 1);
    }
    interior_ = ix >= 0 && iy >= 0 && ix + n_ < w && iy + n_ < h;
  }

  void sample(const GrayImage& img, float* out) const {
    const float w00 = (1 - ax_) * (1 - ay_), w10 = ax_ * (1 - ay_), w01 = (1 - ax_) * ay_, w11 = ax_ * ay_;
    if (interior_) {
      // Contiguous rows: no index indirection, lets the compiler vectorize.
      for (int r = 0; r < n_; ++r) {
        const float* a = img.row(rows0_[r]) + cols0_[0];
        const float* b = a + img.width();
        float* o = out + static_cast<std::size_t>(r) * n_;
        for (int c = 0; c < n_; ++c) o[c] = w00 * a[c] + w10 * a[c + 1] + w01 * b[c] + w11 * b[c + 1];
      }
      return;
    }
    for (int r = 0; r < n_; ++r) {
      const float* a = img.row(rows0_[r]);
      const float* b = img.row(rows1_[r]);
      float* o = out + static_cast<std::size_t>(r) * n_;
      for (int c = 0; c < n_; ++c) {
        const int c0 = cols0_[c], c1 = cols1_[c];
        o[c] = w00 * a[c0] + w10 * a[c1] + w01 * b[c0] + w11 * b[c1];
      }
    }
  }

 private:
  int half_;
  int n_;
  float ax_ = 0, ay_ = 0;
  bool interior_ = false;
  std::vector<int> cols0_, cols1_, rows0_, rows1_;
};

bool inside(const GrayImage& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1;
}

}  // namespace

std::vector<KltResult> track_klt(const ImagePyramid& prev, const ImagePyramid& cur, std::span<const Point2> points,
                                 const KltOptions& options) {
  if (options.patch_size < 3 || options.patch_size % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "KLT patch size must be odd and >= 3");
  if (prev.num_levels() != cur.num_levels() || prev.empty())
    throw Error(ErrorCode::DimensionMismatch, "KLT pyramids differ in depth");
  for (int l = 0; l < prev.num_levels(); ++l)
    if (prev.level(l).width() != cur.level(l).width() || prev.level(l).height() != cur.level(l).height())
      throw Error(ErrorCode::DimensionMismatch, "KLT pyramid levels differ in size");

  const int levels = prev.num_levels();
  std::vector<Gradients> grads;
  grads.reserve(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) grads.push_back(central_gradients(prev.level(l)));

  const int half = options.patch_size / 2;
  PatchSampler sampler(half);
  const int n = sampler.size();
  Eigen::ArrayXf tmpl(n), gx(n), gy(n), warped(n);

  std::vector<KltResult> results;
  results.reserve(points.size());
  for (const Point2& p0 : points) {
    KltResult res;
    res.position = p0;
    Eigen::Vector2d guess = Eigen::Vector2d::Zero();
    bool failed = !inside(prev.level(0), p0.x(), p0.y());

    for (int l = levels - 1; l >= 0 && !failed; --l) {
      const double scale = std::ldexp(1.0, -l);
      // Pixel centres of a box-filtered level sit at 2^l * (i + 0.5) - 0.5.
      const Eigen::Vector2d pl = (p0.array() + 0.5) * scale - 0.5;
      const GrayImage& I = prev.level(l);
      const GrayImage& J = cur.level(l);

      sampler.place(I, pl.x(), pl.y());
      sampler.sample(I, tmpl.data());
      sampler.sample(grads[l].gx, gx.data());
      sampler.sample(grads[l].gy, gy.data());
      double gxx = 0, gxy = 0, gyy = 0;
      for (int i = 0; i < n; ++i) {
        gxx += static_cast<double>(gx[i]) * gx[i];
        gxy += static_cast<double>(gx[i]) * gy[i];
        gyy += static_cast<double>(gy[i]) * gy[i];
      }
      const double det = gxx * gyy - gxy * gxy;
      if (det < options.min_determinant) {
        failed = true;
        break;
      }

      Eigen::Vector2d v = Eigen::Vector2d::Zero();
      for (int it = 0; it < options.max_iters; ++it) {
        const Eigen::Vector2d q = pl + guess + v;
        if (!inside(J, q.x(), q.y())) {
          failed = true;
          break;
        }
        ++res.iterations;
        sampler.place(J, q.x(), q.y());
        sampler.sample(J, warped.data());
        // Eigen's packet reductions vectorize these sums.
        warped = tmpl - warped;
        const double bx = (warped * gx).sum();
        const double by = (warped * gy).sum();
        const Eigen::Vector2d delta((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
        v += delta;
        if (delta.norm() < options.epsilon) break;
      }
      if (failed) break;
      guess = l > 0 ? Eigen::Vector2d(2.0 * (guess + v)) : Eigen::Vector2d(guess + v);
    }

    if (!failed) {
      const Point2 final_pos = p0 + guess;
      const GrayImage& I0 = prev.level(0);
      const GrayImage& J0 = cur.level(0);
      if (!inside(J0, final_pos.x(), final_pos.y())) {
        failed = true;
      } else {
        sampler.place(I0, p0.x(), p0.y());
        sampler.sample(I0, tmpl.data());
        sampler.place(J0, final_pos.x(), final_pos.y());
        sampler.sample(J0, warped.data());
        res.residual = static_cast<double>((tmpl - warped).abs().sum()) / n;
        res.position = final_pos;
        failed = res.residual > options.max_residual;
      }
    }
    res.converged = !failed;
    results.push_back(res);
  }
  return results;
}

}  // namespace adaptvo
