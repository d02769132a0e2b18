#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "adaptvo/error.hpp"
#include "adaptvo/frontend.hpp"

namespace adaptvo {
namespace {

// Hartley normalization: centroid to the origin, mean distance sqrt(2).
bool normalizing_transform(std::span<const Point2> pts, Eigen::Matrix3d& T) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12)) return false;
  const double s = std::sqrt(2.0) / mean_dist;
  T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return true;
}

inline double sampson_inline(const Eigen::Matrix3d& F, const Point2& prev, const Point2& cur) {
  const double x1 = prev.x(), y1 = prev.y(), x2 = cur.x(), y2 = cur.y();
  const double a0 = F(0, 0) * x1 + F(0, 1) * y1 + F(0, 2);  // F x1
  const double a1 = F(1, 0) * x1 + F(1, 1) * y1 + F(1, 2);
  const double a2 = F(2, 0) * x1 + F(2, 1) * y1 + F(2, 2);
  const double b0 = F(0, 0) * x2 + F(1, 0) * y2 + F(2, 0);  // F^T x2
  const double b1 = F(0, 1) * x2 + F(1, 1) * y2 + F(2, 1);
  const double num = x2 * a0 + y2 * a1 + a2;
  const double denom = a0 * a0 + a1 * a1 + b0 * b0 + b1 * b1;
  if (denom <= 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(num) / std::sqrt(denom);
}

}  // namespace

int FundamentalEstimate::inlier_count() const {
  return static_cast<int>(std::count(inliers.begin(), inliers.end(), std::uint8_t{1}));
}

double sampson_distance(const Eigen::Matrix3d& F, const Point2& prev, const Point2& cur) {
  return sampson_inline(F, prev, cur);
}

Eigen::Matrix3d fit_fundamental_8point(std::span<const Point2> prev, std::span<const Point2> cur) {
  if (prev.size() != cur.size()) throw Error(ErrorCode::LengthMismatch, "correspondence lists differ in length");
  if (prev.size() < 8) throw Error(ErrorCode::InsufficientCorrespondences, "eight-point fit needs >= 8 matches");
  Eigen::Matrix3d T1, T2;
  if (!normalizing_transform(prev, T1) || !normalizing_transform(cur, T2))
    throw Error(ErrorCode::DegenerateConfiguration, "coincident points");

  Eigen::Matrix<double, 9, 9> AtA = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < prev.size(); ++i) {
    const Eigen::Vector3d a = T1 * Eigen::Vector3d(prev[i].x(), prev[i].y(), 1.0);
    const Eigen::Vector3d b = T2 * Eigen::Vector3d(cur[i].x(), cur[i].y(), 1.0);
    Eigen::Matrix<double, 9, 1> row;
    row << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
    AtA.noalias() += row * row.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(AtA);
  const Eigen::Matrix<double, 9, 1> f = eig.eigenvectors().col(0);
  Eigen::Matrix3d Fn;
  Fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(Fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sv = svd.singularValues();
  if (!sv.allFinite() || !(sv(1) > 1e-10 * sv(0)))
    throw Error(ErrorCode::DegenerateConfiguration, "rank-deficient fundamental matrix");
  sv(2) = 0.0;
  const Eigen::Matrix3d F = T2.transpose() * (svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose()) * T1;
  const double norm = F.norm();
  if (!(norm > 0.0) || !F.allFinite()) throw Error(ErrorCode::DegenerateConfiguration, "degenerate fit");
  return F / norm;
}

FundamentalEstimate estimate_fundamental_ransac(std::span<const Point2> prev, std::span<const Point2> cur,
                                                double threshold, const RansacOptions& options) {
  if (prev.size() != cur.size()) throw Error(ErrorCode::LengthMismatch, "correspondence lists differ in length");
  if (prev.size() < 8)
    throw Error(ErrorCode::InsufficientCorrespondences, "RANSAC needs >= 8 correspondences, got " +
                                                            std::to_string(prev.size()));
  if (threshold < 0) throw Error(ErrorCode::InvalidArgument, "RANSAC threshold must be >= 0");

  const std::size_t n = prev.size();
  auto score = [&](const Eigen::Matrix3d& F, std::vector<std::uint8_t>& mask) {
    mask.assign(n, 0);
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (sampson_inline(F, prev[i], cur[i]) <= threshold) {
        mask[i] = 1;
        ++count;
      }
    }
    return count;
  };

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(n);
  std::array<Point2, 8> sp, sc;
  std::vector<std::uint8_t> mask;

  FundamentalEstimate best;
  int best_count = -1;
  double required = static_cast<double>(options.max_hypotheses);
  while (best.hypotheses < options.max_hypotheses && best.hypotheses < required) {
    ++best.hypotheses;
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < 8; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(order[k], order[pick(rng)]);
      sp[k] = prev[order[k]];
      sc[k] = cur[order[k]];
    }
    Eigen::Matrix3d F;
    try {
      F = fit_fundamental_8point(sp, sc);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
      continue;
    }
    const int count = score(F, mask);
    if (count > best_count) {
      best_count = count;
      best.F = F;
      best.inliers = mask;
      const double ratio = static_cast<double>(count) / static_cast<double>(n);
      if (count == static_cast<int>(n)) {
        required = 0;
      } else if (ratio > 0) {
        const double p_good = std::pow(ratio, 8.0);
        required = p_good >= 1.0 ? 0.0 : std::log(1.0 - options.confidence) / std::log1p(-p_good);
      }
    }
  }
  if (best_count < 0) throw Error(ErrorCode::DegenerateConfiguration, "every RANSAC hypothesis was degenerate");

  if (best_count >= 8) {
    std::vector<Point2> ip, ic;
    for (std::size_t i = 0; i < n; ++i)
      if (best.inliers[i]) {
        ip.push_back(prev[i]);
        ic.push_back(cur[i]);
      }
    try {
      const Eigen::Matrix3d refit = fit_fundamental_8point(ip, ic);
      if (score(refit, mask) >= best_count) {
        best.F = refit;
        best.inliers = mask;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateConfiguration) throw;
    }
  }
  return best;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::uint8_t> tukey_filter(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "Tukey filter needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_type7(sorted, 0.25);
  const double q3 = quantile_type7(sorted, 0.75);
  const double cutoff = q3 + 1.5 * (q3 - q1);
  std::vector<std::uint8_t> keep(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) keep[i] = values[i] <= cutoff ? 1 : 0;
  return keep;
}

}  // namespace adaptvo
