#include <algorithm>
#include <cmath>
#include <string>

#include "adaptvo/error.hpp"
#include "adaptvo/frontend.hpp"
#include "point_grid.hpp"

namespace adaptvo {
namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

// At least two of the four compass pixels lie on any 9-arc.
bool compass_prefilter(const std::uint8_t* p, int stride, int threshold) {
  const int c = p[0];
  const int hi = c + threshold;
  const int lo = c - threshold;
  const int v[4] = {p[-3 * stride], p[3], p[3 * stride], p[-3]};
  int bright = 0, dark = 0;
  for (int k : v) {
    bright += k > hi;
    dark += k < lo;
  }
  return bright >= 2 || dark >= 2;
}

// Full segment test: 9 contiguous circle pixels all brighter than c + t or
// all darker than c - t.
bool segment_test(const std::uint8_t* p, int stride, int threshold) {
  const int c = p[0];
  std::uint32_t bright = 0, dark = 0;
  for (int i = 0; i < 16; ++i) {
    const int v = p[kCircle[i][1] * stride + kCircle[i][0]];
    bright |= static_cast<std::uint32_t>(v > c + threshold) << i;
    dark |= static_cast<std::uint32_t>(v < c - threshold) << i;
  }
  auto has_arc = [](std::uint32_t m) {
    m |= m << 16;  // wrap around the circle
    std::uint32_t run = m;
    for (int k = 1; k < kFastArc; ++k) run &= m >> k;
    return run != 0;
  };
  return has_arc(bright) || has_arc(dark);
}

}  // namespace

std::span<const std::array<int, 2>> fast_circle() { return kCircle; }

int fast_score(const std::uint8_t* image, int stride, int x, int y) {
  const std::uint8_t* p = image + static_cast<std::ptrdiff_t>(y) * stride + x;
  const int c = p[0];
  int d[16 + kFastArc - 1];
  for (int i = 0; i < 16; ++i) d[i] = p[kCircle[i][1] * stride + kCircle[i][0]] - c;
  for (int i = 16; i < 16 + kFastArc - 1; ++i) d[i] = d[i - 16];
  int best_bright = 0, best_dark = 0;
  for (int s = 0; s < 16; ++s) {
    int mn = 255, mx = -255;
    for (int k = 0; k < kFastArc; ++k) {
      mn = std::min(mn, d[s + k]);
      mx = std::max(mx, d[s + k]);
    }
    best_bright = std::max(best_bright, mn);
    best_dark = std::max(best_dark, -mx);
  }
  // Passing at threshold t requires every arc pixel to differ by more than t.
  return std::max(best_bright, best_dark) - 1;
}

std::vector<std::uint8_t> to_u8(const GrayImage& image) {
  std::vector<std::uint8_t> out(image.size());
  const auto src = image.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

std::vector<Keypoint> detect_fast(const GrayImage& image, int threshold, std::span<const Point2> exclusion,
                                  double min_distance) {
  if (threshold < 0) throw Error(ErrorCode::InvalidArgument, "FAST threshold must be >= 0");
  const int w = image.width();
  const int h = image.height();
  std::vector<Keypoint> out;
  if (w <= 2 * kFastRadius || h <= 2 * kFastRadius) return out;

  const std::vector<std::uint8_t> px = to_u8(image);
  std::vector<int> score(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> candidates;
  for (int y = kFastRadius; y < h - kFastRadius; ++y) {
    for (int x = kFastRadius; x < w - kFastRadius; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!compass_prefilter(px.data() + i, w, threshold) || !segment_test(px.data() + i, w, threshold)) continue;
      const int s = fast_score(px.data(), w, x, y);
      if (s >= threshold) {
        score[i] = s;
        candidates.push_back(static_cast<int>(i));
      }
    }
  }

  // Strict total order (score, then earlier raster index) makes suppression
  // deterministic on plateaus.
  auto beats = [&](int a, int b) { return score[a] > score[b] || (score[a] == score[b] && a < b); };

  detail::PointGrid grid(w, h, min_distance);
  for (const Point2& e : exclusion) grid.insert(e);

  for (int i : candidates) {
    const int x = i % w;
    const int y = i / w;
    bool is_max = true;
    for (int dy = -1; dy <= 1 && is_max; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int j = i + dy * w + dx;
        if (score[j] >= threshold && beats(j, i)) {
          is_max = false;
          break;
        }
      }
    }
    if (!is_max) continue;
    const Point2 p(x, y);
    if (min_distance > 0.0 && !exclusion.empty() && grid.any_within(p, min_distance)) continue;
    out.push_back({p, score[i]});
  }
  std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
  return out;
}

}  // namespace adaptvo
