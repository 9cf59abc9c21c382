// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural digit renderer used as an offline stand-in for MNIST-scale data.
// Glyphs are polylines in a unit box, distorted per sample and rasterized
// with an anti-aliased distance-to-segment brush.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "sparsecal/dataset.hpp"

namespace sparsecal {
namespace {

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;
using Glyph = std::vector<Stroke>;

Stroke arc(double cx, double cy, double rx, double ry, double from_deg, double to_deg, int steps = 14) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double a = (from_deg + (to_deg - from_deg) * i / steps) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

Stroke concat(Stroke a, const Stroke& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// y grows downward; angle 270° is the top of an ellipse.
const std::array<Glyph, 10>& glyphs() {
  static const std::array<Glyph, 10> table = [] {
    std::array<Glyph, 10> g;
    g[0] = {arc(0.5, 0.5, 0.24, 0.36, 0, 360, 24)};
    g[1] = {{{0.52, 0.14}, {0.5, 0.86}}, {{0.38, 0.27}, {0.52, 0.14}}};
    g[2] = {concat(arc(0.5, 0.34, 0.22, 0.2, 185, 400), {{0.27, 0.86}, {0.77, 0.86}})};
    g[3] = {arc(0.48, 0.32, 0.2, 0.18, 200, 450), arc(0.48, 0.68, 0.23, 0.18, 270, 515)};
    g[4] = {{{0.63, 0.86}, {0.63, 0.14}, {0.24, 0.62}, {0.8, 0.62}}};
    g[5] = {concat({{0.73, 0.14}, {0.33, 0.14}, {0.3, 0.47}}, arc(0.5, 0.66, 0.23, 0.2, 215, 510))};
    g[6] = {concat({{0.67, 0.14}, {0.46, 0.29}, {0.33, 0.5}}, arc(0.51, 0.68, 0.2, 0.18, 180, 540, 20))};
    g[7] = {{{0.25, 0.14}, {0.76, 0.14}, {0.43, 0.86}}};
    g[8] = {arc(0.5, 0.31, 0.18, 0.17, 0, 360, 18), arc(0.5, 0.68, 0.22, 0.19, 0, 360, 20)};
    g[9] = {arc(0.5, 0.33, 0.2, 0.19, 0, 360, 18), {{0.7, 0.36}, {0.62, 0.86}}};
    return g;
  }();
  return table;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Dataset synthesize_digits(std::size_t count, std::uint64_t seed) {
  constexpr std::size_t kSide = 28;
  Dataset data;
  data.rows = kSide;
  data.cols = kSide;
  data.images.resize(count * kSide * kSide);
  data.labels.resize(count);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_label(0, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<float> canvas(kSide * kSide);
  for (std::size_t n = 0; n < count; ++n) {
    const int label = pick_label(rng);
    data.labels[n] = static_cast<std::uint8_t>(label);

    const double angle = 0.15 * gauss(rng);
    const double sx = 0.75 + 0.35 * unit(rng);
    const double sy = 0.8 + 0.3 * unit(rng);
    const double shear = 0.16 * gauss(rng);
    const double tx = 0.08 * (unit(rng) - 0.5) * 2.0;
    const double ty = 0.07 * (unit(rng) - 0.5) * 2.0;
    const double jitter = 0.015 + 0.02 * unit(rng);
    const double thickness = (1.1 + 1.4 * unit(rng)) / kSide;
    const double ink = 0.65 + 0.35 * unit(rng);
    const double ca = std::cos(angle), sa = std::sin(angle);

    auto place = [&](Point p) {
      double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
      x += shear * y;
      const double rx = ca * x - sa * y, ry = sa * x + ca * y;
      return Point{(rx + 0.5 + tx) * kSide, (ry + 0.5 + ty) * kSide};
    };

    std::vector<std::pair<Point, Point>> segments;
    for (const Stroke& stroke : glyphs()[static_cast<std::size_t>(label)]) {
      // Occasionally drop the decorative serif on 1 or trim a stroke end.
      if (label == 1 && &stroke != &glyphs()[1].front() && unit(rng) < 0.5) continue;
      Stroke s = stroke;
      for (auto& p : s) {
        p.x += jitter * gauss(rng);
        p.y += jitter * gauss(rng);
      }
      std::size_t first = 0, last = s.size() - 1;
      if (s.size() > 6 && unit(rng) < 0.3) first += 1 + static_cast<std::size_t>(unit(rng) * 2);
      if (s.size() > 6 && unit(rng) < 0.3) last -= 1 + static_cast<std::size_t>(unit(rng) * 2);
      for (std::size_t i = first; i < last; ++i) segments.emplace_back(place(s[i]), place(s[i + 1]));
    }
    if (unit(rng) < 0.15) {
      // Stray pen mark.
      const Point a{unit(rng), unit(rng)};
      const Point b{a.x + 0.25 * gauss(rng), a.y + 0.25 * gauss(rng)};
      segments.emplace_back(place(a), place(b));
    }

    const double radius = thickness * kSide * 0.5;
    for (std::size_t y = 0; y < kSide; ++y) {
      for (std::size_t x = 0; x < kSide; ++x) {
        const Point c{x + 0.5, y + 0.5};
        double d = 1e9;
        for (const auto& [a, b] : segments) d = std::min(d, segment_distance(c, a, b));
        double v = std::clamp(radius + 0.5 - d, 0.0, 1.0) * ink;
        v += 0.06 * gauss(rng);
        canvas[y * kSide + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    std::uint8_t* out = data.images.data() + n * kSide * kSide;
    for (std::size_t i = 0; i < kSide * kSide; ++i) out[i] = static_cast<std::uint8_t>(std::lround(canvas[i] * 255.0));
  }
  return data;
}

}  // namespace sparsecal
