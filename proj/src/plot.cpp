#include "vbones/plot.hpp"

#include "vbones/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace vbones::plot {

namespace {

// Rows top to bottom, 5 bits each, MSB on the left.
const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> g = {
      {' ', {0, 0, 0, 0, 0, 0, 0}},
      {'0', {14, 17, 19, 21, 25, 17, 14}}, {'1', {4, 12, 4, 4, 4, 4, 14}},
      {'2', {14, 17, 1, 2, 4, 8, 31}},     {'3', {31, 2, 4, 2, 1, 17, 14}},
      {'4', {2, 6, 10, 18, 31, 2, 2}},     {'5', {31, 16, 30, 1, 1, 17, 14}},
      {'6', {6, 8, 16, 30, 17, 17, 14}},   {'7', {31, 1, 2, 4, 8, 8, 8}},
      {'8', {14, 17, 17, 14, 17, 17, 14}}, {'9', {14, 17, 17, 15, 1, 2, 12}},
      {'A', {14, 17, 17, 31, 17, 17, 17}}, {'B', {30, 17, 17, 30, 17, 17, 30}},
      {'C', {14, 17, 16, 16, 16, 17, 14}}, {'D', {28, 18, 17, 17, 17, 18, 28}},
      {'E', {31, 16, 16, 30, 16, 16, 31}}, {'F', {31, 16, 16, 30, 16, 16, 16}},
      {'G', {14, 17, 16, 23, 17, 17, 15}}, {'H', {17, 17, 17, 31, 17, 17, 17}},
      {'I', {14, 4, 4, 4, 4, 4, 14}},      {'J', {7, 2, 2, 2, 2, 18, 12}},
      {'K', {17, 18, 20, 24, 20, 18, 17}}, {'L', {16, 16, 16, 16, 16, 16, 31}},
      {'M', {17, 27, 21, 21, 17, 17, 17}}, {'N', {17, 17, 25, 21, 19, 17, 17}},
      {'O', {14, 17, 17, 17, 17, 17, 14}}, {'P', {30, 17, 17, 30, 16, 16, 16}},
      {'Q', {14, 17, 17, 17, 21, 18, 13}}, {'R', {30, 17, 17, 30, 20, 18, 17}},
      {'S', {15, 16, 16, 14, 1, 1, 30}},   {'T', {31, 4, 4, 4, 4, 4, 4}},
      {'U', {17, 17, 17, 17, 17, 17, 14}}, {'V', {17, 17, 17, 17, 17, 10, 4}},
      {'W', {17, 17, 17, 21, 21, 21, 10}}, {'X', {17, 17, 10, 4, 10, 17, 17}},
      {'Y', {17, 17, 17, 10, 4, 4, 4}},    {'Z', {31, 1, 2, 4, 8, 16, 31}},
      {'.', {0, 0, 0, 0, 0, 12, 12}},      {'-', {0, 0, 0, 31, 0, 0, 0}},
      {'_', {0, 0, 0, 0, 0, 0, 31}},       {':', {0, 12, 12, 0, 12, 12, 0}},
      {'/', {0, 1, 2, 4, 8, 16, 0}},       {'(', {2, 4, 8, 8, 8, 4, 2}},
      {')', {8, 4, 2, 2, 2, 4, 8}},        {'+', {0, 4, 4, 31, 4, 4, 0}},
      {'=', {0, 0, 31, 0, 31, 0, 0}},      {'#', {10, 10, 31, 10, 31, 10, 10}},
      {',', {0, 0, 0, 0, 12, 4, 8}},       {'%', {24, 25, 2, 4, 8, 19, 3}}};
  return g;
}

constexpr Rgb kBlack = {0, 0, 0};
constexpr Rgb kGrid = {225, 225, 225};

std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a != 0.0 && (a >= 1e5 || a < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else if (a >= 100.0) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.2g", v);
  }
  return buf;
}

struct Frame {
  int left = 70, right = 20, top = 40, bottom = 45;
};

}  // namespace

Rgb palette(std::size_t i) {
  static const Rgb colors[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                               {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
                               {188, 189, 34},  {23, 190, 207}};
  return colors[i % std::size(colors)];
}

Canvas::Canvas(int width, int height, Rgb background) : width_(width), height_(height) {
  require(width > 0 && height > 0, ErrorKind::Validation, "canvas size must be positive");
  rgb_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < rgb_.size(); i += 3) {
    rgb_[i] = background[0];
    rgb_[i + 1] = background[1];
    rgb_[i + 2] = background[2];
  }
}

Rgb Canvas::pixel(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  return {rgb_.at(i), rgb_.at(i + 1), rgb_.at(i + 2)};
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  rgb_[i] = c[0];
  rgb_[i + 1] = c[1];
  rgb_[i + 2] = c[2];
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c, int thickness) {
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  const int half = thickness / 2;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    for (int dx = -half; dx <= half; ++dx) {
      for (int dy = -half; dy <= half; ++dy) set(x + dx, y + dy, c);
    }
  }
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
}

void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
  const auto& g = glyphs();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(s[k])));
    const auto it = g.find(ch);
    if (it == g.end()) continue;
    const int ox = x + static_cast<int>(k) * 6 * scale;
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(it->second[static_cast<std::size_t>(row)] & (1 << (4 - col)))) continue;
        fill_rect(ox + col * scale, y + row * scale, ox + col * scale + scale - 1,
                  y + row * scale + scale - 1, c);
      }
    }
  }
}

void Canvas::save_png(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FILE* fp = std::fopen(path.c_str(), "wb");
  require(fp != nullptr, ErrorKind::Io, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorKind::Io, "failed to encode " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width_), static_cast<png_uint_32>(height_), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height_; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void draw_axes(Canvas& c, const Frame& f, const std::string& title, const Range& xr, const Range& yr,
               bool log_y) {
  const int w = c.width(), h = c.height();
  const int x0 = f.left, x1 = w - f.right, y0 = h - f.bottom, y1 = f.top;
  c.text((w - Canvas::text_width(title, 2)) / 2, 10, title, kBlack, 2);
  for (int k = 0; k <= 5; ++k) {
    const double t = k / 5.0;
    const int gy = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    const int gx = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    c.line(x0, gy, x1, gy, kGrid);
    c.line(gx, y0, gx, y1, kGrid);
    double yv = yr.lo + t * (yr.hi - yr.lo);
    if (log_y) yv = std::pow(10.0, yv);
    const std::string yl = tick_label(yv);
    c.text(x0 - 6 - Canvas::text_width(yl), gy - 3, yl, kBlack);
    const std::string xl = tick_label(xr.lo + t * (xr.hi - xr.lo));
    c.text(gx - Canvas::text_width(xl) / 2, y0 + 8, xl, kBlack);
  }
  c.line(x0, y0, x1, y0, kBlack);
  c.line(x0, y0, x0, y1, kBlack);
}

void draw_legend(Canvas& c, const Frame& f, const std::vector<Series>& series) {
  int y = f.top + 6;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int x = c.width() - f.right - Canvas::text_width(series[i].label) - 30;
    c.line(x, y + 3, x + 18, y + 3, palette(i), 3);
    c.text(x + 24, y, series[i].label, kBlack);
    y += 12;
  }
}

}  // namespace

void line_chart(const std::filesystem::path& path, const std::string& title,
                const std::vector<Series>& series, bool log_y, int width, int height) {
  Canvas c(width, height);
  Frame f;
  Range xr, yr;
  auto ty = [&](double v) { return log_y ? (v > 0 ? std::log10(v) : std::nan("")) : v; };
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::Validation, "series x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(ty(s.y[i]))) continue;
      xr.add(s.x[i]);
      yr.add(ty(s.y[i]));
    }
  }
  xr.finish();
  yr.finish();
  draw_axes(c, f, title, xr, yr, log_y);
  const double pw = width - f.left - f.right, ph = height - f.top - f.bottom;
  auto px = [&](double x) { return f.left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return height - f.bottom - (y - yr.lo) / (yr.hi - yr.lo) * ph; };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    bool have_prev = false;
    double lx = 0, ly = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yv = ty(s.y[i]);
      if (!std::isfinite(yv)) {
        have_prev = false;
        continue;
      }
      const double cx = px(s.x[i]), cy = py(yv);
      if (have_prev) c.line(lx, ly, cx, cy, palette(k), 2);
      else c.fill_rect(static_cast<int>(cx) - 1, static_cast<int>(cy) - 1, static_cast<int>(cx) + 1, static_cast<int>(cy) + 1, palette(k));
      lx = cx;
      ly = cy;
      have_prev = true;
    }
  }
  draw_legend(c, f, series);
  c.save_png(path);
}

void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::vector<std::string>& labels, const std::vector<double>& values, int width,
               int height) {
  require(labels.size() == values.size() && !values.empty(), ErrorKind::Validation,
          "bar chart needs one label per value");
  Canvas c(width, height);
  Frame f;
  f.bottom = 90;
  Range yr;
  yr.add(0.0);
  for (double v : values) yr.add(v);
  yr.finish();
  Range xr;
  xr.lo = 0;
  xr.hi = static_cast<double>(values.size());
  draw_axes(c, f, title, xr, yr, false);
  // Bar labels replace the numeric x ticks.
  c.fill_rect(0, height - f.bottom + 2, width - 1, height - 1, {255, 255, 255});
  const double pw = width - f.left - f.right, ph = height - f.top - f.bottom;
  const double slot = pw / static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int x0 = static_cast<int>(f.left + slot * (static_cast<double>(i) + 0.15));
    const int x1 = static_cast<int>(f.left + slot * (static_cast<double>(i) + 0.85));
    const int y0 = height - f.bottom;
    const int y1 = static_cast<int>(y0 - (values[i] - yr.lo) / (yr.hi - yr.lo) * ph);
    c.fill_rect(x0, y0, x1, y1, palette(0));
    // Vertical labels, one glyph per line.
    const std::string& l = labels[i];
    for (std::size_t k = 0; k < std::min<std::size_t>(l.size(), 10); ++k) {
      c.text((x0 + x1) / 2 - 2, y0 + 6 + static_cast<int>(k) * 8, std::string(1, l[k]), kBlack);
    }
  }
  c.save_png(path);
}

void trajectory_chart(const std::filesystem::path& path, const std::string& title,
                      const std::vector<Series>& series, int width, int height) {
  Canvas c(width, height);
  Frame f;
  Range xr, yr;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::Validation, "series x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.add(s.x[i]);
      yr.add(s.y[i]);
    }
  }
  xr.finish();
  yr.finish();
  // Equal aspect: widen the narrower range.
  const double pw = width - f.left - f.right, ph = height - f.top - f.bottom;
  const double scale = std::max((xr.hi - xr.lo) / pw, (yr.hi - yr.lo) / ph) * 1.1;
  const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
  xr.lo = cx - 0.5 * pw * scale;
  xr.hi = cx + 0.5 * pw * scale;
  yr.lo = cy - 0.5 * ph * scale;
  yr.hi = cy + 0.5 * ph * scale;
  // Image y grows downwards, so the bottom tick carries the largest value.
  Range yr_axis{yr.hi, yr.lo};
  draw_axes(c, f, title, xr, yr_axis, false);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double px = f.left + (s.x[i] - xr.lo) / scale;
      const double py = f.top + (s.y[i] - yr.lo) / scale;
      c.fill_rect(static_cast<int>(px) - 2, static_cast<int>(py) - 2, static_cast<int>(px) + 2,
                  static_cast<int>(py) + 2, palette(k));
      if (i > 0) {
        c.line(f.left + (s.x[i - 1] - xr.lo) / scale, f.top + (s.y[i - 1] - yr.lo) / scale, px, py,
               palette(k), 1);
      }
    }
  }
  draw_legend(c, f, series);
  c.save_png(path);
}

}  // namespace vbones::plot
