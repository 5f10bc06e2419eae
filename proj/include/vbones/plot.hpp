#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vbones::plot {

using Rgb = std::array<std::uint8_t, 3>;

// Distinct line colours, cycled by series index.
Rgb palette(std::size_t i);

class Canvas {
 public:
  Canvas(int width, int height, Rgb background = {255, 255, 255});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Rgb pixel(int x, int y) const;

  void set(int x, int y, Rgb c);
  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  // 5x7 bitmap glyphs; lowercase is drawn as uppercase.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 1);
  static int text_width(const std::string& s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }

  void save_png(const std::filesystem::path& path) const;

 private:
  int width_, height_;
  std::vector<std::uint8_t> rgb_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Line chart with axes, tick labels and a legend. Non-positive values are
// dropped when `log_y` is set.
void line_chart(const std::filesystem::path& path, const std::string& title,
                const std::vector<Series>& series, bool log_y = false, int width = 800,
                int height = 500);

void bar_chart(const std::filesystem::path& path, const std::string& title,
               const std::vector<std::string>& labels, const std::vector<double>& values,
               int width = 900, int height = 500);

// 2D trajectories in image coordinates (y down), equal aspect.
void trajectory_chart(const std::filesystem::path& path, const std::string& title,
                      const std::vector<Series>& series, int width = 700, int height = 600);

}  // namespace vbones::plot
