#include "doctest.h"

#include "vbones/plot.hpp"

#include <filesystem>
#include <fstream>

using namespace vbones::plot;
namespace fs = std::filesystem;

TEST_CASE("canvas drawing") {
  Canvas c(40, 30);
  CHECK(c.pixel(5, 5) == Rgb{255, 255, 255});
  c.line(0, 0, 39, 29, {0, 0, 0});
  CHECK(c.pixel(0, 0) == Rgb{0, 0, 0});
  CHECK(c.pixel(39, 29) == Rgb{0, 0, 0});
  c.fill_rect(10, 10, 12, 12, {255, 0, 0});
  CHECK(c.pixel(11, 11) == Rgb{255, 0, 0});
  c.set(-1, 100, {1, 2, 3});  // clipped silently
  CHECK(Canvas::text_width("abc") == 18);
  CHECK(palette(0) != palette(1));
}

TEST_CASE("charts write png files") {
  const auto dir = fs::temp_directory_path() / "vbones_plot";
  fs::remove_all(dir);
  fs::create_directories(dir);
  line_chart(dir / "l.png", "loss", {{"fc", {0, 1, 2, 3}, {10, 5, 2, 0}}}, true);
  bar_chart(dir / "b.png", "per joint", {"pelvis", "head"}, {0.0, 12.5});
  trajectory_chart(dir / "t.png", "case", {{"a", {1, 2, 3}, {4, 2, 5}}});
  for (const char* f : {"l.png", "b.png", "t.png"}) {
    std::ifstream in(dir / f, std::ios::binary);
    char sig[8] = {};
    in.read(sig, 8);
    CHECK(std::string(sig + 1, 3) == "PNG");
  }
  fs::remove_all(dir);
}
