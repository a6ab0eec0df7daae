#include "mspipe/annotations.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "mspipe/errors.hpp"
#include "mspipe/png_io.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

static void validate_box(const BoxAnnotation& b, const std::string& where) {
  if (b.class_id < 0) fail(where + ": negative class id");
  if (!(b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0))
    fail(where + ": box center outside [0,1]");
  if (!(b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0))
    fail(where + ": box size outside (0,1]");
}

std::vector<BoxAnnotation> load_annotations(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<BoxAnnotation> boxes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    BoxAnnotation b;
    if (!(ls >> b.class_id >> b.cx >> b.cy >> b.w >> b.h))
      fail("malformed annotation line " + std::to_string(lineno) + " in " +
           path.string());
    std::string trailing;
    if (ls >> trailing)
      fail("trailing tokens on annotation line " + std::to_string(lineno) +
           " in " + path.string());
    validate_box(b, path.string() + ":" + std::to_string(lineno));
    boxes.push_back(b);
  }
  return boxes;
}

void save_annotations(const std::vector<BoxAnnotation>& boxes,
                      const std::filesystem::path& path) {
  std::string out;
  char buf[128];
  for (const BoxAnnotation& b : boxes) {
    validate_box(b, "save_annotations");
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", b.class_id,
                  b.cx, b.cy, b.w, b.h);
    out += buf;
  }
  atomic_write(path, out);
}

PixelMask load_mask(const std::filesystem::path& path) {
  Gray8 img = read_gray8_png(path);
  for (std::uint8_t v : img.pixels)
    if (v > kMaskScab)
      fail("unknown mask label " + std::to_string(v) + " in " + path.string());
  return PixelMask{img.width, img.height, std::move(img.pixels)};
}

void save_mask(const PixelMask& mask, const std::filesystem::path& path) {
  for (std::uint8_t v : mask.labels)
    if (v > kMaskScab) fail("unknown mask label " + std::to_string(v));
  write_gray8_png(Gray8{mask.width, mask.height, mask.labels}, path);
}

}  // namespace mspipe
