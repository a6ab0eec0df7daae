#include "mspipe/composer.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mspipe/errors.hpp"
#include "mspipe/png_io.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

using nlohmann::json;

const std::vector<ImageSetSpec>& image_set_table() {
  static const std::vector<ImageSetSpec> table = [] {
    auto b = [](int nm) { return ChannelSource::band(nm); };
    std::vector<ImageSetSpec> t;
    t.push_back({"RGB",
                 {ChannelSource::rgb(0), ChannelSource::rgb(1),
                  ChannelSource::rgb(2)}});
    t.push_back({"SegN", {ChannelSource::seg()}});
    t.push_back({"MS7,3,1", {b(779), b(622), b(545)}});
    t.push_back({"MS7,3+SegN", {b(779), b(622), ChannelSource::seg()}});
    t.push_back({"MS7,3,1+5,2,6",
                 {b(779), b(622), b(545), b(701), b(579), b(737)}});
    t.push_back({"MS7,3,1+5,2,6+8,4,0",
                 {b(779), b(622), b(545), b(701), b(579), b(737), b(816),
                  b(658), ChannelSource::pan()}});
    return t;
  }();
  return table;
}

const ImageSetSpec& image_set_by_name(const std::string& name) {
  for (const ImageSetSpec& spec : image_set_table())
    if (spec.name == name) return spec;
  fail("unknown image set: " + name);
}

std::string image_set_slug(const std::string& name) {
  std::string slug;
  for (char c : name) {
    if (c == ',')
      slug += '_';
    else if (c == '+')
      slug += '-';
    else
      slug += c;
  }
  return slug;
}

RgbImage load_rgb_image(const std::filesystem::path& path) {
  Rgb8 png = read_rgb8_png(path);
  RgbImage img;
  img.width = png.width;
  img.height = png.height;
  for (int c = 0; c < 3; ++c) img.ch[c] = Plane(png.width, png.height);
  const std::size_t n = static_cast<std::size_t>(png.width) * png.height;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      img.ch[c].v[i] = static_cast<double>(png.pixels[3 * i + c]) / 255.0;
  return img;
}

void save_rgb_image(const RgbImage& img, const std::filesystem::path& path) {
  Rgb8 png;
  png.width = img.width;
  png.height = img.height;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  png.pixels.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      double v = std::clamp(img.ch[c].v[i], 0.0, 1.0);
      png.pixels[3 * i + c] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  write_rgb8_png(png, path);
}

// Min-max rescale into [0,1]; a constant plane maps to all zeros.
static Plane rescale_unit(const Plane& p) {
  const double lo = plane_min(p);
  const double hi = plane_max(p);
  Plane out(p.width, p.height);
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < p.size(); ++i) out.v[i] = (p.v[i] - lo) * inv;
  }
  return out;
}

ComposedImage compose(const ImageSetSpec& spec, const SpectralCube* cube,
                      const ProbabilityMap* prob_map, const RgbImage* rgb) {
  ComposedImage out;
  out.set_name = spec.name;

  auto take_dims = [&](int w, int h, const char* what) {
    if (out.width == 0) {
      out.width = w;
      out.height = h;
    } else if (out.width != w || out.height != h) {
      fail(std::string("compose: ") + what + " dimensions disagree");
    }
  };

  for (const ChannelSource& src : spec.channels) {
    switch (src.kind) {
      case ChannelSource::Kind::band: {
        if (!cube) fail("compose: image set " + spec.name + " needs a cube");
        take_dims(cube->width, cube->height, "cube");
        out.channels.push_back(
            rescale_unit(cube->bands[wavelength_index(src.value)]));
        break;
      }
      case ChannelSource::Kind::pan_gray: {
        if (!cube) fail("compose: image set " + spec.name + " needs a cube");
        take_dims(cube->width, cube->height, "cube");
        out.channels.push_back(rescale_unit(cube->pan));
        break;
      }
      case ChannelSource::Kind::rgb: {
        if (!rgb) fail("compose: image set " + spec.name + " needs an RGB image");
        take_dims(rgb->width, rgb->height, "rgb");
        out.channels.push_back(rgb->ch[src.value]);
        break;
      }
      case ChannelSource::Kind::seg_mask: {
        if (!prob_map)
          fail("compose: image set " + spec.name + " needs a probability map");
        take_dims(prob_map->width, prob_map->height, "probability map");
        out.channels.push_back(prob_map->prob);
        break;
      }
    }
  }
  return out;
}

ComposedImage load_composed(const std::filesystem::path& path) {
  PlanarImage img = load_planar(path);
  if (img.has_pan) fail("composed image must not carry a PAN plane");
  ComposedImage out;
  out.width = img.width;
  out.height = img.height;
  out.channels = std::move(img.planes);
  out.set_name = img.extra.value("set_name", "");
  out.scene_id = img.extra.value("scene_id", "");
  return out;
}

void save_composed(const ComposedImage& img, const std::filesystem::path& path) {
  PlanarImage out;
  out.width = img.width;
  out.height = img.height;
  out.has_pan = false;
  out.normalized = false;
  out.planes = img.channels;
  for (std::size_t i = 0; i < img.channels.size(); ++i)
    out.band_labels.push_back(static_cast<double>(i));
  out.extra["kind"] = "composed";
  out.extra["set_name"] = img.set_name;
  out.extra["scene_id"] = img.scene_id;
  save_planar(out, path);
}

void save_composed_png(const ComposedImage& img,
                       const std::filesystem::path& path) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  auto quantize = [](double v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
  };
  if (img.channels.size() == 1) {
    Gray8 png{img.width, img.height, {}};
    png.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      png.pixels[i] = quantize(img.channels[0].v[i]);
    write_gray8_png(png, path);
  } else if (img.channels.size() == 3) {
    Rgb8 png{img.width, img.height, {}};
    png.pixels.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c)
        png.pixels[3 * i + c] = quantize(img.channels[c].v[i]);
    write_rgb8_png(png, path);
  } else {
    fail("PNG preview supports 1- or 3-channel image sets only");
  }
}

FirstLayerWeights stack_first_layer(const FirstLayerWeights& base, int n) {
  if (base.in_channels != 3)
    fail("stack_first_layer: base must have exactly 3 input channels");
  if (n < 1) fail("stack_first_layer: n must be >= 1");

  FirstLayerWeights out;
  out.out_channels = base.out_channels;
  out.in_channels = 3 * n;
  out.kernel_h = base.kernel_h;
  out.kernel_w = base.kernel_w;
  out.values.resize(static_cast<std::size_t>(out.out_channels) *
                    out.in_channels * out.kernel_h * out.kernel_w);
  const std::size_t spatial =
      static_cast<std::size_t>(base.kernel_h) * base.kernel_w;
  for (int o = 0; o < base.out_channels; ++o)
    for (int block = 0; block < n; ++block)
      for (int c = 0; c < 3; ++c) {
        const double* src =
            base.values.data() + (static_cast<std::size_t>(o) * 3 + c) * spatial;
        double* dst = out.values.data() +
                      (static_cast<std::size_t>(o) * out.in_channels +
                       3 * block + c) *
                          spatial;
        std::copy(src, src + spatial, dst);
      }
  return out;
}

FirstLayerWeights load_first_layer(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path));
  FirstLayerWeights w;
  w.out_channels = doc.at("out_channels").get<int>();
  w.in_channels = doc.at("in_channels").get<int>();
  w.kernel_h = doc.at("kernel_h").get<int>();
  w.kernel_w = doc.at("kernel_w").get<int>();
  w.values = doc.at("values").get<std::vector<double>>();
  if (w.values.size() != static_cast<std::size_t>(w.out_channels) *
                             w.in_channels * w.kernel_h * w.kernel_w)
    fail("first-layer weight file has inconsistent dimensions: " +
         path.string());
  return w;
}

void save_first_layer(const FirstLayerWeights& w,
                      const std::filesystem::path& path) {
  json doc;
  doc["out_channels"] = w.out_channels;
  doc["in_channels"] = w.in_channels;
  doc["kernel_h"] = w.kernel_h;
  doc["kernel_w"] = w.kernel_w;
  doc["values"] = w.values;
  atomic_write(path, doc.dump() + "\n");
}

namespace {

// Bilinear sample at pixel-center coordinates with reflect-101 indices.
double sample_bilinear(const Plane& p, double fx, double fy) {
  const double gx = fx - 0.5;
  const double gy = fy - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double tx = gx - x0;
  const double ty = gy - y0;
  const int xa = mirror_index(x0, p.width);
  const int xb = mirror_index(x0 + 1, p.width);
  const int ya = mirror_index(y0, p.height);
  const int yb = mirror_index(y0 + 1, p.height);
  const double top = (1.0 - tx) * p.at(xa, ya) + tx * p.at(xb, ya);
  const double bot = (1.0 - tx) * p.at(xa, yb) + tx * p.at(xb, yb);
  return (1.0 - ty) * top + ty * bot;
}

// Transforms a box through a corner map, takes the axis-aligned hull,
// clips to the unit square, and drops boxes that lose >90% of their
// transformed area to the clip.
template <typename PointMap>
std::optional<BoxAnnotation> map_box(const BoxAnnotation& b, PointMap&& pm) {
  const double corners[4][2] = {{b.cx - b.w / 2, b.cy - b.h / 2},
                                {b.cx + b.w / 2, b.cy - b.h / 2},
                                {b.cx - b.w / 2, b.cy + b.h / 2},
                                {b.cx + b.w / 2, b.cy + b.h / 2}};
  double x1 = 1e30, y1 = 1e30, x2 = -1e30, y2 = -1e30;
  for (const auto& c : corners) {
    auto [u, v] = pm(c[0], c[1]);
    x1 = std::min(x1, u);
    y1 = std::min(y1, v);
    x2 = std::max(x2, u);
    y2 = std::max(y2, v);
  }
  const double area_before = (x2 - x1) * (y2 - y1);
  x1 = std::clamp(x1, 0.0, 1.0);
  x2 = std::clamp(x2, 0.0, 1.0);
  y1 = std::clamp(y1, 0.0, 1.0);
  y2 = std::clamp(y2, 0.0, 1.0);
  const double area_after = (x2 - x1) * (y2 - y1);
  if (!(area_after > 0.0) || area_after < 0.1 * area_before)
    return std::nullopt;
  return BoxAnnotation{b.class_id, (x1 + x2) / 2, (y1 + y2) / 2, x2 - x1,
                       y2 - y1};
}

template <typename PointMap>
std::vector<BoxAnnotation> map_boxes(const std::vector<BoxAnnotation>& boxes,
                                     PointMap&& pm) {
  std::vector<BoxAnnotation> out;
  for (const BoxAnnotation& b : boxes)
    if (auto mapped = map_box(b, pm)) out.push_back(*mapped);
  return out;
}

ComposedImage quarter_turn(const ComposedImage& img, int quarters) {
  ComposedImage out;
  out.scene_id = img.scene_id;
  out.set_name = img.set_name;
  const int w = img.width;
  const int h = img.height;
  const bool swap = quarters % 2 == 1;
  out.width = swap ? h : w;
  out.height = swap ? w : h;
  for (const Plane& src : img.channels) {
    Plane dst(out.width, out.height);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int nx = 0, ny = 0;
        switch (quarters) {
          case 1: nx = y, ny = w - 1 - x; break;
          case 2: nx = w - 1 - x, ny = h - 1 - y; break;
          case 3: nx = h - 1 - y, ny = x; break;
          default: nx = x, ny = y; break;
        }
        dst.at(nx, ny) = src.at(x, y);
      }
    out.channels.push_back(std::move(dst));
  }
  return out;
}

}  // namespace

AugmentedScene augment(const ComposedImage& image,
                       const std::vector<BoxAnnotation>& boxes,
                       const AugmentOp& op) {
  const int w = image.width;
  const int h = image.height;
  AugmentedScene out;
  out.image.scene_id = image.scene_id;
  out.image.set_name = image.set_name;
  out.image.width = w;
  out.image.height = h;

  switch (op.kind) {
    case AugmentOp::Kind::hflip: {
      for (const Plane& src : image.channels) {
        Plane dst(w, h);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) dst.at(x, y) = src.at(w - 1 - x, y);
        out.image.channels.push_back(std::move(dst));
      }
      out.boxes = map_boxes(boxes, [](double u, double v) {
        return std::pair{1.0 - u, v};
      });
      return out;
    }
    case AugmentOp::Kind::vflip: {
      for (const Plane& src : image.channels) {
        Plane dst(w, h);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) dst.at(x, y) = src.at(x, h - 1 - y);
        out.image.channels.push_back(std::move(dst));
      }
      out.boxes = map_boxes(boxes, [](double u, double v) {
        return std::pair{u, 1.0 - v};
      });
      return out;
    }
    case AugmentOp::Kind::rotate: {
      const double angle = op.angle_deg;
      if (std::fmod(angle, 90.0) == 0.0) {
        int quarters = static_cast<int>(std::fmod(angle / 90.0, 4.0));
        if (quarters < 0) quarters += 4;
        out.image = quarter_turn(image, quarters);
        auto pm = [quarters](double u, double v) {
          switch (quarters) {
            case 1: return std::pair{v, 1.0 - u};
            case 2: return std::pair{1.0 - u, 1.0 - v};
            case 3: return std::pair{1.0 - v, u};
            default: return std::pair{u, v};
          }
        };
        out.boxes = map_boxes(boxes, pm);
        return out;
      }
      const double rad = angle * std::numbers::pi / 180.0;
      // Screen-counterclockwise with y pointing down.
      const double ca = std::cos(rad);
      const double sa = std::sin(rad);
      const double cx = w / 2.0;
      const double cy = h / 2.0;
      for (const Plane& src : image.channels) {
        Plane dst(w, h);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double px = x + 0.5 - cx;
            const double py = y + 0.5 - cy;
            const double sx = cx + ca * px - sa * py;
            const double sy = cy + sa * px + ca * py;
            dst.at(x, y) = sample_bilinear(src, sx, sy);
          }
        out.image.channels.push_back(std::move(dst));
      }
      out.boxes = map_boxes(boxes, [&](double u, double v) {
        const double px = u * w - cx;
        const double py = v * h - cy;
        return std::pair{(cx + ca * px + sa * py) / w,
                         (cy - sa * px + ca * py) / h};
      });
      return out;
    }
    case AugmentOp::Kind::translate: {
      const int sx = static_cast<int>(std::lround(op.dx * w));
      const int sy = static_cast<int>(std::lround(op.dy * h));
      for (const Plane& src : image.channels) {
        Plane dst(w, h);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            dst.at(x, y) =
                src.at(mirror_index(x - sx, w), mirror_index(y - sy, h));
        out.image.channels.push_back(std::move(dst));
      }
      const double du = static_cast<double>(sx) / w;
      const double dv = static_cast<double>(sy) / h;
      out.boxes = map_boxes(boxes, [du, dv](double u, double v) {
        return std::pair{u + du, v + dv};
      });
      return out;
    }
    case AugmentOp::Kind::scale: {
      if (!(op.s > 0.0)) fail("augment: scale factor must be positive");
      const double cx = w / 2.0;
      const double cy = h / 2.0;
      for (const Plane& src : image.channels) {
        Plane dst(w, h);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const double sx = cx + (x + 0.5 - cx) / op.s;
            const double sy = cy + (y + 0.5 - cy) / op.s;
            dst.at(x, y) = sample_bilinear(src, sx, sy);
          }
        out.image.channels.push_back(std::move(dst));
      }
      out.boxes = map_boxes(boxes, [&](double u, double v) {
        return std::pair{0.5 + op.s * (u - 0.5), 0.5 + op.s * (v - 0.5)};
      });
      return out;
    }
  }
  fail("augment: unknown operation");
}

AugmentedScene mosaic(
    const std::array<const ComposedImage*, 4>& images,
    const std::array<const std::vector<BoxAnnotation>*, 4>& boxes) {
  for (const ComposedImage* img : images)
    if (!img) fail("mosaic: needs exactly 4 images");
  const std::size_t n_ch = images[0]->channels.size();
  for (const ComposedImage* img : images)
    if (img->channels.size() != n_ch)
      fail("mosaic: images must share the channel count");

  const int w = images[0]->width;
  const int h = images[0]->height;
  const int wl = w / 2, ht = h / 2;
  const struct {
    int ox, oy, qw, qh;
  } quads[4] = {{0, 0, wl, ht},
                {wl, 0, w - wl, ht},
                {0, ht, wl, h - ht},
                {wl, ht, w - wl, h - ht}};

  AugmentedScene out;
  out.image.scene_id = images[0]->scene_id + "+mosaic";
  out.image.set_name = images[0]->set_name;
  out.image.width = w;
  out.image.height = h;
  for (std::size_t c = 0; c < n_ch; ++c)
    out.image.channels.emplace_back(w, h);

  for (int q = 0; q < 4; ++q) {
    const ComposedImage& src = *images[q];
    const auto& quad = quads[q];
    for (std::size_t c = 0; c < n_ch; ++c) {
      for (int y = 0; y < quad.qh; ++y)
        for (int x = 0; x < quad.qw; ++x) {
          const double fx = (x + 0.5) * src.width / quad.qw;
          const double fy = (y + 0.5) * src.height / quad.qh;
          out.image.channels[c].at(quad.ox + x, quad.oy + y) =
              sample_bilinear(src.channels[c], fx, fy);
        }
    }
    for (const BoxAnnotation& b : *boxes[q]) {
      auto mapped = map_box(b, [&](double u, double v) {
        return std::pair{(quad.ox + u * quad.qw) / w,
                         (quad.oy + v * quad.qh) / h};
      });
      if (mapped) out.boxes.push_back(*mapped);
    }
  }
  return out;
}

}  // namespace mspipe
