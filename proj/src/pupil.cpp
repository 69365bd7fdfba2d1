#include "hmmlabel/pupil.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hmmlabel/kernels.hpp"
#include "hmmlabel/records.hpp"

namespace hmmlabel::pupil {

namespace {

void check_window(std::size_t window) {
  if (window == 0 || window % 2 == 0) throw InputError("morphology window must be odd and >= 1");
}

BinaryImage window_pass(const BinaryImage& image, std::size_t window, kernels::Extreme extreme) {
  check_window(window);
  if (window == 1 || image.bits.empty()) return image;
  const auto& k = kernels::active();
  BinaryImage tmp(image.width, image.height), out(image.width, image.height);
  const std::size_t radius = window / 2;
  k.window_extreme(image.bits.data(), tmp.bits.data(), image.width, image.height, radius, kernels::Axis::rows,
                   extreme);
  k.window_extreme(tmp.bits.data(), out.bits.data(), image.width, image.height, radius, kernels::Axis::cols,
                   extreme);
  return out;
}

double polygon_area(const Polygon& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % polygon.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(twice);
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + " '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void GrayImage::validate() const {
  if (data.size() != width * height) throw InputError("image data does not match its dimensions");
  for (float v : data) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InputError("image intensity outside [0,1]");
  }
}

std::size_t BinaryImage::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

double percentile(const std::vector<float>& sorted, double q) {
  if (sorted.empty()) throw InputError("percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

GrayImage rescale_intensity(const GrayImage& image) {
  return rescale_intensity(image, BinaryImage(image.width, image.height, 1));
}

GrayImage rescale_intensity(const GrayImage& image, const BinaryImage& mask) {
  if (image.data.empty()) throw InputError("cannot rescale an empty image");
  if (mask.width != image.width || mask.height != image.height) throw InputError("mask size differs from image");
  std::vector<float> values;
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    if (mask.bits[i]) values.push_back(image.data[i]);
  }
  GrayImage out(image.width, image.height);
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double low = percentile(values, 0.02);
  const double high = percentile(values, 0.98);
  if (!(high > low)) return out;
  kernels::active().affine_clamp(image.data.data(), out.data.data(), out.data.size(), static_cast<float>(low),
                                 static_cast<float>(1.0 / (high - low)));
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask.bits[i]) out.data[i] = 0.0f;
  }
  return out;
}

BinaryImage binarize_cdf(const GrayImage& image, float threshold, bool invert) {
  BinaryImage out(image.width, image.height);
  kernels::active().threshold_above(image.data.data(), out.bits.data(), image.data.size(), threshold, invert);
  return out;
}

BinaryImage erode(const BinaryImage& image, std::size_t window) {
  return window_pass(image, window, kernels::Extreme::min);
}

BinaryImage dilate(const BinaryImage& image, std::size_t window) {
  return window_pass(image, window, kernels::Extreme::max);
}

BinaryImage morphology(const BinaryImage& image, MorphOp op, std::size_t window) {
  if (op == MorphOp::open) return dilate(erode(image, window), window);
  check_window(window);
  if (window == 1) return image;
  // Close on a zero margin wide enough to hold the dilation, then crop, so
  // foreground touching the border is not eaten by the erosion.
  const std::size_t r = window / 2;
  BinaryImage padded(image.width + 2 * r, image.height + 2 * r);
  for (std::size_t y = 0; y < image.height; ++y) {
    std::copy_n(image.bits.begin() + static_cast<std::ptrdiff_t>(y * image.width), image.width,
                padded.bits.begin() + static_cast<std::ptrdiff_t>((y + r) * padded.width + r));
  }
  const BinaryImage closed = erode(dilate(padded, window), window);
  BinaryImage out(image.width, image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    std::copy_n(closed.bits.begin() + static_cast<std::ptrdiff_t>((y + r) * padded.width + r), image.width,
                out.bits.begin() + static_cast<std::ptrdiff_t>(y * image.width));
  }
  return out;
}

std::vector<Blob> connected_components(const BinaryImage& image) {
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  std::vector<std::uint8_t> seen(w * h, 0);
  std::vector<std::size_t> stack;
  std::vector<Blob> blobs;
  for (std::size_t start = 0; start < w * h; ++start) {
    if (!image.bits[start] || seen[start]) continue;
    Blob blob;
    blob.min_x = blob.max_x = start % w;
    blob.min_y = blob.max_y = start / w;
    seen[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t x = p % w;
      const std::size_t y = p / w;
      ++blob.area;
      blob.sum_x += static_cast<double>(x);
      blob.sum_y += static_cast<double>(y);
      blob.min_x = std::min(blob.min_x, x);
      blob.max_x = std::max(blob.max_x, x);
      blob.min_y = std::min(blob.min_y, y);
      blob.max_y = std::max(blob.max_y, y);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) || ny >= static_cast<std::ptrdiff_t>(h)) {
            continue;
          }
          const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (image.bits[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
    blobs.push_back(blob);
  }
  return blobs;
}

std::optional<Blob> largest_blob(const BinaryImage& image) {
  std::optional<Blob> best;
  for (const auto& blob : connected_components(image)) {
    if (!best || blob.area > best->area) best = blob;
  }
  return best;
}

BinaryImage polygon_mask(std::size_t width, std::size_t height, const Polygon& polygon) {
  BinaryImage mask(width, height);
  const std::size_t n = polygon.size();
  for (std::size_t y = 0; y < height; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = polygon[i];
        const auto& b = polygon[j];
        if ((a.y > py) == (b.y > py)) continue;
        // Sign of the cross product says which side of edge a->b the point is on;
        // it only uses coordinate differences, so integer shifts leave it unchanged.
        const double cross = (b.x - a.x) * (py - a.y) - (px - a.x) * (b.y - a.y);
        if ((b.y > a.y) ? cross > 0.0 : cross < 0.0) inside = !inside;
      }
      mask.at(x, y) = inside ? 1 : 0;
    }
  }
  return mask;
}

BinaryImage pupil_candidate(const GrayImage& rescaled, const BinaryImage& mask, const PupilParams& params,
                            bool invert) {
  BinaryImage bits = binarize_cdf(rescaled, params.cdf_threshold, invert);
  for (std::size_t i = 0; i < bits.bits.size(); ++i) bits.bits[i] &= mask.bits[i];
  bits = morphology(bits, MorphOp::open, params.open_window);
  return morphology(bits, MorphOp::close, params.close_window);
}

PupilResult extract_pupil(const GrayImage& eye, const Polygon& polygon, const PupilSearch& search) {
  eye.validate();
  if (eye.data.empty()) throw InputError("empty eye image");
  if (polygon.size() < 3) throw InputError("polygon needs at least 3 vertices");
  for (const auto& p : polygon) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(eye.width) &&
          p.y <= static_cast<double>(eye.height))) {
      throw InputError("polygon vertex outside the image");
    }
  }
  if (!(polygon_area(polygon) > 0.0)) throw InputError("polygon has zero area");

  const BinaryImage mask = polygon_mask(eye.width, eye.height, polygon);
  const GrayImage rescaled = rescale_intensity(eye, mask);

  std::optional<PupilResult> best;
  for (float threshold : search.thresholds) {
    for (std::size_t open : search.open_windows) {
      for (std::size_t close : search.close_windows) {
        const PupilParams params{threshold, open, close};
        const auto blob = largest_blob(pupil_candidate(rescaled, mask, params, search.invert));
        if (!blob) continue;
        const double aspect = static_cast<double>(blob->box_width()) / static_cast<double>(blob->box_height());
        if (aspect > search.max_aspect || aspect < 1.0 / search.max_aspect) continue;
        if (!best || blob->area > best->blob_area) best = PupilResult{blob->centroid(), blob->area, params};
      }
    }
  }
  if (!best) throw NoPupil("no circle-shaped blob for any parameter combination");
  return *best;
}

GrayImage read_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_number = [&](const char* what) {
    skip_space();
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (ec != std::errc()) throw InputError(std::string("PGM header: bad ") + what);
    pos = static_cast<std::size_t>(end - bytes.data());
    return value;
  };
  if (bytes.substr(0, 2) != "P5") throw InputError("not a binary PGM (P5) image");
  pos = 2;
  const std::size_t width = read_number("width");
  const std::size_t height = read_number("height");
  const std::size_t maxval = read_number("maxval");
  if (width == 0 || height == 0) throw InputError("PGM image has no pixels");
  if (maxval == 0 || maxval > 255) throw InputError("only 8-bit PGM images are supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw InputError("PGM header: missing separator before pixel data");
  }
  ++pos;
  if (bytes.size() - pos < width * height) throw InputError("PGM pixel data is truncated");
  GrayImage image(width, height);
  for (std::size_t i = 0; i < width * height; ++i) {
    const auto v = static_cast<unsigned char>(bytes[pos + i]);
    if (v > maxval) throw InputError("PGM pixel exceeds maxval");
    image.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return image;
}

GrayImage load_pgm(const std::string& path) { return read_pgm(read_file(path, "image")); }

std::string write_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.data.size());
  for (float v : image.data) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
  }
  return out;
}

void save_pgm(const std::string& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image '" + path + "'");
  out << write_pgm(image);
}

Polygon parse_polygon(std::string_view text) {
  Polygon polygon;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    const auto comma = token.find(',');
    if (comma == std::string::npos) throw InputError("polygon vertex '" + token + "' is not of the form x,y");
    polygon.push_back({parse_double(std::string_view(token).substr(0, comma)),
                       parse_double(std::string_view(token).substr(comma + 1))});
  }
  if (polygon.size() < 3) throw InputError("polygon needs at least 3 vertices");
  return polygon;
}

Polygon load_polygon(const std::string& path) { return parse_polygon(read_file(path, "polygon")); }

}  // namespace hmmlabel::pupil
