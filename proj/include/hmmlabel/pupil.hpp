#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmmlabel/types.hpp"

namespace hmmlabel::pupil {

/// Row-major intensities in [0,1].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), data(w * h, fill) {}

  float& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
  /// Throws InputError on a size mismatch or an intensity outside [0,1].
  void validate() const;
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Row-major 0/1 pixels.
struct BinaryImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;

  BinaryImage() = default;
  BinaryImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), bits(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return bits[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return bits[y * width + x]; }
  std::size_t count() const;
  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Polygon = std::vector<Point>;

/// No parameter combination produced a circle-shaped largest blob.
class NoPupil : public Error {
 public:
  using Error::Error;
};

/// Linear-interpolated percentile (q in [0,1]) of an ascending sample.
double percentile(const std::vector<float>& sorted, double q);

/// Maps the 2nd percentile to 0 and the 98th to 1, clamped. A constant image
/// maps to zeros. With a mask, percentiles come from masked pixels only and
/// unmasked pixels are set to 0.
GrayImage rescale_intensity(const GrayImage& image);
GrayImage rescale_intensity(const GrayImage& image, const BinaryImage& mask);

/// bit = intensity > threshold, on 1 - intensity when inverted.
BinaryImage binarize_cdf(const GrayImage& image, float threshold, bool invert);

BinaryImage erode(const BinaryImage& image, std::size_t window);
BinaryImage dilate(const BinaryImage& image, std::size_t window);

enum class MorphOp : std::uint8_t { open, close };

/// Square structuring element of odd side `window`. The image sits on an
/// infinite 0 background: erode/dilate see 0 outside, and closing is computed
/// before cropping back, so it never clears foreground at the border.
BinaryImage morphology(const BinaryImage& image, MorphOp op, std::size_t window);

/// 8-connected component.
struct Blob {
  std::size_t area = 0;
  std::size_t min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;

  Point centroid() const { return {sum_x / static_cast<double>(area), sum_y / static_cast<double>(area)}; }
  std::size_t box_width() const { return max_x - min_x + 1; }
  std::size_t box_height() const { return max_y - min_y + 1; }
};

/// Components in raster order of their first pixel.
std::vector<Blob> connected_components(const BinaryImage& image);
/// Largest component; ties go to the one found first in raster order.
std::optional<Blob> largest_blob(const BinaryImage& image);

/// Pixels whose center (x + 0.5, y + 0.5) lies inside the polygon (even-odd rule).
BinaryImage polygon_mask(std::size_t width, std::size_t height, const Polygon& polygon);

struct PupilParams {
  float cdf_threshold = 0.0f;
  std::size_t open_window = 1;
  std::size_t close_window = 1;
  friend bool operator==(const PupilParams&, const PupilParams&) = default;
};

struct PupilSearch {
  std::vector<float> thresholds{0.02f, 0.05f, 0.1f, 0.15f, 0.2f};
  std::vector<std::size_t> open_windows{1, 3, 5};
  std::vector<std::size_t> close_windows{1, 3, 5};
  /// Largest allowed bounding-box side ratio of the chosen blob.
  double max_aspect = 1.5;
  bool invert = true;
};

struct PupilResult {
  Point center;
  std::size_t blob_area = 0;
  PupilParams params_used;
};

/// Binary image after masking, thresholding, opening then closing.
BinaryImage pupil_candidate(const GrayImage& rescaled, const BinaryImage& mask, const PupilParams& params,
                            bool invert);

/// Throws NoPupil when no grid point passes the shape check, InputError on a
/// degenerate polygon.
PupilResult extract_pupil(const GrayImage& eye, const Polygon& polygon, const PupilSearch& search = {});

/// 8-bit binary PGM ("P5"); intensities scale linearly to [0,1].
GrayImage read_pgm(std::string_view bytes);
GrayImage load_pgm(const std::string& path);
std::string write_pgm(const GrayImage& image);
void save_pgm(const std::string& path, const GrayImage& image);

/// Whitespace-separated "x,y" vertex pairs.
Polygon parse_polygon(std::string_view text);
Polygon load_polygon(const std::string& path);

}  // namespace hmmlabel::pupil
