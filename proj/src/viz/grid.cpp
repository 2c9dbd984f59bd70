#include "jcas/viz/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace jcas::viz {

Rgb Image::pixel(std::size_t x, std::size_t y) const {
  const std::size_t i = (y * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Image::set(std::size_t x, std::size_t y, Rgb c) {
  const std::size_t i = (y * width + x) * 3;
  rgb[i] = c.r;
  rgb[i + 1] = c.g;
  rgb[i + 2] = c.b;
}

namespace {

std::uint8_t byte(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

double nice_step(double span, int target) {
  const double raw = span / target;
  const double p = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= raw) return m * p;
  return 10 * p;
}

}  // namespace

Rgb colour(double level, ColorMap map) {
  const double v = std::clamp(level, 0.0, 1.0);
  if (map == ColorMap::Mono) return {byte(v), byte(v), byte(v)};
  // black -> red -> yellow -> white
  return {byte(3 * v), byte(3 * v - 1), byte(3 * v - 2)};
}

double level(double v, Scale scale, double db_floor) {
  if (scale == Scale::Linear) return std::clamp(v, 0.0, 1.0);
  if (!(v > 0)) return 0.0;
  const double db = 20.0 * std::log10(std::min(v, 1.0));
  return db <= db_floor ? 0.0 : 1.0 - db / db_floor;
}

CellRect cell_rect(const GridLayout& layout, std::size_t b, std::size_t t, std::size_t row, std::size_t col) {
  const std::size_t left = layout.axes ? kMargin_px : 0;
  return {left + layout.gap + col * (t + layout.gap), layout.gap + row * (b + layout.gap), t, b};
}

Ticks axis_ticks(const preprocess::DfsFrame& f) {
  Ticks tk;
  const auto dop = f.doppler_axis();
  const auto tim = f.time_axis();
  if (dop.size() > 1) {
    const double step = nice_step(dop.back() - dop.front(), 4);
    for (std::size_t b = 0; b < dop.size(); ++b) {
      const double k = dop[b] / step;
      if (std::abs(k - std::round(k)) < 1e-9) tk.doppler.emplace_back(b, dop[b]);
    }
  }
  if (tim.size() > 1) {
    const double step = nice_step(tim.back() - tim.front(), 4);
    for (std::size_t t = 0; t < tim.size(); ++t) {
      const double k = tim[t] / step;
      if (std::abs(k - std::round(k)) < 1e-6) tk.time.emplace_back(t, tim[t]);
    }
  }
  return tk;
}

std::string tick_legend(const preprocess::DfsFrame& f) {
  const Ticks tk = axis_ticks(f);
  std::string out = "doppler_ticks_hz =";
  for (const auto& [b, hz] : tk.doppler) out += fmt::format(" {}@{}", hz, b);
  out += "\ntime_ticks_s =";
  for (const auto& [t, s] : tk.time) out += fmt::format(" {}@{}", s, t);
  return out + "\n";
}

Image render_dfs_grid(const std::vector<preprocess::DfsFrame>& cells, const GridLayout& layout) {
  if (layout.rows == 0 || layout.cols == 0) throw LayoutMismatch("grid needs at least one row and column");
  if (cells.size() != layout.rows * layout.cols)
    throw LayoutMismatch(fmt::format("{} frames for a {} x {} grid", cells.size(), layout.rows, layout.cols));
  const std::size_t B = cells.front().B, T = cells.front().T;
  for (const auto& c : cells) {
    if (c.A != 1) throw LayoutMismatch("grid cells must be single-channel frames");
    if (c.B != B || c.T != T) throw LayoutMismatch("grid cells differ in Doppler or time size");
  }
  double global = 0;
  for (const auto& c : cells)
    for (float v : c.values) global = std::max(global, double(v));

  const std::size_t left = layout.axes ? kMargin_px : 0, bottom = layout.axes ? kMargin_px : 0;
  Image img;
  img.width = left + layout.gap + layout.cols * (T + layout.gap);
  img.height = layout.gap + layout.rows * (B + layout.gap) + bottom;
  img.rgb.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      img.set(x, y, (x < left || y >= img.height - bottom) ? kMargin : kSeparator);

  for (std::size_t r = 0; r < layout.rows; ++r)
    for (std::size_t c = 0; c < layout.cols; ++c) {
      const auto& f = cells[r * layout.cols + c];
      double peak = global;
      if (layout.norm == Normalization::PerFrame) {
        peak = 0;
        for (float v : f.values) peak = std::max(peak, double(v));
      }
      const CellRect rc = cell_rect(layout, B, T, r, c);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
          const double v = peak > 0 ? f.at(0, b, t) / peak : 0.0;
          img.set(rc.x0 + t, rc.y0 + (B - 1 - b), colour(level(v, layout.scale, layout.db_floor), layout.color));
        }
    }

  if (layout.axes) {
    const Ticks tk = axis_ticks(cells.front());
    for (std::size_t r = 0; r < layout.rows; ++r) {
      const CellRect rc = cell_rect(layout, B, T, r, 0);
      for (const auto& [b, hz] : tk.doppler)
        for (std::size_t x = 1; x < left; ++x) img.set(x, rc.y0 + (B - 1 - b), kTick);
    }
    for (std::size_t c = 0; c < layout.cols; ++c) {
      const CellRect rc = cell_rect(layout, B, T, layout.rows - 1, c);
      for (const auto& [t, s] : tk.time)
        for (std::size_t y = img.height - bottom; y + 1 < img.height; ++y) img.set(rc.x0 + t, y, kTick);
    }
  }
  return img;
}

std::vector<preprocess::DfsFrame> rx_cells(const std::vector<preprocess::DfsFrame>& stacked) {
  std::vector<preprocess::DfsFrame> out;
  for (const auto& f : stacked) {
    auto parts = preprocess::unstack_rx(f);
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = fmt::format("P6\n{} {}\n255\n", img.width, img.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_ppm(img);
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  Image img;
  int maxval = 0;
  is >> magic >> img.width >> img.height >> maxval;
  if (!is || magic != "P6" || maxval != 255) throw std::runtime_error("not a P6 PPM: " + path.string());
  is.get();
  img.rgb.resize(img.width * img.height * 3);
  is.read(reinterpret_cast<char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
  if (!is) throw std::runtime_error("truncated PPM: " + path.string());
  return img;
}

std::string grid_filename(const std::string& dataset, int tx_beam, const std::string& class_name) {
  return fmt::format("{}_{}_{}.ppm", dataset, tx_beam, class_name);
}

}  // namespace jcas::viz
