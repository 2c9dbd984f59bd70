#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "jcas/preprocess/pipeline.hpp"

namespace jcas::viz {

class LayoutMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ColorMap { Mono, Heat };
enum class Scale { Db, Linear };
enum class Normalization { Global, PerFrame };

struct GridLayout {
  std::size_t rows = 1;   // classes or TX beams
  std::size_t cols = 16;  // RX beams
  ColorMap color = ColorMap::Heat;
  Scale scale = Scale::Db;
  double db_floor = -60.0;
  Normalization norm = Normalization::PerFrame;
  std::size_t gap = 1;    // separator pixels between cells
  bool axes = true;       // tick margin on the left and bottom
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
  Rgb pixel(std::size_t x, std::size_t y) const;
  void set(std::size_t x, std::size_t y, Rgb c);
};

// Colour of a level in [0, 1].
Rgb colour(double level, ColorMap map);
inline constexpr Rgb kSeparator{96, 96, 96};
inline constexpr Rgb kMargin{255, 255, 255};
inline constexpr Rgb kTick{0, 0, 0};
inline constexpr std::size_t kMargin_px = 4;

// Level of a magnitude already divided by the normalising maximum.
double level(double v, Scale scale, double db_floor);

// Cells in row-major order, one single-channel frame each, all with the same
// B x T. Doppler increases upwards, time to the right. Ticks mark multiples
// of a round step on the frames' Doppler (Hz) and time (s) axes.
Image render_dfs_grid(const std::vector<preprocess::DfsFrame>& cells, const GridLayout& layout);

// Pixel rectangle of cell (row, col) in a rendered grid.
struct CellRect {
  std::size_t x0, y0, w, h;
};
CellRect cell_rect(const GridLayout& layout, std::size_t b, std::size_t t, std::size_t row, std::size_t col);

// Stacked frames -> one row of RX-beam cells per frame.
std::vector<preprocess::DfsFrame> rx_cells(const std::vector<preprocess::DfsFrame>& stacked);

struct Ticks {
  std::vector<std::pair<std::size_t, double>> doppler;  // (Doppler bin, Hz)
  std::vector<std::pair<std::size_t, double>> time;     // (column, s)
};
Ticks axis_ticks(const preprocess::DfsFrame& f);
std::string tick_legend(const preprocess::DfsFrame& f);

std::vector<std::uint8_t> encode_ppm(const Image& img);
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

// <dataset>_<txbeam>_<class>.ppm
std::string grid_filename(const std::string& dataset, int tx_beam, const std::string& class_name);

}  // namespace jcas::viz
