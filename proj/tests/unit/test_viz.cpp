#include <filesystem>

#include "doctest.h"
#include "jcas/preprocess/dataset.hpp"
#include "jcas/viz/grid.hpp"

using namespace jcas;
using namespace jcas::viz;
using preprocess::DfsFrame;

namespace {

DfsFrame cell(std::size_t b, std::size_t t, float fill = 0.0f) {
  DfsFrame f;
  f.A = 1;
  f.B = b;
  f.T = t;
  f.stft_bins = b;
  f.valid_time = t;
  f.reported_fs = 100.0;
  f.values.assign(b * t, fill);
  return f;
}

std::vector<Rgb> block(const Image& img, const CellRect& r) {
  std::vector<Rgb> out;
  for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
    for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) out.push_back(img.pixel(x, y));
  return out;
}

// Summed colour intensity of a cell's rows at least `away` bins from 0 Hz,
// over columns [t0, t1).
double off_centre_energy(const Image& img, const CellRect& r, std::size_t centre, std::size_t away, std::size_t t0,
                         std::size_t t1) {
  double e = 0;
  for (std::size_t b = 0; b < r.h; ++b) {
    if (b + away > centre && b < centre + away) continue;
    const std::size_t y = r.y0 + (r.h - 1 - b);
    for (std::size_t x = r.x0 + t0; x < r.x0 + t1; ++x) {
      const Rgb p = img.pixel(x, y);
      e += p.r + p.g + p.b;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("zero and identical cells render as expected") {
  std::vector<DfsFrame> cells{cell(8, 6), cell(8, 6), cell(8, 6), cell(8, 6)};
  for (std::size_t i = 0; i < cells[1].values.size(); ++i) cells[1].values[i] = float((i * 37) % 11) / 10.0f;
  cells[3] = cells[1];
  GridLayout lay;
  lay.rows = 2;
  lay.cols = 2;
  const Image img = render_dfs_grid(cells, lay);
  for (const Rgb& p : block(img, cell_rect(lay, 8, 6, 0, 0))) CHECK(p == colour(0.0, lay.color));
  CHECK(block(img, cell_rect(lay, 8, 6, 0, 1)) == block(img, cell_rect(lay, 8, 6, 1, 1)));
  CHECK(block(img, cell_rect(lay, 8, 6, 0, 1)) != block(img, cell_rect(lay, 8, 6, 0, 0)));
  CHECK(encode_ppm(img) == encode_ppm(render_dfs_grid(cells, lay)));
}

TEST_CASE("dB floor clamps and normalisation modes differ") {
  CHECK(level(1.0, Scale::Db, -60) == 1.0);
  CHECK(level(1e-3, Scale::Db, -60) == 0.0);
  CHECK(level(1e-5, Scale::Db, -60) == 0.0);
  CHECK(level(0.0, Scale::Db, -60) == 0.0);
  CHECK(level(std::sqrt(1e-3), Scale::Db, -60) == doctest::Approx(0.5));
  CHECK(level(0.25, Scale::Linear, -60) == 0.25);
  double prev = -1;
  for (int i = 0; i <= 100; ++i) {
    const double l = level(std::pow(10.0, -i / 20.0), Scale::Db, -60);
    CHECK(l >= 0.0);
    CHECK((prev < 0 || l <= prev));
    prev = l;
  }

  std::vector<DfsFrame> cells{cell(4, 4, 1.0f), cell(4, 4, 0.5f)};
  GridLayout lay;
  lay.cols = 2;
  lay.norm = Normalization::PerFrame;
  Image img = render_dfs_grid(cells, lay);
  CHECK(block(img, cell_rect(lay, 4, 4, 0, 0)) == block(img, cell_rect(lay, 4, 4, 0, 1)));
  lay.norm = Normalization::Global;
  img = render_dfs_grid(cells, lay);
  CHECK(block(img, cell_rect(lay, 4, 4, 0, 0)) != block(img, cell_rect(lay, 4, 4, 0, 1)));
  const Rgb floor = colour(0.0, ColorMap::Heat);
  for (const Rgb& p : block(img, cell_rect(lay, 4, 4, 0, 1))) CHECK(p.r >= floor.r);
}

TEST_CASE("layout errors") {
  GridLayout lay;
  lay.rows = 1;
  lay.cols = 3;
  CHECK_THROWS_AS(render_dfs_grid({cell(4, 4), cell(4, 4)}, lay), LayoutMismatch);
  CHECK_THROWS_AS(render_dfs_grid({cell(4, 4), cell(4, 4), cell(8, 4)}, lay), LayoutMismatch);
  DfsFrame two = cell(4, 4);
  two.A = 2;
  two.values.resize(32);
  CHECK_THROWS_AS(render_dfs_grid({cell(4, 4), cell(4, 4), two}, lay), LayoutMismatch);
}

TEST_CASE("ticks come from the frame axes and files round trip") {
  DfsFrame f = cell(64, 128);
  f.stft_bins = 64;
  const Ticks tk = axis_ticks(f);
  bool zero = false;
  for (const auto& [b, hz] : tk.doppler) zero |= (b == 32 && hz == 0.0);
  CHECK(zero);
  REQUIRE(tk.time.size() >= 2);
  CHECK(tk.time.front().second == 0.0);
  CHECK(tick_legend(f).find("doppler_ticks_hz") != std::string::npos);

  GridLayout lay;
  lay.cols = 1;
  const Image img = render_dfs_grid({f}, lay);
  const CellRect rc = cell_rect(lay, 64, 128, 0, 0);
  CHECK(img.pixel(1, rc.y0 + 63 - 32) == kTick);
  const auto path = std::filesystem::temp_directory_path() / "jcas_viz_rt.ppm";
  write_ppm(path, img);
  const Image back = read_ppm(path);
  CHECK(back.width == img.width);
  CHECK(back.rgb == img.rgb);
  std::filesystem::remove(path);
  CHECK(grid_filename("dataset1", 5, "squat_frontal") == "dataset1_5_squat_frontal.ppm");
}

TEST_CASE("squat cells carry energy away from 0 Hz and empty cells do not") {
  auto spec = preprocess::DatasetSpec::preset(preprocess::DatasetKind::HighSnr);
  spec.classes = {{"empty", csi::MotionClass::Empty, 1, 1}, {"squat", csi::MotionClass::Squat, 1, 1}};
  spec.subjects.front().cells = {{0, csi::Orientation::Frontal, 3}, {1, csi::Orientation::Frontal, 3}};
  spec.expected_samples.reset();
  spec.expected_domains.reset();
  const auto ds = preprocess::build_dataset(spec, 9);
  std::vector<DfsFrame> stacked;
  for (const auto& s : ds.samples) stacked.push_back(s.dfs);
  // The receiver noise floor of the empty room sits near -45 dB below the
  // static path, so the grid is drawn with a -30 dB floor; columns whose
  // analysis window is cut by the recording edge leak the static path across
  // the band and are left out.
  GridLayout lay;
  lay.rows = stacked.size();
  lay.cols = stacked.front().A;
  lay.norm = Normalization::Global;
  lay.db_floor = -30.0;
  const auto cells = rx_cells(stacked);
  const Image img = render_dfs_grid(cells, lay);
  const std::size_t centre = stacked.front().stft_bins / 2, half = spec.pipeline.stft.window_len / 2;
  const std::size_t t0 = half, t1 = stacked.front().valid_time - half;
  for (std::size_t r = 0; r < lay.rows; ++r) {
    double e = 0;
    for (std::size_t c = 0; c < lay.cols; ++c)
      e += off_centre_energy(img, cell_rect(lay, cells[0].B, cells[0].T, r, c), centre, 3, t0, t1);
    if (ds.samples[r].class_id == 0) CHECK(e == 0.0);
    else CHECK(e > 1000.0);
  }
}
