#include <benchmark/benchmark.h>

#include "omkit/constants.hpp"
#include "omkit/geometry.hpp"
#include "omkit/locksim.hpp"
#include "omkit/pec.hpp"
#include "omkit/spectra.hpp"
#include "omkit/spectra_fit.hpp"
#include "omkit/threads.hpp"

using namespace omkit;

static void BM_ConvolveDose(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const pec::PsfModel psf = pec::PsfModel::gaas_250nm();
  pec::DoseMap d(n, n, 5.0);
  for (std::size_t y = n / 3; y < 2 * n / 3; ++y)
    for (std::size_t x = n / 3; x < 2 * n / 3; ++x) d.at(x, y) = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(pec::convolve_dose(d, psf));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_ConvolveDose)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_CorrectDose(benchmark::State& state) {
  const pec::PsfModel psf = pec::PsfModel::gaas_250nm();
  geometry::Layout field;
  for (int j = -2; j <= 2; ++j)
    for (int i = -2; i <= 2; ++i)
      field.polygons.push_back({"snowflake", geometry::snowflake_polygon(245, 87, 20, {i * 600.0, j * 600.0})});
  pec::DoseMap grid(512, 512, 10.0, -2560.0, -2560.0);
  pec::rasterize_into(field, grid);
  const pec::DoseMap target = pec::exposure_target(grid);
  for (auto _ : state) benchmark::DoNotOptimize(pec::correct_dose(target, psf));
}
BENCHMARK(BM_CorrectDose)->Unit(benchmark::kMillisecond);

static void BM_VertebraeLayout(benchmark::State& state) {
  const auto p = geometry::ResonatorParams::fabrication();
  for (auto _ : state) benchmark::DoNotOptimize(geometry::vertebrae_layout(p));
}
BENCHMARK(BM_VertebraeLayout)->Unit(benchmark::kMicrosecond);

static void BM_AnalyzeScan(benchmark::State& state) {
  spectra::SimConfig c;
  c.noise_rel = 0.4;
  c.noise_floor_rel = 0.3;
  const spectra::SpectrumTrace t = spectra::simulate_scan(c, 7);
  const spectra::CalibrationTone tone{constants::two_pi * c.tone_freq_hz, c.tone_depth};
  for (auto _ : state) benchmark::DoNotOptimize(spectra::analyze_scan(t, tone));
}
BENCHMARK(BM_AnalyzeScan)->Unit(benchmark::kMillisecond);

static void BM_RunLock(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(locksim::run_lock({}, {}, 1.0, 1));
}
BENCHMARK(BM_RunLock)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
