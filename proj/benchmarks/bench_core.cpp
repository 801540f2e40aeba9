#include <benchmark/benchmark.h>

#include <random>

#include "finsler/dynamics.hpp"
#include "finsler/jets.hpp"
#include "finsler/spaces.hpp"

using namespace finsler;

namespace {

struct Fixture {
  FinslerSpace space;
  Vec x, y;
  Fixture(const char* name) : space(make_catalog_space(name)) {
    std::mt19937_64 rng(7);
    space.sample_admissible(rng, x, y);
  }
};

void BM_JetSpray(benchmark::State& state) {
  Fixture f("randers3_axis");
  for (auto _ : state) benchmark::DoNotOptimize(jet_evaluate(f.space, f.x, f.y, 1, 2));
}
BENCHMARK(BM_JetSpray);

void BM_JetFull3(benchmark::State& state) {
  Fixture f("randers3_axis");
  for (auto _ : state) benchmark::DoNotOptimize(jet_evaluate(f.space, f.x, f.y, 2, 4));
}
BENCHMARK(BM_JetFull3);

void BM_JetFull4(benchmark::State& state) {
  Fixture f("randers4_curved");
  for (auto _ : state) benchmark::DoNotOptimize(jet_evaluate(f.space, f.x, f.y, 2, 4));
}
BENCHMARK(BM_JetFull4);

void BM_FrameCurvature3(benchmark::State& state) {
  Fixture f("randers3_axis");
  for (auto _ : state) benchmark::DoNotOptimize(frame_at(f.space, f.x, f.y, kFrameAll));
}
BENCHMARK(BM_FrameCurvature3);

void BM_FrameCurvature4(benchmark::State& state) {
  Fixture f("randers4_curved");
  for (auto _ : state) benchmark::DoNotOptimize(frame_at(f.space, f.x, f.y, kFrameAll));
}
BENCHMARK(BM_FrameCurvature4);

void BM_GeodesicRhs(benchmark::State& state) {
  Fixture f("randers4_curved");
  for (auto _ : state) benchmark::DoNotOptimize(geodesic_rhs(f.space, f.x, f.y));
}
BENCHMARK(BM_GeodesicRhs);

void BM_SpinopticsClosure(benchmark::State& state) {
  FinslerSpace s = make_catalog_space("randers3_axis");
  WorldlineState st = init_spinoptics3(s, Vec{1.2, 0.0, -0.3}, Vec{0.1, 1.0, 0.2}, 1.0);
  for (auto _ : state) {
    GeometryFrame fr = frame_at(s, st.X, st.y, kFrameAll);
    benchmark::DoNotOptimize(close_spinoptics3(fr, st, 1.0, 2e-3));
  }
}
BENCHMARK(BM_SpinopticsClosure);

void BM_MassiveClosure(benchmark::State& state) {
  FinslerSpace s = make_catalog_space("randers4_curved");
  WorldlineState st = init_massive4(s, Vec{0.0, 12.0, 0.0, 0.0}, Vec{1.0, 0.0, 0.2887, 0.0}, 1.0,
                                    0.05, 1, Vec{0.0, 0.0, 1.0});
  for (auto _ : state) {
    GeometryFrame fr = frame_at(s, st.X, st.y, kFrameAll);
    benchmark::DoNotOptimize(close_massive4(fr, st, 1.0, 0.05));
  }
}
BENCHMARK(BM_MassiveClosure);

void BM_MasslessObserverClosure(benchmark::State& state) {
  FinslerSpace s = make_catalog_space("quartic4_curved");
  ObserverField obs;
  obs.eval = [](const Vec&, Vec& t, Mat& dt) {
    t = Vec(4);
    dt = Mat(4);
    t[0] = 1.0;
  };
  WorldlineState st = init_massless4(s, Vec{0.0, 0.0, 10.0, 0.0}, Vec{0.3, -0.05, 0.0}, 1e-3, 1, obs);
  for (auto _ : state) {
    GeometryFrame fr = frame_at(s, st.X, st.y, kFrameAll & ~kFrameNorm);
    benchmark::DoNotOptimize(close_massless4_observer(fr, st, obs, 1e-3));
  }
}
BENCHMARK(BM_MasslessObserverClosure);

void BM_JetCheckFull(benchmark::State& state) {
  Fixture f("randers3_axis");
  for (auto _ : state) benchmark::DoNotOptimize(jet_check(f.space, f.x, f.y, 1));
}
BENCHMARK(BM_JetCheckFull);

}  // namespace

BENCHMARK_MAIN();
