// Serial reference kernels against their OpenMP counterparts.

#include "fisens/experiments.hpp"
#include "fisens/random.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace fisens;

namespace {

const ImageShape kShape{28, 28, 1};

const ClassifierModel& model() {
    static const ClassifierModel m = [] {
        const std::size_t widths[] = {784, 128, 64, 10};
        return ClassifierModel::initialized(widths, Activation::Sigmoid, 1);
    }();
    return m;
}

LabeledDataset images(std::size_t n) {
    Rng rng(2);
    LabeledDataset d;
    d.shape = kShape;
    for (std::size_t i = 0; i < n; ++i) {
        Vector v(784);
        for (Eigen::Index j = 0; j < 784; ++j) v(j) = rng.uniform();
        d.images.push_back(std::move(v));
        d.labels.push_back(static_cast<int>(i % 10));
        d.ids.push_back(i);
    }
    return d;
}

void BM_ScoreDatasetSerial(benchmark::State& state) {
    const LabeledDataset d = images(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            reference::score_dataset(model(), d, InputTarget{}, ObjectiveKind::TrueLabel, {true, true, false}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreDatasetParallel(benchmark::State& state) {
    const LabeledDataset d = images(static_cast<std::size_t>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            score_dataset(model(), d, InputTarget{}, ObjectiveKind::TrueLabel, {true, true, false}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LayerScanSerial(benchmark::State& state) {
    const LabeledDataset d = images(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(reference::layer_scan(model(), d, ObjectiveKind::TrueLabel));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LayerScanParallel(benchmark::State& state) {
    const LabeledDataset d = images(static_cast<std::size_t>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(layer_scan(model(), d, ObjectiveKind::TrueLabel));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

const std::size_t kScales[] = {1, 3, 5, 7};

void BM_PixelMapSerial(benchmark::State& state) {
    const Vector img = images(1).images[0];
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            reference::pixel_fi_map(model(), img, kShape, CrossEntropyPred{}, kScales, ChannelMode::PerChannel));
    }
}

void BM_PixelMapParallel(benchmark::State& state) {
    const Vector img = images(1).images[0];
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            pixel_fi_map(model(), img, kShape, CrossEntropyPred{}, kScales, ChannelMode::PerChannel));
    }
}

}  // namespace

BENCHMARK(BM_ScoreDatasetSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreDatasetParallel)->Args({256, 1})->Args({256, 2})->Args({256, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LayerScanSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LayerScanParallel)->Args({64, 1})->Args({64, 2})->Args({64, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PixelMapSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PixelMapParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
