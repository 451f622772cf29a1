#include <benchmark/benchmark.h>

#include "flowatlas/catalog.hpp"
#include "flowatlas/integrate.hpp"
#include "flowatlas/reconstruct.hpp"
#include "flowatlas/verify.hpp"

using namespace flowatlas;

namespace {

const FlowFamily& numeric_riccati()
{
    static const FlowFamily fam = numeric_family(catalog_field(*find_catalog("riccati")));
    return fam;
}

void BM_Cocycle(benchmark::State& state)
{
    const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
    auto plan = SamplePlan::default_for(1);
    plan.random_count = 100;
    for (auto _ : state)
        benchmark::DoNotOptimize(check_cocycle(numeric_riccati(), plan, 1e-7, exec));
}

void BM_Tabulate(benchmark::State& state)
{
    const auto fam = catalog_family(*find_catalog("rotation"));
    ReconstructionConfig cfg;
    cfg.grid = TabulationGrid::uniform(-1.0, 1.0, 21, {{-2.0, 2.0}, {-2.0, 2.0}}, 41);
    cfg.exec = state.range(0) ? Execution::parallel : Execution::serial;
    for (auto _ : state)
        benchmark::DoNotOptimize(tabulate_field(fam, cfg));
}

} // namespace

BENCHMARK(BM_Cocycle)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tabulate)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
