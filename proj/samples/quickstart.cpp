// Runs the test once on simulated data where the conditional law of Y
// shifts (model A alternative) and once where only X shifts (null).

#include <cstdio>

#include "cshift/cshift.hpp"

int main() {
    using namespace cshift;
    for (const auto hypothesis : {Hypothesis::Null, Hypothesis::Alt}) {
        const ModelSpec spec = ModelSpec::make(Model::A, hypothesis, 7);
        const GeneratedData data = generate(spec, 2000, 1000, 7);

        TestConfig config;
        config.m = 10;
        config.seed = 11;
        const ConformalRun run = run_test(data.train, data.test, config);
        std::printf("%-5s K=%zu  T=%+.3f  p=%.4f  %s\n", to_string(hypothesis), run.k, run.t_statistic, run.p_value,
                    run.reject ? "reject" : "keep");
    }
}
