#pragma once

#include "json.hpp"
#include <string>
#include <vector>

#include "tcf/common.hpp"

namespace tcf {

struct BenchEntry {
    std::string variant;  // temporal | spatio-temporal | spatial
    int L = 0;
    double seconds = 0.0;           // median forward time
    size_t working_set_bytes = 0;   // analytic score+output footprint
};

struct BenchReport {
    int C = 0;
    int R = 0;
    int repetitions = 0;
    std::vector<BenchEntry> entries;

    double seconds_for(const std::string& variant, int L) const;
    nlohmann::json to_json() const;
    std::string table() const;
};

// Single-head d=1 reference kernels used only for complexity timing; they
// share the production softmax. The returned matrix is the attention itself
// (tokens x tokens) so tests can check row-stochasticity.
Mat temporal_attention_stub(int L, uint64_t seed);
Mat spatio_temporal_attention_stub(int L, int C, uint64_t seed);

// Times one forward application of each attention flavor per L in the sweep.
// The spatial variant is one application of the production module (C queries
// against R*C keys), which does not depend on L.
BenchReport bench_attention(int C, int R, std::vector<int> L_sweep, int repetitions,
                            uint64_t seed = 7);

}  // namespace tcf
