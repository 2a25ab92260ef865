#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcf/series.hpp"

namespace tcf {

struct ImputeStats {
    size_t zero_rows = 0;        // rows where every sensor read zero
    size_t isolated_zeros = 0;   // zero cells inside otherwise live rows
    size_t slot_fallbacks = 0;   // same-slot mean unavailable, wider mean used
    size_t block_fallbacks = 0;  // in-block mean unavailable, wider mean used
};

// Replaces zeros in a training frame. All-zero rows take the mean of the
// other records in the same period slot; isolated zeros take the mean of the
// sensor's nonzero values inside the enclosing block_len-step block. Both
// fall back to sensor-wide then frame-wide nonzero means when starved.
SeriesFrame impute_zeros(const SeriesFrame& train, const PeriodConfig& cfg = {},
                         int block_len = 12, ImputeStats* stats = nullptr);

struct BankSlot {
    std::vector<int64_t> timestamps;  // ascending
    std::vector<float> speeds;        // Q_p x C, row-major

    size_t size() const { return timestamps.size(); }
};

struct PeriodicDataBank {
    PeriodConfig cfg;
    uint32_t C = 0;
    std::string built_from = "train";
    std::vector<BankSlot> slots;  // length cfg.period()

    size_t total_records() const;
    void validate() const;
};

PeriodicDataBank build_bank(const SeriesFrame& imputed_train, const PeriodConfig& cfg = {},
                            std::string built_from = "train");

// R historical records per window step, drawn from the one-step-ahead slot
// and concatenated along the sensor axis.
struct BankSample {
    int L = 0;
    int C = 0;
    int R = 0;
    std::vector<float> data;                  // L x (R*C)
    std::vector<uint32_t> key_slots;          // per step: slot sampled from
    std::vector<uint32_t> source_records;     // L*R record indices
    std::vector<int64_t> source_timestamps;   // L*R
    int forward_hops = 0;                     // empty-slot skips taken

    float at(int l, int j) const { return data[size_t(l) * R * C + j]; }
};

// Without replacement when the slot holds at least R records, with
// replacement otherwise. Deterministic per seed.
BankSample sample_keys(const PeriodicDataBank& bank, const InputWindow& window, int R,
                       uint64_t rng_seed);

void save_bank(const PeriodicDataBank& bank, const std::string& path);
PeriodicDataBank load_bank(const std::string& path);

}  // namespace tcf
