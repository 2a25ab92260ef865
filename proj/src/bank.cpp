#include "tcf/bank.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "binio.hpp"

namespace tcf {

namespace {

struct NonzeroMean {
    double sum = 0.0;
    size_t n = 0;

    void add(double v) {
        if (v != 0.0) {
            sum += v;
            ++n;
        }
    }
    bool ok() const { return n > 0; }
    double mean() const { return sum / n; }
};

}  // namespace

SeriesFrame impute_zeros(const SeriesFrame& train, const PeriodConfig& cfg, int block_len,
                         ImputeStats* stats) {
    train.validate();
    cfg.validate();
    if (block_len < 1) throw ValidationError("block_len must be >= 1");
    const size_t T = train.rows(), C = train.cols();
    const int P = cfg.period();

    ImputeStats local;
    ImputeStats& st = stats ? *stats : local;

    std::vector<uint32_t> slot_by_row(T);
    for (size_t t = 0; t < T; ++t) slot_by_row[t] = slot_of(train.timestamps[t], cfg);

    // Nonzero means at three scopes: per (slot, sensor), per sensor, global.
    std::vector<NonzeroMean> slot_mean(static_cast<size_t>(P) * C);
    std::vector<NonzeroMean> sensor_mean(C);
    NonzeroMean global;
    for (size_t t = 0; t < T; ++t) {
        for (size_t c = 0; c < C; ++c) {
            const double v = train.at(t, c);
            slot_mean[size_t(slot_by_row[t]) * C + c].add(v);
            sensor_mean[c].add(v);
            global.add(v);
        }
    }
    if (!global.ok()) throw ValidationError("frame is entirely zero, nothing to impute from");

    auto slot_or_wider = [&](uint32_t slot, size_t c) {
        const auto& sm = slot_mean[size_t(slot) * C + c];
        if (sm.ok()) return sm.mean();
        ++st.slot_fallbacks;
        return sensor_mean[c].ok() ? sensor_mean[c].mean() : global.mean();
    };

    SeriesFrame out = train;
    for (size_t t = 0; t < T; ++t) {
        bool any_nonzero = false;
        for (size_t c = 0; c < C && !any_nonzero; ++c) any_nonzero = train.at(t, c) != 0.0f;

        if (!any_nonzero) {
            ++st.zero_rows;
            for (size_t c = 0; c < C; ++c) {
                out.values[t * C + c] = static_cast<float>(slot_or_wider(slot_by_row[t], c));
            }
            continue;
        }
        for (size_t c = 0; c < C; ++c) {
            if (train.at(t, c) != 0.0f) continue;
            ++st.isolated_zeros;
            const size_t b0 = t / block_len * block_len;
            const size_t b1 = std::min(b0 + block_len, T);
            NonzeroMean block;
            for (size_t u = b0; u < b1; ++u) block.add(train.at(u, c));
            double v;
            if (block.ok()) {
                v = block.mean();
            } else {
                ++st.block_fallbacks;
                v = slot_or_wider(slot_by_row[t], c);
            }
            out.values[t * C + c] = static_cast<float>(v);
        }
    }
    return out;
}

size_t PeriodicDataBank::total_records() const {
    size_t n = 0;
    for (const auto& s : slots) n += s.size();
    return n;
}

void PeriodicDataBank::validate() const {
    cfg.validate();
    if (slots.size() != static_cast<size_t>(cfg.period())) {
        throw ValidationError("slot count does not match period");
    }
    for (size_t p = 0; p < slots.size(); ++p) {
        const auto& s = slots[p];
        if (s.speeds.size() != s.size() * C) throw ValidationError("slot payload shape broken");
        for (size_t i = 0; i < s.size(); ++i) {
            if (slot_of(s.timestamps[i], cfg) != p) {
                throw ValidationError("record stored under wrong slot");
            }
            if (i > 0 && s.timestamps[i] <= s.timestamps[i - 1]) {
                throw ValidationError("slot records not time-ordered");
            }
        }
        for (float v : s.speeds) {
            if (!(v > 0.0f)) throw ValidationError("bank holds a non-positive speed");
        }
    }
}

PeriodicDataBank build_bank(const SeriesFrame& imputed_train, const PeriodConfig& cfg,
                            std::string built_from) {
    imputed_train.validate();
    cfg.validate();
    for (float v : imputed_train.values) {
        if (v == 0.0f) throw ValidationError("bank input must be imputed (zeros found)");
    }
    PeriodicDataBank bank;
    bank.cfg = cfg;
    bank.C = static_cast<uint32_t>(imputed_train.cols());
    bank.built_from = std::move(built_from);
    bank.slots.resize(cfg.period());
    const size_t C = imputed_train.cols();
    for (size_t t = 0; t < imputed_train.rows(); ++t) {
        auto& slot = bank.slots[slot_of(imputed_train.timestamps[t], cfg)];
        slot.timestamps.push_back(imputed_train.timestamps[t]);
        slot.speeds.insert(slot.speeds.end(), imputed_train.values.begin() + t * C,
                           imputed_train.values.begin() + (t + 1) * C);
    }
    return bank;
}

BankSample sample_keys(const PeriodicDataBank& bank, const InputWindow& window, int R,
                       uint64_t rng_seed) {
    if (R < 1) throw ValidationError("R must be >= 1");
    if (bank.C != static_cast<uint32_t>(window.C)) {
        throw ValidationError("bank and window disagree on sensor count");
    }
    if (bank.total_records() == 0) throw ValidationError("bank is empty");
    const int P = bank.cfg.period();
    const int L = window.L, C = window.C;

    BankSample out;
    out.L = L;
    out.C = C;
    out.R = R;
    out.data.resize(static_cast<size_t>(L) * R * C);
    out.key_slots.resize(L);
    out.source_records.reserve(static_cast<size_t>(L) * R);
    out.source_timestamps.reserve(static_cast<size_t>(L) * R);

    std::mt19937_64 rng(mix_seed(rng_seed));
    std::vector<uint32_t> idx;
    for (int l = 0; l < L; ++l) {
        uint32_t p = (window.slots[l] + 1) % P;
        while (bank.slots[p].size() == 0) {
            p = (p + 1) % P;
            ++out.forward_hops;
        }
        out.key_slots[l] = p;
        const auto& slot = bank.slots[p];
        const uint32_t Q = static_cast<uint32_t>(slot.size());

        idx.resize(R);
        if (Q >= static_cast<uint32_t>(R)) {
            std::vector<uint32_t> pool(Q);
            std::iota(pool.begin(), pool.end(), 0u);
            for (int r = 0; r < R; ++r) {
                const uint32_t j =
                    r + std::uniform_int_distribution<uint32_t>(0, Q - 1 - r)(rng);
                std::swap(pool[r], pool[j]);
                idx[r] = pool[r];
            }
        } else {
            std::uniform_int_distribution<uint32_t> d(0, Q - 1);
            for (int r = 0; r < R; ++r) idx[r] = d(rng);
        }
        for (int r = 0; r < R; ++r) {
            const uint32_t rec = idx[r];
            std::copy_n(slot.speeds.begin() + size_t(rec) * C, C,
                        out.data.begin() + (size_t(l) * R + r) * C);
            out.source_records.push_back(rec);
            out.source_timestamps.push_back(slot.timestamps[rec]);
        }
    }
    return out;
}

namespace {

const char kBankMagic[4] = {'C', 'P', 'B', 'K'};
constexpr uint16_t kBankVersion = 1;

}  // namespace

void save_bank(const PeriodicDataBank& bank, const std::string& path) {
    bank.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write(kBankMagic, 4);
    binio::put<uint16_t>(os, kBankVersion);
    binio::put<uint16_t>(os, static_cast<uint16_t>(bank.cfg.steps_per_hour));
    binio::put<uint16_t>(os, static_cast<uint16_t>(bank.cfg.hours_per_day));
    binio::put<uint16_t>(os, static_cast<uint16_t>(bank.cfg.days_per_week));
    binio::put<uint32_t>(os, static_cast<uint32_t>(bank.slots.size()));
    binio::put<uint32_t>(os, bank.C);
    binio::put<uint16_t>(os, static_cast<uint16_t>(bank.built_from.size()));
    os.write(bank.built_from.data(), bank.built_from.size());
    for (const auto& slot : bank.slots) {
        binio::put<uint32_t>(os, static_cast<uint32_t>(slot.size()));
        os.write(reinterpret_cast<const char*>(slot.timestamps.data()),
                 slot.timestamps.size() * sizeof(int64_t));
        os.write(reinterpret_cast<const char*>(slot.speeds.data()),
                 slot.speeds.size() * sizeof(float));
    }
    if (!os) throw IoError("short write to " + path);
}

PeriodicDataBank load_bank(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    binio::expect_magic(is, kBankMagic, "bank");
    const uint16_t version = binio::get<uint16_t>(is, "bank");
    if (version != kBankVersion) {
        throw IoError("unsupported bank version " + std::to_string(version));
    }
    PeriodicDataBank bank;
    bank.cfg.steps_per_hour = binio::get<uint16_t>(is, "bank");
    bank.cfg.hours_per_day = binio::get<uint16_t>(is, "bank");
    bank.cfg.days_per_week = binio::get<uint16_t>(is, "bank");
    const uint32_t P = binio::get<uint32_t>(is, "bank");
    bank.C = binio::get<uint32_t>(is, "bank");
    if (P != static_cast<uint32_t>(bank.cfg.period())) throw IoError("slot count mismatch");
    const uint16_t tag_len = binio::get<uint16_t>(is, "bank");
    bank.built_from.resize(tag_len);
    binio::read_raw(is, bank.built_from.data(), tag_len, "bank");
    bank.slots.resize(P);
    for (auto& slot : bank.slots) {
        const uint32_t Q = binio::get<uint32_t>(is, "bank");
        slot.timestamps.resize(Q);
        slot.speeds.resize(size_t(Q) * bank.C);
        binio::read_raw(is, slot.timestamps.data(), size_t(Q) * sizeof(int64_t), "bank");
        binio::read_raw(is, slot.speeds.data(), slot.speeds.size() * sizeof(float), "bank");
    }
    bank.validate();
    return bank;
}

}  // namespace tcf
