// Command-line front end: synthetic data, bank building, training,
// stratified evaluation, extremeness scoring and the attention benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcf/bank.hpp"
#include "tcf/bench.hpp"
#include "tcf/extremeness.hpp"
#include "tcf/forecaster.hpp"
#include "tcf/ingest.hpp"
#include "tcf/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<uint64_t> seed;
    json config = json::object();

    void load() {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw tcf::IoError("cannot open config " + config_path);
            config = json::parse(in);
        }
        fs::create_directories(out_dir);
    }
    std::string path(const std::string& name) const {
        return (fs::path(out_dir) / name).string();
    }
    json section(const std::string& key) const {
        return config.contains(key) ? config.at(key) : json::object();
    }
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

tcf::SeriesFrame load_input(const std::string& path) {
    tcf::SeriesFrame f = tcf::load_csv(path);
    std::printf("loaded %s: %zu steps x %zu sensors\n", path.c_str(), f.rows(), f.cols());
    return f;
}

tcf::ModelConfig model_config(const GlobalOpts& g) {
    tcf::ModelConfig m;
    const json j = g.section("model");
    maybe(j, "L", m.L);
    maybe(j, "tau", m.tau);
    maybe(j, "R", m.R);
    maybe(j, "hidden", m.hidden);
    maybe(j, "d_model", m.attention.d_model);
    maybe(j, "n_heads", m.attention.n_heads);
    if (j.contains("mode")) m.mode = tcf::parse_mode(j.at("mode"));
    maybe(j, "use_compensation", m.use_compensation);
    return m;
}

tcf::TrainConfig train_config(const GlobalOpts& g) {
    tcf::TrainConfig t;
    const json j = g.section("train");
    maybe(j, "lr", t.lr);
    maybe(j, "batch_size", t.batch_size);
    maybe(j, "max_epochs", t.max_epochs);
    maybe(j, "patience", t.patience);
    maybe(j, "grad_clip", t.grad_clip);
    if (g.seed) t.seed = *g.seed;
    return t;
}

// bank from the training slice, imputing first
tcf::PeriodicDataBank bank_from_train(const tcf::SeriesFrame& train) {
    tcf::ImputeStats st;
    tcf::SeriesFrame imputed = tcf::impute_zeros(train, {}, 12, &st);
    std::printf("imputed: %zu all-zero rows, %zu isolated zeros (%zu slot / %zu block fallbacks)\n",
                st.zero_rows, st.isolated_zeros, st.slot_fallbacks, st.block_fallbacks);
    return tcf::build_bank(imputed);
}

tcf::PeriodicDataBank obtain_bank(const std::string& bank_path,
                                  const tcf::SeriesFrame& train) {
    if (!bank_path.empty()) return tcf::load_bank(bank_path);
    return bank_from_train(train);
}

int cmd_generate(const GlobalOpts& g, std::string out, int sensors, int weeks) {
    tcf::SyntheticSpec spec = tcf::SyntheticSpec::from_json(g.section("synthetic"));
    if (sensors > 0) spec.sensors = sensors;
    if (weeks > 0) spec.weeks = weeks;
    if (g.seed) spec.seed = *g.seed;
    tcf::SeriesFrame frame = tcf::generate_synthetic(spec);
    if (out.empty()) out = g.path("synthetic.csv");
    tcf::write_csv(frame, out);

    const size_t T = frame.rows(), C = frame.cols();
    size_t zero_rows = 0, zero_cells = 0;
    std::vector<uint8_t> row_zero(T);
    for (size_t t = 0; t < T; ++t) {
        size_t z = 0;
        for (size_t c = 0; c < C; ++c) z += frame.at(t, c) == 0.0f;
        zero_cells += z;
        row_zero[t] = z == C;
        zero_rows += row_zero[t];
    }
    const int L = 12;
    size_t zero_windows = 0, windows = T >= size_t(L) ? T - L + 1 : 0;
    size_t run = 0;
    for (size_t t = 0; t < T; ++t) {
        run = row_zero[t] ? run + 1 : 0;
        if (run >= size_t(L)) ++zero_windows;
    }
    std::printf("wrote %s: %zu x %zu\n", out.c_str(), T, C);
    std::printf("all-zero rows: %zu (%.3f%%), all-zero cells: %.3f%%\n", zero_rows,
                100.0 * zero_rows / T, 100.0 * zero_cells / (T * C));
    std::printf("all-zero %d-step windows: %zu of %zu (%.3f%%)\n", L, zero_windows,
                windows, windows ? 100.0 * zero_windows / windows : 0.0);
    return 0;
}

int cmd_build_bank(const GlobalOpts& g, const std::string& input, std::string out,
                   double train_frac) {
    tcf::SeriesFrame frame = load_input(input);
    if (train_frac < 1.0) {
        frame = frame.slice_rows(0, static_cast<size_t>(train_frac * frame.rows()));
        std::printf("using leading %.0f%% as training data: %zu steps\n",
                    100.0 * train_frac, frame.rows());
    }
    tcf::PeriodicDataBank bank = bank_from_train(frame);
    if (out.empty()) out = g.path("bank.cpbk");
    tcf::save_bank(bank, out);
    size_t qmin = SIZE_MAX, qmax = 0;
    for (const auto& s : bank.slots) {
        qmin = std::min(qmin, s.size());
        qmax = std::max(qmax, s.size());
    }
    std::printf("wrote %s: %zu records over %zu slots (Q %zu..%zu)\n", out.c_str(),
                bank.total_records(), bank.slots.size(), qmin, qmax);
    return 0;
}

int cmd_inspect_bank(const std::string& bank_path, int slot) {
    tcf::PeriodicDataBank bank = tcf::load_bank(bank_path);
    if (slot < 0 || slot >= static_cast<int>(bank.slots.size())) {
        throw tcf::ValidationError("slot out of range 0.." +
                                   std::to_string(bank.slots.size() - 1));
    }
    const tcf::BankSlot& s = bank.slots[slot];
    std::printf("slot %d: Q=%zu records, C=%u sensors\n", slot, s.size(), bank.C);
    if (s.size() == 0) return 0;
    std::printf("%8s %12s %12s\n", "sensor", "mean", "std");
    for (uint32_t c = 0; c < bank.C; ++c) {
        double sum = 0.0;
        for (size_t i = 0; i < s.size(); ++i) sum += s.speeds[i * bank.C + c];
        const double mean = sum / s.size();
        double ss = 0.0;
        for (size_t i = 0; i < s.size(); ++i) {
            const double d = s.speeds[i * bank.C + c] - mean;
            ss += d * d;
        }
        std::printf("%8u %12.4f %12.4f\n", c, mean, std::sqrt(ss / s.size()));
    }
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& input, const std::string& bank_path,
              std::string model_out, std::string trace_out, const std::string& mode,
              bool no_comp, int epochs, int R) {
    tcf::SeriesFrame frame = load_input(input);
    tcf::Splits splits = tcf::split(frame);

    tcf::ModelConfig mcfg = model_config(g);
    if (!mode.empty()) mcfg.mode = tcf::parse_mode(mode);
    if (no_comp) mcfg.use_compensation = false;
    if (R > 0) mcfg.R = R;
    tcf::TrainConfig tcfg = train_config(g);
    if (epochs > 0) tcfg.max_epochs = epochs;

    tcf::PeriodicDataBank bank;
    const tcf::PeriodicDataBank* bank_ptr = nullptr;
    if (mcfg.use_compensation) {
        bank = obtain_bank(bank_path, splits.train);
        bank_ptr = &bank;
    }
    tcf::TrainResult result = tcf::train(splits.train, splits.val, bank_ptr, mcfg, tcfg);
    for (const auto& e : result.trace) {
        std::printf("epoch %3d  train %.4f  val %.4f\n", e.epoch, e.train_mae, e.val_mae);
    }
    std::printf("best epoch %d, val MAE %.4f\n", result.best_epoch, result.best_val_mae);

    if (model_out.empty()) model_out = g.path("model.cpfm");
    if (trace_out.empty()) trace_out = g.path("trace.csv");
    tcf::save_checkpoint(result.model, model_out);
    tcf::write_loss_trace(result.trace, trace_out);
    std::printf("wrote %s and %s\n", model_out.c_str(), trace_out.c_str());
    return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& input,
                 const std::string& checkpoint, const std::string& control_checkpoint,
                 const std::string& bank_path, int buckets) {
    tcf::SeriesFrame frame = load_input(input);
    tcf::Splits splits = tcf::split(frame);
    tcf::Model model = tcf::load_checkpoint(checkpoint);

    tcf::PeriodicDataBank bank;
    const tcf::PeriodicDataBank* bank_ptr = nullptr;
    if (model.cfg.use_compensation) {
        bank = obtain_bank(bank_path, splits.train);
        bank_ptr = &bank;
    }
    const uint64_t seed = g.seed.value_or(17);
    tcf::Prediction pred = tcf::predict(splits.test, bank_ptr, model, seed);

    std::vector<tcf::Mat> control_preds;
    const std::vector<tcf::Mat>* control_ptr = nullptr;
    if (!control_checkpoint.empty()) {
        tcf::Model control = tcf::load_checkpoint(control_checkpoint);
        tcf::PeriodicDataBank cbank;
        const tcf::PeriodicDataBank* cb = nullptr;
        if (control.cfg.use_compensation) {
            cbank = obtain_bank(bank_path, splits.train);
            cb = &cbank;
        }
        control_preds = tcf::predict(splits.test, cb, control, seed).preds;
        control_ptr = &control_preds;
    }

    tcf::MetricsReport report = tcf::stratified_report(pred.preds, pred.ws.targets,
                                                       pred.scores, buckets, control_ptr);
    std::fputs(report.table().c_str(), stdout);

    const std::string json_path = g.path("metrics.json");
    std::ofstream js(json_path);
    js << report.to_json().dump(2) << "\n";

    const std::string gap_path = g.path("loss_gap.csv");
    std::ofstream gp(gap_path);
    gp << "kind,bucket,count,mae,loss_gap\n";
    auto rows = [&](const std::vector<tcf::BucketMetrics>& bs, const char* kind) {
        for (const auto& b : bs) {
            gp << kind << ',' << b.bucket << ',' << b.count << ',' << b.metrics.mae << ','
               << (b.has_gap ? b.loss_gap : 0.0) << "\n";
        }
    };
    rows(report.by_zero_bucket, "zeros");
    rows(report.by_entropy_bucket, "entropy");
    std::printf("wrote %s and %s\n", json_path.c_str(), gap_path.c_str());
    return 0;
}

int cmd_extremeness(const GlobalOpts& g, const std::string& input, std::string out, int L,
                    int tau, int buckets) {
    tcf::SeriesFrame frame = load_input(input);
    tcf::WindowSet ws = tcf::make_windows(frame, L, tau);
    std::vector<tcf::ExtremenessScore> scores = tcf::score_windows(ws);
    tcf::Stratification strat = tcf::stratify(scores, buckets);

    if (out.empty()) out = g.path("extremeness.csv");
    std::ofstream os(out);
    if (!os) throw tcf::IoError("cannot write " + out);
    os << "origin_t,zero_count,entropy,bucket_zero,bucket_entropy\n";
    for (size_t i = 0; i < scores.size(); ++i) {
        os << scores[i].origin_t << ',' << scores[i].zero_count << ',' << scores[i].entropy
           << ',' << strat.bucket_zero[i] << ',' << strat.bucket_entropy[i] << "\n";
    }
    std::printf("wrote %s: %zu windows\n", out.c_str(), scores.size());
    return 0;
}

int cmd_bench(const GlobalOpts& g, int C, int R, std::vector<int> sweep, int reps) {
    tcf::BenchReport report =
        tcf::bench_attention(C, R, std::move(sweep), reps, g.seed.value_or(7));
    std::fputs(report.table().c_str(), stdout);
    const std::string out = g.path("bench.json");
    std::ofstream os(out);
    os << report.to_json().dump(2) << "\n";
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"traffic forecasting with periodic-bank compensation"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "base RNG seed");
    app.add_option("--out-dir", g.out_dir, "directory for outputs");

    auto* generate = app.add_subcommand("generate", "write a synthetic speed CSV");
    std::string gen_out;
    int gen_sensors = 0, gen_weeks = 0;
    generate->add_option("--out", gen_out, "output CSV path");
    generate->add_option("--sensors", gen_sensors, "sensor count");
    generate->add_option("--weeks", gen_weeks, "number of weeks");

    auto* build = app.add_subcommand("build-bank", "impute a training CSV and store it by period slot");
    std::string bb_input, bb_out;
    double bb_frac = 1.0;
    build->add_option("--input", bb_input, "training CSV")->required();
    build->add_option("--out", bb_out, "bank output path");
    build->add_option("--train-frac", bb_frac, "use only the leading fraction of rows");

    auto* inspect = app.add_subcommand("inspect-bank", "print one slot's records summary");
    std::string ib_bank;
    int ib_slot = 0;
    inspect->add_option("--bank", ib_bank, "bank file")->required();
    inspect->add_option("--slot", ib_slot, "slot index")->required();

    auto* train = app.add_subcommand("train", "train the forecaster on a CSV (70/10/20 split)");
    std::string tr_input, tr_bank, tr_model, tr_trace, tr_mode;
    bool tr_nocomp = false;
    int tr_epochs = 0, tr_R = 0;
    train->add_option("--input", tr_input, "full CSV")->required();
    train->add_option("--bank", tr_bank, "bank file (built from the train split when omitted)");
    train->add_option("--out", tr_model, "checkpoint output path");
    train->add_option("--trace", tr_trace, "loss trace CSV path");
    train->add_option("--mode", tr_mode, "concat or add");
    train->add_flag("--no-compensation", tr_nocomp, "train the plain control head");
    train->add_option("--epochs", tr_epochs, "max epochs");
    train->add_option("--R", tr_R, "bank samples per step");

    auto* evaluate = app.add_subcommand("evaluate", "stratified metrics on the test split");
    std::string ev_input, ev_ckpt, ev_ctrl, ev_bank;
    int ev_buckets = 4;
    evaluate->add_option("--input", ev_input, "full CSV")->required();
    evaluate->add_option("--checkpoint", ev_ckpt, "trained model")->required();
    evaluate->add_option("--control-checkpoint", ev_ctrl, "control model for the loss gap");
    evaluate->add_option("--bank", ev_bank, "bank file (rebuilt from train split when omitted)");
    evaluate->add_option("--buckets", ev_buckets, "extremeness quantile buckets");

    auto* extremeness = app.add_subcommand("extremeness", "per-window zero counts and entropy");
    std::string ex_input, ex_out;
    int ex_L = 12, ex_tau = 12, ex_buckets = 4;
    extremeness->add_option("--input", ex_input, "CSV input")->required();
    extremeness->add_option("--out", ex_out, "output CSV path");
    extremeness->add_option("--L", ex_L, "window length");
    extremeness->add_option("--tau", ex_tau, "forecast horizon");
    extremeness->add_option("--buckets", ex_buckets, "quantile buckets");

    auto* bench = app.add_subcommand("bench", "attention complexity timings");
    int bn_C = 64, bn_R = 5, bn_reps = 5;
    std::vector<int> bn_sweep{12, 24, 48};
    bench->add_option("--C", bn_C, "sensor count");
    bench->add_option("--R", bn_R, "bank samples");
    bench->add_option("--L-sweep", bn_sweep, "window lengths to sweep")->delimiter(',');
    bench->add_option("--reps", bn_reps, "timing repetitions");

    for (CLI::App* sc : app.get_subcommands([](const CLI::App*) { return true; })) {
        sc->fallthrough();  // let --seed/--out-dir/--config follow the subcommand
    }

    try {
        app.parse(argc, argv);
        if (*seed_opt) g.seed = seed_val;
        g.load();
        if (*generate) return cmd_generate(g, gen_out, gen_sensors, gen_weeks);
        if (*build) return cmd_build_bank(g, bb_input, bb_out, bb_frac);
        if (*inspect) return cmd_inspect_bank(ib_bank, ib_slot);
        if (*train) {
            return cmd_train(g, tr_input, tr_bank, tr_model, tr_trace, tr_mode, tr_nocomp,
                             tr_epochs, tr_R);
        }
        if (*evaluate) return cmd_evaluate(g, ev_input, ev_ckpt, ev_ctrl, ev_bank, ev_buckets);
        if (*extremeness) {
            return cmd_extremeness(g, ex_input, ex_out, ex_L, ex_tau, ex_buckets);
        }
        if (*bench) return cmd_bench(g, bn_C, bn_R, bn_sweep, bn_reps);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tcf::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
