#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tcf/bank.hpp"
#include "tcf/bench.hpp"
#include "tcf/extremeness.hpp"
#include "tcf/forecaster.hpp"
#include "tcf/ingest.hpp"
#include "tcf/metrics.hpp"

namespace py = pybind11;

namespace {

tcf::InputWindow window_from_array(py::array_t<float, py::array::c_style> speeds) {
    if (speeds.ndim() != 2) throw tcf::ValidationError("expected a 2-D (L, C) array");
    tcf::InputWindow w;
    w.L = static_cast<int>(speeds.shape(0));
    w.C = static_cast<int>(speeds.shape(1));
    w.period = tcf::PeriodConfig{}.period();
    w.slots.assign(w.L, 0);
    w.speeds.assign(speeds.data(), speeds.data() + speeds.size());
    return w;
}

tcf::SeriesFrame frame_from_arrays(py::array_t<float, py::array::c_style> values,
                                   py::array_t<int64_t, py::array::c_style> timestamps,
                                   std::vector<std::string> sensor_ids) {
    if (values.ndim() != 2) throw tcf::ValidationError("values must be 2-D (T, C)");
    tcf::SeriesFrame f;
    f.values.assign(values.data(), values.data() + values.size());
    f.timestamps.assign(timestamps.data(), timestamps.data() + timestamps.size());
    if (sensor_ids.empty()) {
        for (py::ssize_t c = 0; c < values.shape(1); ++c) {
            sensor_ids.push_back("s" + std::to_string(c));
        }
    }
    f.sensor_ids = std::move(sensor_ids);
    f.validate();
    return f;
}

py::array_t<float> frame_values(const tcf::SeriesFrame& f) {
    py::array_t<float> out({f.rows(), f.cols()});
    std::copy(f.values.begin(), f.values.end(), out.mutable_data());
    return out;
}

py::array_t<int64_t> frame_timestamps(const tcf::SeriesFrame& f) {
    py::array_t<int64_t> out(f.rows());
    std::copy(f.timestamps.begin(), f.timestamps.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vec(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "traffic forecasting with periodic-bank compensation";

    py::register_exception<tcf::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<tcf::IoError>(m, "IoError", PyExc_IOError);

    py::class_<tcf::SeriesFrame>(m, "SeriesFrame")
        .def(py::init(&frame_from_arrays), py::arg("values"), py::arg("timestamps"),
             py::arg("sensor_ids") = std::vector<std::string>{})
        .def_property_readonly("values", &frame_values)
        .def_property_readonly("timestamps", &frame_timestamps)
        .def_readonly("sensor_ids", &tcf::SeriesFrame::sensor_ids)
        .def("rows", &tcf::SeriesFrame::rows)
        .def("cols", &tcf::SeriesFrame::cols)
        .def("slice_rows", &tcf::SeriesFrame::slice_rows);

    m.def("load_csv", &tcf::load_csv, py::arg("path"));
    m.def("write_csv", &tcf::write_csv, py::arg("frame"), py::arg("path"));

    py::class_<tcf::SyntheticSpec>(m, "SyntheticSpec")
        .def(py::init<>())
        .def_readwrite("sensors", &tcf::SyntheticSpec::sensors)
        .def_readwrite("weeks", &tcf::SyntheticSpec::weeks)
        .def_readwrite("base_speed", &tcf::SyntheticSpec::base_speed)
        .def_readwrite("daily_amplitude", &tcf::SyntheticSpec::daily_amplitude)
        .def_readwrite("weekend_factor", &tcf::SyntheticSpec::weekend_factor)
        .def_readwrite("noise_std", &tcf::SyntheticSpec::noise_std)
        .def_readwrite("zero_burst_rate", &tcf::SyntheticSpec::zero_burst_rate)
        .def_readwrite("congestion_rate", &tcf::SyntheticSpec::congestion_rate)
        .def_readwrite("seed", &tcf::SyntheticSpec::seed);
    m.def("generate_synthetic", &tcf::generate_synthetic, py::arg("spec"));

    m.def(
        "split",
        [](const tcf::SeriesFrame& f, double train, double val, double test) {
            tcf::Splits s = tcf::split(f, {train, val, test, true});
            return py::make_tuple(s.train, s.val, s.test);
        },
        py::arg("frame"), py::arg("train") = 0.7, py::arg("val") = 0.1,
        py::arg("test") = 0.2);

    m.def("slot_of", [](int64_t ts) { return tcf::slot_of(ts, {}); }, py::arg("ts_minutes"));
    m.def("parse_timestamp", &tcf::parse_timestamp, py::arg("text"));
    m.def("format_timestamp", &tcf::format_timestamp, py::arg("ts_minutes"));
    m.attr("PERIOD") = tcf::PeriodConfig{}.period();

    m.def(
        "count_zeros",
        [](py::array_t<float, py::array::c_style> speeds) {
            return tcf::count_zeros(window_from_array(std::move(speeds)));
        },
        py::arg("speeds"));
    m.def(
        "input_entropy",
        [](py::array_t<float, py::array::c_style> speeds, double epsilon) {
            return tcf::input_entropy(window_from_array(std::move(speeds)), {epsilon});
        },
        py::arg("speeds"), py::arg("epsilon") = 1e-5);
    m.def(
        "ppmcc",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b)
            -> std::optional<double> { return tcf::ppmcc(to_vec(a), to_vec(b)); },
        py::arg("a"), py::arg("b"));

    py::class_<tcf::PeriodicDataBank>(m, "PeriodicDataBank")
        .def_property_readonly("C", [](const tcf::PeriodicDataBank& b) { return b.C; })
        .def_readonly("built_from", &tcf::PeriodicDataBank::built_from)
        .def("total_records", &tcf::PeriodicDataBank::total_records)
        .def("slot_sizes",
             [](const tcf::PeriodicDataBank& b) {
                 py::array_t<uint32_t> out(b.slots.size());
                 auto* p = out.mutable_data();
                 for (size_t i = 0; i < b.slots.size(); ++i) {
                     p[i] = static_cast<uint32_t>(b.slots[i].size());
                 }
                 return out;
             })
        .def("validate", &tcf::PeriodicDataBank::validate);

    m.def(
        "impute_zeros",
        [](const tcf::SeriesFrame& f) {
            tcf::ImputeStats st;
            tcf::SeriesFrame out = tcf::impute_zeros(f, {}, 12, &st);
            return py::make_tuple(out,
                                  py::dict(py::arg("zero_rows") = st.zero_rows,
                                           py::arg("isolated_zeros") = st.isolated_zeros));
        },
        py::arg("frame"));
    m.def(
        "build_bank",
        [](const tcf::SeriesFrame& f) { return tcf::build_bank(f); }, py::arg("frame"));
    m.def("save_bank", &tcf::save_bank, py::arg("bank"), py::arg("path"));
    m.def("load_bank", &tcf::load_bank, py::arg("path"));

    m.def(
        "compute_metrics",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pred,
           py::array_t<double, py::array::c_style | py::array::forcecast> target,
           bool mask) {
            tcf::MetricTriple t = tcf::compute_metrics(to_vec(pred), to_vec(target), mask);
            return py::make_tuple(t.mae, t.rmse, t.mape);
        },
        py::arg("pred"), py::arg("target"), py::arg("mask_zero_targets") = true);

    py::class_<tcf::Model>(m, "Model")
        .def_property_readonly("use_compensation",
                               [](const tcf::Model& m_) { return m_.cfg.use_compensation; })
        .def_property_readonly("mode",
                               [](const tcf::Model& m_) { return mode_name(m_.cfg.mode); });
    m.def("save_checkpoint", &tcf::save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &tcf::load_checkpoint, py::arg("path"));

    py::class_<tcf::TrainResult>(m, "TrainResult")
        .def_readonly("model", &tcf::TrainResult::model)
        .def_readonly("best_epoch", &tcf::TrainResult::best_epoch)
        .def_readonly("best_val_mae", &tcf::TrainResult::best_val_mae)
        .def_property_readonly("trace", [](const tcf::TrainResult& r) {
            py::list out;
            for (const auto& e : r.trace) {
                out.append(py::make_tuple(e.epoch, e.train_mae, e.val_mae));
            }
            return out;
        });

    m.def(
        "train",
        [](const tcf::SeriesFrame& train_frame, const tcf::SeriesFrame& val_frame,
           const tcf::PeriodicDataBank* bank, int L, int tau, int R, int hidden,
           int d_model, int n_heads, const std::string& mode, bool use_compensation,
           double lr, int batch_size, int max_epochs, int patience, uint64_t seed) {
            tcf::ModelConfig mc;
            mc.L = L;
            mc.tau = tau;
            mc.R = R;
            mc.hidden = hidden;
            mc.attention.d_model = d_model;
            mc.attention.n_heads = n_heads;
            mc.mode = tcf::parse_mode(mode);
            mc.use_compensation = use_compensation;
            tcf::TrainConfig tc;
            tc.lr = lr;
            tc.batch_size = batch_size;
            tc.max_epochs = max_epochs;
            tc.patience = patience;
            tc.seed = seed;
            return tcf::train(train_frame, val_frame, bank, mc, tc);
        },
        py::arg("train_frame"), py::arg("val_frame"), py::arg("bank") = nullptr,
        py::arg("L") = 12, py::arg("tau") = 12, py::arg("R") = 5, py::arg("hidden") = 64,
        py::arg("d_model") = 16, py::arg("n_heads") = 4, py::arg("mode") = "concat",
        py::arg("use_compensation") = true, py::arg("lr") = 1e-3,
        py::arg("batch_size") = 64, py::arg("max_epochs") = 50, py::arg("patience") = 10,
        py::arg("seed") = 0);

    m.def(
        "predict_mae",
        [](const tcf::SeriesFrame& frame, const tcf::PeriodicDataBank* bank,
           const tcf::Model& model, uint64_t seed) {
            tcf::Prediction p = tcf::predict(frame, bank, model, seed);
            double acc = 0.0;
            size_t n = 0;
            for (size_t i = 0; i < p.preds.size(); ++i) {
                tcf::MaskedLoss l = tcf::mae_loss(p.preds[i], p.ws.targets[i]);
                if (l.all_masked) continue;
                acc += l.value;
                ++n;
            }
            return n ? acc / n : 0.0;
        },
        py::arg("frame"), py::arg("bank"), py::arg("model"), py::arg("seed") = 17);

    m.def(
        "bench_attention",
        [](int C, int R, std::vector<int> sweep, int reps) {
            return tcf::bench_attention(C, R, std::move(sweep), reps).to_json().dump();
        },
        py::arg("C") = 16, py::arg("R") = 3, py::arg("L_sweep") = std::vector<int>{12, 24},
        py::arg("reps") = 3);
}
