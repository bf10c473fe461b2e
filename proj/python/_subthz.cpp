#include <algorithm>

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "subthz/harness.hpp"

namespace py = pybind11;
using namespace subthz;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BitArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

CVec to_cvec(const CArray& a) { return CVec(a.data(), a.data() + a.size()); }
RVec to_rvec(const RArray& a) { return RVec(a.data(), a.data() + a.size()); }
Bits to_bits(const BitArray& a) { return Bits(a.data(), a.data() + a.size()); }

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
    py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

// Sample rates are irrelevant to everything bound here except the PSD.
ComplexSignal as_signal(const CArray& a, double fs = 1.0) { return ComplexSignal(to_cvec(a), fs); }

sigcore::FilterSpec rrc(double roll_off, int span, int oversampling) {
    return sigcore::FilterSpec::rrc(roll_off, span, oversampling);
}

planner::LatencyScenario scenario(double scs_khz, int n_blocks, double alpha, int n_retx, std::optional<double> alignment_us) {
    planner::LatencyScenario s;
    s.numerology.scs_hz = scs_khz * 1e3;
    s.n_blocks = n_blocks;
    s.alpha = alpha;
    s.n_retx = n_retx;
    s.alignment_us = alignment_us;
    return s;
}

}  // namespace

PYBIND11_MODULE(_subthz, m) {
    m.doc() = "Sub-THz single-carrier link simulation core";
    m.attr("__version__") = harness::kToolVersion;

    py::register_exception<harness::ConfigError>(m, "ConfigError", PyExc_ValueError);

    // signal core
    m.def("rrc_impulse", &sigcore::rrc_impulse, py::arg("t_over_T"), py::arg("roll_off"));
    m.def("rrc_taps", [](double r, int span, int os) { return to_array(sigcore::rrc_taps(rrc(r, span, os))); },
          py::arg("roll_off"), py::arg("span_symbols"), py::arg("oversampling"));
    m.def("dft", [](const CArray& x) { return to_array(sigcore::dft(to_cvec(x))); }, py::arg("x"));
    m.def("idft", [](const CArray& x) { return to_array(sigcore::idft(to_cvec(x))); }, py::arg("x"));
    m.def("papr_db", [](const CArray& x) { return sigcore::papr_db(std::span<const cplx>(to_cvec(x))); }, py::arg("x"));
    m.def("papr_at_ccdf", [](const RArray& s, double p) { return sigcore::papr_at_ccdf(to_rvec(s), p); },
          py::arg("papr_samples"), py::arg("probability"));
    m.def(
        "ccdf",
        [](const RArray& s, const RArray& th) {
            RVec t, p;
            for (const auto& pt : sigcore::ccdf(to_rvec(s), to_rvec(th))) {
                t.push_back(pt.threshold_db);
                p.push_back(pt.probability);
            }
            return py::make_tuple(to_array(t), to_array(p));
        },
        py::arg("papr_samples"), py::arg("thresholds_db"));
    m.def(
        "psd",
        [](const CArray& x, double fs, std::size_t seg) {
            RVec f, d;
            for (const auto& b : sigcore::psd_estimate(as_signal(x, fs), seg)) {
                f.push_back(b.freq_hz);
                d.push_back(b.density);
            }
            return py::make_tuple(to_array(f), to_array(d));
        },
        py::arg("x"), py::arg("sample_rate_hz"), py::arg("segment"));

    // constellations
    m.def(
        "constellation",
        [](const std::string& name) {
            const auto c = mapping::constellation_by_name(name);
            return py::make_tuple(to_array(c.points), to_array(c.labels));
        },
        py::arg("name"), "Points and their bit labels for a named constellation.");
    m.def("map_bits", [](const BitArray& b, const std::string& name) {
        return to_array(mapping::map_bits(to_bits(b), mapping::constellation_by_name(name)));
    }, py::arg("bits"), py::arg("constellation"));
    m.def("demap_llr", [](const CArray& y, const std::string& name, double nv) {
        return to_array(mapping::demap_llr(to_cvec(y), mapping::constellation_by_name(name), nv));
    }, py::arg("symbols"), py::arg("constellation"), py::arg("noise_var"));

    // waveforms
    py::class_<waveform::BlockFormat>(m, "BlockFormat")
        .def(py::init<>())
        .def_readwrite("n_fft", &waveform::BlockFormat::n_fft)
        .def_readwrite("n_cp", &waveform::BlockFormat::n_cp)
        .def_readwrite("n_alloc", &waveform::BlockFormat::n_alloc)
        .def_readwrite("oversampling", &waveform::BlockFormat::oversampling)
        .def_readwrite("scs_hz", &waveform::BlockFormat::scs_hz)
        .def_property(
            "mapping", [](const waveform::BlockFormat& f) { return waveform::to_string(f.mapping); },
            [](waveform::BlockFormat& f, const std::string& s) { f.mapping = waveform::parse_mapping(s); })
        .def_property_readonly("sample_rate_hz", &waveform::BlockFormat::sample_rate_hz)
        .def_property_readonly("block_samples", &waveform::BlockFormat::block_samples);
    m.def("occupied_fraction", &waveform::occupied_fraction, py::arg("fmt"));
    m.def("ofdm_modulate", [](const CArray& s, const waveform::BlockFormat& f) {
        return to_array(waveform::ofdm_modulate(to_cvec(s), f).samples());
    }, py::arg("symbols"), py::arg("fmt"));
    m.def("dfts_ofdm_modulate", [](const CArray& s, const waveform::BlockFormat& f) {
        return to_array(waveform::dfts_ofdm_modulate(to_cvec(s), f).samples());
    }, py::arg("symbols"), py::arg("fmt"));
    m.def("scfde_symbols_per_block", &waveform::scfde_symbols_per_block, py::arg("fmt"), py::arg("oversampling"));
    m.def(
        "scfde_modulate",
        [](const CArray& s, const waveform::BlockFormat& f, double roll_off, int span, int os) {
            return to_array(waveform::scfde_modulate(to_cvec(s), f, rrc(roll_off, span, os), os).signal.samples());
        },
        py::arg("symbols"), py::arg("fmt"), py::arg("roll_off") = 0.22, py::arg("span_symbols") = 16,
        py::arg("oversampling") = 2);

    // impairments
    py::class_<impair::PaModel>(m, "PaModel")
        .def(py::init<>())
        .def_readwrite("gain", &impair::PaModel::gain)
        .def_readwrite("a_sat", &impair::PaModel::a_sat)
        .def_readwrite("smoothness", &impair::PaModel::smoothness)
        .def_property(
            "am_pm", [](const impair::PaModel& p) { return p.am_pm.has_value(); },
            [](impair::PaModel& p, bool on) { p.am_pm = on ? std::optional<impair::AmPm>(impair::AmPm{}) : std::nullopt; })
        .def("am_am", &impair::PaModel::am_am)
        .def("am_pm_rad", &impair::PaModel::am_pm_rad);
    m.def("pa_apply", [](const CArray& x, const impair::PaModel& pa) { return to_array(impair::pa_apply(to_cvec(x), pa)); },
          py::arg("x"), py::arg("pa"));
    m.def(
        "set_opbo",
        [](const CArray& x, const impair::PaModel& pa, double target) {
            const auto r = impair::set_opbo(as_signal(x), pa, target);
            return py::make_tuple(to_array(r.input.samples()), r.scale, r.achieved_opbo_db);
        },
        py::arg("x"), py::arg("pa"), py::arg("target_opbo_db"), "Scaled input, scale factor and achieved OPBO in dB.");
    m.def("awgn", [](const CArray& x, double snr_db, std::uint64_t seed) {
        return to_array(impair::awgn(as_signal(x), snr_db, seed).samples());
    }, py::arg("x"), py::arg("snr_db"), py::arg("seed"));
    m.def(
        "pn_generate",
        [](double fs, std::size_t n, std::uint64_t seed, double carrier_hz) {
            return to_array(impair::pn_generate(impair::default_pn_spec(carrier_hz), fs, n, seed));
        },
        py::arg("sample_rate_hz"), py::arg("n_samples"), py::arg("seed"), py::arg("carrier_hz") = 140e9,
        "Phase-noise trajectory in radians from the default oscillator profile.");

    // coding
    m.def("conv_encode", [](const BitArray& b, const std::string& rate) {
        return to_array(coding::conv_encode(to_bits(b), coding::ConvCode{coding::parse_code_rate(rate)}));
    }, py::arg("bits"), py::arg("rate") = "1/2");
    m.def("viterbi_decode", [](const RArray& llr, const std::string& rate) {
        return to_array(coding::viterbi_decode(to_rvec(llr), coding::ConvCode{coding::parse_code_rate(rate)}));
    }, py::arg("llrs"), py::arg("rate") = "1/2");

    // zero-crossing modulation
    m.def(
        "rl_count",
        [](int n, int min_run) {
            return py::int_(py::str(zxm::to_string(zxm::rl_count(n, zxm::RunlengthSpec{min_run, n, 1}))));
        },
        py::arg("n"), py::arg("min_run"));
    m.def("rl_capacity", &zxm::rl_capacity, py::arg("min_run"));
    m.def("zxm_rate", [](int ftn, int min_run, int n) { return zxm::zxm_rate(zxm::RunlengthSpec{min_run, n, ftn}); },
          py::arg("ftn_factor"), py::arg("min_run"), py::arg("block_symbols") = 128);
    m.def("rl_payload_bits", [](int n, int min_run) { return zxm::rl_payload_bits(zxm::RunlengthSpec{min_run, n, 1}); },
          py::arg("block_symbols"), py::arg("min_run"));
    m.def(
        "zxm_construct",
        [](const BitArray& bits, int n, int min_run, int ftn, double roll_off, int span, int os) {
            const auto f = zxm::zxm_construct(to_bits(bits), zxm::RunlengthSpec{min_run, n, ftn}, rrc(roll_off, span, os));
            RVec real;
            for (auto v : f.signal.samples()) real.push_back(v.real());
            return py::make_tuple(to_array(f.symbols), to_array(real));
        },
        py::arg("bits"), py::arg("block_symbols"), py::arg("min_run"), py::arg("ftn_factor"), py::arg("roll_off") = 0.3,
        py::arg("span_symbols") = 8, py::arg("oversampling") = 8, "Runlength symbols and the real transmit signal.");
    m.def(
        "zxm_detect",
        [](const RArray& signs, int n, int min_run, int ftn, double roll_off, int span, int os, int rx, double noise_std,
           int memory) {
            CVec x;
            for (auto v : to_rvec(signs)) x.emplace_back(v, 0.0);
            zxm::DetectorOptions opt;
            opt.noise_std = noise_std;
            opt.memory_symbols = memory;
            return to_array(zxm::zxm_detect(ComplexSignal(std::move(x), 1.0), zxm::RunlengthSpec{min_run, n, ftn},
                                            rrc(roll_off, span, os), rx, opt));
        },
        py::arg("signs"), py::arg("block_symbols"), py::arg("min_run"), py::arg("ftn_factor"), py::arg("roll_off") = 0.3,
        py::arg("span_symbols") = 8, py::arg("oversampling") = 8, py::arg("rx_oversample") = 2,
        py::arg("noise_std") = 1e-3, py::arg("memory_symbols") = 8, "Payload bits from a one-bit quantized signal.");

    // planner
    m.def(
        "numerology",
        [](double scs_khz) {
            planner::Numerology n;
            n.scs_hz = scs_khz * 1e3;
            const auto d = planner::numerology_derive(n);
            py::dict r;
            r["scs_khz"] = d.scs_khz;
            r["ts_ns"] = d.ts_ns;
            r["t_block_us"] = d.t_block_us;
            r["t_slot2_us"] = d.t_slot2_us;
            r["t_slot14_us"] = d.t_slot14_us;
            r["bw_ghz"] = d.bw_ghz;
            return r;
        },
        py::arg("scs_khz"));
    m.def("user_plane_latency", [](double scs, int nb, double a, int retx, std::optional<double> al) {
        return planner::user_plane_latency(scenario(scs, nb, a, retx, al));
    }, py::arg("scs_khz"), py::arg("n_blocks"), py::arg("alpha"), py::arg("n_retx"), py::arg("alignment_us") = py::none());
    m.def("processing_fraction", [](double scs, int nb, double a, int retx, std::optional<double> al) {
        return planner::processing_fraction(scenario(scs, nb, a, retx, al));
    }, py::arg("scs_khz"), py::arg("n_blocks"), py::arg("alpha"), py::arg("n_retx"), py::arg("alignment_us") = py::none());
    m.def("alpha_interval", [](double scs, int nb, int retx, double budget, std::optional<double> al) {
        return planner::alpha_interval(scenario(scs, nb, 1.0, retx, al), budget);
    }, py::arg("scs_khz"), py::arg("n_blocks"), py::arg("n_retx"), py::arg("budget_us"), py::arg("alignment_us") = py::none());
    m.def("pn_floor_scale", &planner::pn_floor_scale, py::arg("level_dbc_hz"), py::arg("f_ref_hz"), py::arg("f_target_hz"));
    m.def("pn_floor_snr", &planner::pn_floor_snr, py::arg("level_dbc_hz"), py::arg("bandwidth_hz"));

    // link and experiment harness, driven by the same key = value text as the CLI
    m.def("normalize_config", [](const std::string& text) { return harness::serialize(harness::parse_config(text)); },
          py::arg("text"), "Parses a config and returns it with every key spelled out.");
    m.def("config_digest", [](const std::string& text) { return harness::config_digest(harness::parse_config(text)); },
          py::arg("text"));
    m.def(
        "run_link",
        [](const std::string& text) {
            const auto cfg = harness::parse_config(text);
            std::vector<link::BlerRecord> recs;
            {
                py::gil_scoped_release release;
                recs = link::run_link(cfg.link);
            }
            std::vector<py::dict> out;
            for (const auto& r : recs) {
                py::dict d;
                d["snr_db"] = r.snr_db;
                d["blocks"] = r.blocks_sent;
                d["errors"] = r.block_errors;
                d["bler"] = r.bler;
                d["ber"] = r.ber;
                d["evm_percent"] = r.evm_percent;
                out.push_back(std::move(d));
            }
            return out;
        },
        py::arg("text"), "BLER records for the link.* keys of a config.");
    m.def(
        "run_experiment",
        [](const std::string& text, const std::string& output) {
            auto cfg = harness::parse_config(text);
            cfg.output = output;
            harness::ResultManifest man;
            {
                py::gil_scoped_release release;
                man = harness::run_experiment(cfg);
            }
            return man.to_json();
        },
        py::arg("text"), py::arg("output"), "Runs an experiment into a directory and returns the manifest JSON.");
}
