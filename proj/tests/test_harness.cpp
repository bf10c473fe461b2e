#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "subthz/harness.hpp"

using namespace subthz;
using namespace subthz::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("subthz_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

// Header first, manifest reference comment last, nothing else commented.
void check_csv_shape(const fs::path& p) {
    const auto lines = lines_of(slurp(p));
    CAPTURE(p.string());
    REQUIRE(lines.size() >= 2u);
    CHECK(lines.front().find(',') != std::string::npos);
    CHECK(lines.front()[0] != '#');
    CHECK(lines.back().rfind("# manifest=manifest.json", 0) == 0);
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) CHECK(lines[i][0] != '#');
}

ExperimentConfig run_twice_config(const std::string& text, const fs::path& dir) {
    auto cfg = parse_config(text);
    cfg.output = dir.string();
    return cfg;
}

// Runs the config at two worker counts and compares every CSV byte for byte.
void check_worker_invariance(const std::string& text, const std::string& tag) {
    const auto a = scratch(tag + "_w1"), b = scratch(tag + "_w3");
    auto ca = run_twice_config(text, a);
    auto cb = run_twice_config(text, b);
    ca.workers = ca.link.workers = 1;
    cb.workers = cb.link.workers = 3;
    const auto ma = run_experiment(ca);
    const auto mb = run_experiment(cb);
    REQUIRE(ma.files.size() == mb.files.size());
    int csvs = 0;
    for (std::size_t i = 0; i < ma.files.size(); ++i) {
        CHECK(ma.files[i].name == mb.files[i].name);
        if (fs::path(ma.files[i].name).extension() != ".csv") continue;
        ++csvs;
        CHECK(ma.files[i].sha256 == mb.files[i].sha256);
        CHECK(slurp(a / ma.files[i].name) == slurp(b / mb.files[i].name));
        check_csv_shape(a / ma.files[i].name);
    }
    CHECK(csvs > 0);
    CHECK(fs::exists(a / "manifest.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
    const auto c = parse_config("experiment = numerology\n");
    CHECK(c.kind == ExperimentKind::Numerology);
    CHECK(c.seed == 1u);
    CHECK(c.numerology.scs_khz.size() == 4u);
}

TEST_CASE("comments, blank lines and spacing are ignored") {
    const auto a = parse_config("experiment = bler_sweep\nseed = 5\nlink.constellation = 16qam\n");
    const auto b = parse_config("# a comment\n\n  link.constellation=16qam   # trailing\nseed =5\n experiment= bler_sweep\n");
    CHECK(serialize(a) == serialize(b));
    CHECK(config_digest(a) == config_digest(b));
    auto c = a;
    c.seed = 6;
    CHECK(config_digest(c) != config_digest(a));
    c = a;
    c.workers = 4;
    c.output = "elsewhere";
    CHECK(config_digest(c) == config_digest(a));
}

TEST_CASE("every fault in a config is reported") {
    const std::string text =
        "experiment = bler_sweep\n"
        "link.code.rate = 0.8\n"
        "link.no_such_key = 1\n"
        "seed = minus-one\n";
    try {
        (void)parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const auto& d = e.diagnostics();
        REQUIRE(d.size() == 3u);
        CHECK(d[0].line == 2);
        CHECK(d[0].message.find("0.8") != std::string::npos);
        CHECK(d[1].line == 3);
        CHECK(d[1].message.find("no_such_key") != std::string::npos);
        CHECK(d[2].line == 4);
    }
}

TEST_CASE("structural config errors") {
    CHECK_THROWS_AS(parse_config("seed = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiment = numerology\nexperiment = numerology\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiment = numerology\njust some words\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiment = teleport\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiment = bler_sweep\nlink.snr_db = 5,3\n"), ConfigError);
}

TEST_CASE("serialization round-trips every key") {
    const std::string text =
        "experiment = opbo_table\nseed = 99\nworkers = 2\nlink.waveform = dfts_ofdm\n"
        "link.constellation = 64apsk\nlink.code.rate = 3/4\nlink.pa.enabled = true\nlink.pa.smoothness = 1.1\n"
        "link.pn.enabled = true\nlink.pn.breakpoints = 1e4:-60,1e6:-100\nlink.quantizer.enabled = true\n"
        "link.quantizer.bits = 6\nlink.channel.taps = 1,0.2:0.1\nlink.snr_db = 0:10:2.5\nlink.stop_bler = 0.01\n"
        "opbo.grid_db = 2,4\nzxm.snr_db = 1,2\nlatency.alignment_us = 3\npsd.channels = 2\n";
    const auto c = parse_config(text);
    const auto s = serialize(c);
    CHECK(serialize(parse_config(s)) == s);
    CHECK(config_digest(parse_config(s)) == config_digest(c));
    const auto keys = config_keys();
    for (const auto& k : keys) CHECK(s.find(k + " = ") != std::string::npos);
    CHECK(lines_of(s).size() >= keys.size());
}

TEST_CASE("range parsing") {
    CHECK(parse_range("0:1:0.25") == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(parse_range("3,1.5") == std::vector<double>{3.0, 1.5});
    CHECK(parse_range("0:1:0.05").size() == 21u);
    CHECK_THROWS_AS(parse_range("1:0:0.5"), InvalidArgument);
    CHECK_THROWS_AS(parse_range("x"), InvalidArgument);
}

TEST_CASE("numerology experiment writes the table layout") {
    const auto dir = scratch("numerology");
    auto cfg = parse_config("experiment = numerology\n");
    cfg.output = dir.string();
    const auto m = run_experiment(cfg);
    check_csv_shape(dir / "numerology.csv");
    const auto lines = lines_of(slurp(dir / "numerology.csv"));
    CHECK(lines[0] == "scs_khz,ts_ns,t_block_us,t_slot2_us,t_slot14_us,bw_ghz");
    CHECK(lines.size() == 6u);
    CHECK(m.experiment == "numerology");
    CHECK(slurp(dir / "manifest.json").find(m.config_digest) != std::string::npos);
    // a rerun reproduces the checksum
    CHECK(run_experiment(cfg).files[0].sha256 == m.files[0].sha256);
    fs::remove_all(dir);
}

TEST_CASE("opbo table marks unreachable cells NA") {
    const auto dir = scratch("opbo_na");
    auto cfg = parse_config(
        "experiment = opbo_table\nlink.pa.enabled = true\nlink.block.n_fft = 256\nlink.block.n_cp = 32\nlink.pulse.span = 8\n"
        "link.block.n_alloc = 152\nlink.code.rate = 3/4\nlink.snr_db = 0,2\nlink.blocks_min = 20\n"
        "link.block_errors_min = 20\nopbo.grid_db = 3\nopbo.constellations = 64qam\n");
    cfg.output = dir.string();
    run_experiment(cfg);
    const auto lines = lines_of(slurp(dir / "opbo_table.csv"));
    CHECK(lines[0] == "opbo_db,dfts_ofdm_64qam,scfde_64qam");
    CHECK(lines[1] == "3,NA,NA");
    fs::remove_all(dir);
}

TEST_CASE("a failing run names the stage and leaves no partial outputs") {
    const auto dir = scratch("failing");
    auto cfg = parse_config(
        "experiment = zxm_ber\nzxm.block_symbols = 16\nzxm.span = 40\nzxm.memory = 20\nzxm.blocks = 2\n");
    cfg.output = dir.string();
    try {
        run_experiment(cfg);
        FAIL("expected RunError");
    } catch (const RunError& e) {
        CHECK(e.stage().find("zxm") != std::string::npos);
    }
    CHECK(fs::is_empty(dir));
    fs::remove_all(dir);
}

TEST_CASE("csv outputs are byte-identical at any worker count") {
    check_worker_invariance(
        "experiment = bler_sweep\nlink.block.n_fft = 256\nlink.block.n_cp = 32\nlink.pulse.span = 8\nlink.block.n_alloc = 152\n"
        "link.constellation = 16qam\nlink.snr_db = 4:8:2\nlink.blocks_min = 60\nlink.block_errors_min = 60\n"
        "link.pn.enabled = true\nlink.batch_blocks = 7\n",
        "bler");
    check_worker_invariance(
        "experiment = papr_ccdf\npapr.blocks = 300\npapr.series = ofdm:qpsk,scfde:16apsk,scfde_opt:64apsk\n"
        "papr.optimizer_iterations = 5\npapr.optimizer_train_blocks = 100\n",
        "papr");
    check_worker_invariance(
        "experiment = zxm_ber\nzxm.block_symbols = 32\nzxm.snr_db = 0,10\nzxm.blocks = 20\nzxm.memory = 6\n", "zxm");
    check_worker_invariance("experiment = zxm_rate\n", "zxm_rate");
    check_worker_invariance("experiment = latency_sweep\n", "latency");
    check_worker_invariance("experiment = multicarrier_psd\npsd.blocks = 2\n", "psd");
    check_worker_invariance(
        "experiment = pn_comparison\nlink.block.n_fft = 256\nlink.block.n_cp = 32\nlink.pulse.span = 8\nlink.block.n_alloc = 152\n"
        "link.pn.enabled = true\nlink.snr_db = 10,14\nlink.blocks_min = 20\nlink.block_errors_min = 20\n",
        "pn");
}
