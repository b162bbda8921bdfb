#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "fosemu/error.hpp"
#include "fosemu/io.hpp"
#include "json.hpp"

using namespace fosemu;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / fmt_name();
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static std::string fmt_name() {
        static int counter = 0;
        return "fosemu_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
    }
    fs::path write(const std::string& name, std::string_view text) const {
        io::write_text(path / name, text);
        return path / name;
    }
};

}  // namespace

TEST_CASE("numbers round trip") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e8, 123456789.123456789}) {
        CHECK(std::stod(io::format_number(x)) == x);
    }
    CHECK(io::format_number(2.0) == "2");
}

TEST_CASE("fingerprints") {
    CHECK(io::fingerprint("") == "cbf29ce484222325");
    CHECK(io::fingerprint("a") == "af63dc4c8601ec8c");
    CHECK(io::fingerprint("ab") != io::fingerprint("ba"));
}

TEST_CASE("CSV tables") {
    TempDir dir;
    const auto p = dir.write("t.csv", "a,b\n1,2\n3,4\n");
    const auto t = io::read_csv(p);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.size() == 2);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), DataValidationError);
    CHECK_THROWS(io::read_csv(dir.path / "missing.csv"));
    CHECK(io::read_text(p) == "a,b\n1,2\n3,4\n");
    io::write_text(dir.path / "nested" / "deeper" / "x.txt", "hi");
    CHECK(io::read_text(dir.path / "nested" / "deeper" / "x.txt") == "hi");
}

TEST_CASE("design round trip and validation") {
    TempDir dir;
    const auto d = lhs_design(6, default_ic_ranges(), 3);
    const auto p = dir.write("design.csv", io::design_csv(d));
    const auto back = io::read_design(p);
    REQUIRE(back.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(back.run_ids[i] == d.run_ids[i]);
        CHECK(back.points[i].to_array() == d.points[i].to_array());
    }
    CHECK(io::design_csv(back) == io::design_csv(d));

    const auto bad = dir.write("bad.csv",
                               "run_id,height_m,angle_deg,cohesion_kpa,friction_deg,permeability_m_per_s\n"
                               "1,10,30,5,20,1e-8\n"
                               "1,10,30,5,20,x\n"
                               "2,10,30\n");
    try {
        io::read_design(bad);
        FAIL("expected DataValidationError");
    } catch (const DataValidationError& e) {
        CHECK(e.violations().size() >= 3);
    }
}

TEST_CASE("series round trip and validation") {
    TempDir dir;
    FoSSeries a{1, {0, 1, 2, 3, 4}, {0.5, 0.4, 0.2, 0.1, -0.05}, false};
    FoSSeries b{2, {0, 1, 2, 3}, {0.9, 0.8, 0.8, 0.7}, true};
    const std::vector<FoSSeries> runs{a, b};
    const auto p = dir.write("series.csv", io::series_csv(runs));
    const auto back = io::read_series(p);
    REQUIRE(back.size() == 2);
    CHECK(back[0].excess[1] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_FALSE(back[0].censored);
    CHECK(back[1].censored);
    CHECK(io::series_csv(back) == io::series_csv(runs));

    const auto bad = dir.write("short.csv", "run_id,year,fos\n1,0,1.5\n1,1,1.4\n2,0,1.2\n2,1,1.1\n2,2,1\n");
    try {
        io::read_series(bad);
        FAIL("expected DataValidationError");
    } catch (const DataValidationError& e) {
        CHECK(e.violations().size() == 2);
        CHECK(std::string(e.what()).find("run 1") != std::string::npos);
    }
}

TEST_CASE("truth round trip") {
    TempDir dir;
    const auto data = synth_generate(lhs_design(4, default_ic_ranges(), 2), TruthGenerator::preset("bspline"), 184.0, 5);
    const auto p = dir.write("truth.json", io::truth_json(data.truth));
    const auto back = io::read_truth(p);
    CHECK(back.generator == "bspline");
    CHECK(back.seed == 5);
    REQUIRE(back.runs.size() == 4);
    CHECK(back.runs[2].params.gamma0() == doctest::Approx(data.truth.runs[2].params.gamma0()).epsilon(1e-14));
    CHECK(io::truth_json(back) == io::truth_json(data.truth));
}

TEST_CASE("draws round trip") {
    TempDir dir;
    PosteriorDraws d;
    d.names = {"A0[1]", "tau_A0"};
    d.chains = 2;
    d.per_chain = 2;
    d.first_iteration = 10;
    d.values = {0.1, 1.0 / 3.0, 0.2, 0.4, 0.3, 0.5, 0.4, 0.6};
    const auto text = io::draws_jsonl(d);
    CHECK(text.find("\"chain\":1,\"iteration\":11") != std::string::npos);
    const auto p = dir.write("draws.jsonl", text);
    const auto back = io::read_draws(p);
    CHECK(back.names == d.names);
    CHECK(back.chains == 2);
    CHECK(back.per_chain == 2);
    CHECK(back.first_iteration == 10);
    CHECK(back.values == d.values);

    const auto ragged = dir.write("ragged.jsonl", "{\"chain\":1,\"iteration\":1,\"x\":1}\n{\"chain\":2,\"iteration\":1,\"y\":1}\n");
    CHECK_THROWS_AS(io::read_draws(ragged), DataValidationError);
}

TEST_CASE("scores and comparisons") {
    TempDir dir;
    const std::vector<RunScores> s{{1, {0, 1}, {0.01, 0.02}, {0.1, 0.2}}, {3, {0}, {0.5}, {0.25}}};
    const auto p = dir.write("scores.csv", io::scores_csv(s));
    const auto back = io::read_scores(p);
    REQUIRE(back.size() == 2);
    CHECK(back[1].run_id == 3);
    CHECK(back[0].crps == s[0].crps);

    const auto table = compare_models(s, s);
    CHECK(io::comparison_csv(table).rfind("run_id,year,delta_mse,delta_crps\n", 0) == 0);
    const auto j = nlohmann::json::parse(io::comparison_json(table));
    CHECK(j.contains("runs"));
}

TEST_CASE("bands, TTF and plots") {
    PredictionBand band;
    band.grid = {0, 1, 2};
    band.mean = {2, 1.5, 1};
    band.lo95 = {1.9, 1.4, 0.9};
    band.hi95 = {2.1, 1.6, 1.1};
    band.curve_mean = band.mean;
    CHECK(io::band_csv(band) == "year,mean,lo95,hi95\n0,2,1.8999999999999999,2.1000000000000001\n"
                                "1,1.5,1.3999999999999999,1.6000000000000001\n2,1,0.90000000000000002,1.1000000000000001\n");
    TTFDistribution ttf;
    ttf.rho = {10, 12, 14};
    ttf.omega = {11, 12.5, 14};
    const auto j = nlohmann::json::parse(io::ttf_json(ttf, "run3", true));
    CHECK(j["label"] == "run3");
    CHECK(j["predicted_ttf"]["q50"] == 12.0);
    CHECK(j["model_ttf_samples"].size() == 3);
    const auto svg = io::band_svg(band, "run 3");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("archive round trip and tamper detection") {
    TempDir dir;
    const auto d = lhs_design(5, default_ic_ranges(), 8);
    io::FittedModelArchive a;
    a.tool_version = "test";
    a.model = ModelKind::quadratic;
    a.nugget = 1e-6;
    a.design = d.points;
    a.run_ids = d.run_ids;
    a.stats = StandardizationStats::from_training(d.points);
    a.draws_file = "draws.jsonl";
    a.data_fingerprint = io::fingerprint("series");
    a.stats_fingerprint = io::stats_fingerprint(a.stats, a.run_ids, a.design);
    const auto text = io::archive_json(a);
    const auto p = dir.write("archive.json", text);
    const auto back = io::read_archive(p);
    CHECK(back.model == ModelKind::quadratic);
    CHECK(back.run_ids == a.run_ids);
    CHECK(io::archive_json(back) == text);
    CHECK((back.z_training() - standardize_design(d.points, a.stats)).cwiseAbs().maxCoeff() == 0.0);

    auto j = nlohmann::ordered_json::parse(text);
    j["stats_fingerprint"] = "0000000000000000";
    const auto tampered = dir.write("tampered.json", j.dump(2));
    CHECK_THROWS_AS(io::read_archive(tampered), DataValidationError);
}
