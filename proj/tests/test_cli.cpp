#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "rlab/attacks.hpp"
#include "rlab/dataio.hpp"

using namespace rlab;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rlab_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s, bool skip_comments) {
  std::istringstream in(s);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (skip_comments && line[0] == '#')) continue;
    ++n;
  }
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("nxor prints the nine-row table") {
    const Run r = call({"nxor"});
    REQUIRE(r.code == 0);
    CHECK(count_lines(r.out, true) == 10);  // header + 9 rows
    CHECK(r.out.find("adv_count") != std::string::npos);
  }

  TEST_CASE("verify-theorem summary line") {
    const Run r = call({"verify-theorem", "--trials", "100", "--seed", "7"});
    CHECK(r.code == 0);
    CHECK(r.out.find("100/100 entropy-gap verdicts positive") != std::string::npos);
  }

  TEST_CASE("verify-theorem on the shipped example") {
    const Run r = call({"verify-theorem", "--system", RLAB_FIXTURE_DIR "/theorem_example.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("0.5") != std::string::npos);
  }

  TEST_CASE("measure-entropy on the mini digits") {
    const Run r = call({"measure-entropy", "--dataset", "mini", "--attack", "fgsm"});
    REQUIRE(r.code == 0);
    const Report rep = parse_csv_report(r.out);
    CHECK(rep.experiment == "input-complexity");
    REQUIRE(rep.rows.size() == 2);
    CHECK(std::get<std::string>(rep.rows[0][0]) == "benign");
    CHECK(std::get<std::string>(rep.rows[1][0]) == "fgsm");
    for (const char* metric : {"h_mle", "h_jvhw", "original_size", "compressed_size"}) {
      CHECK(std::find(rep.columns.begin(), rep.columns.end(), metric) != rep.columns.end());
    }
  }

  TEST_CASE("usage errors exit with 1") {
    CHECK(call({}).code == 1);
    CHECK(call({"frobnicate"}).code == 1);
    const Run r = call({"nxor", "--no-such-flag"});
    CHECK(r.code == 1);
    CHECK(r.err.find("--redundant-bits") != std::string::npos);  // usage text
    CHECK(call({"nxor", "--format", "xml"}).code == 1);
    CHECK(call({"measure-entropy", "--dataset", "/nonexistent.idx"}).code == 1);
    CHECK(call({"--version"}).code == 0);
  }

  TEST_CASE("a failed verdict exits with 2") {
    // The feature is already minimal, so redundancy is zero even though c is misclassified.
    const auto dir = scratch("exit2");
    std::ofstream(dir / "sys.json") << R"({"x_support": ["a","b","c"], "y_support": ["y0","y1"],
      "joint": [[0.3, 0.0], [0.3, 0.0], [0.0, 0.4]], "feature": ["A","A","C"],
      "decision": {"A": "y0", "C": "y0"},
      "adversarial": {"adv_set": ["c"], "anchor": "a", "ground_truth": ["y0","y0","y1"]}})";
    const Run r = call({"verify-theorem", "--system", (dir / "sys.json").string()});
    CHECK(r.code == 2);
  }

  TEST_CASE("reports, plots and the manifest land in --out") {
    const auto dir = scratch("out");
    const Run r = call({"snr-sweep", "--dataset", "mini", "--epochs", "3", "--snr-list", "inf,0.5", "--seed", "4",
                        "--out", dir.string(), "--format", "json"});
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(dir / "manifest.json"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["subcommand"] == "snr-sweep");
    CHECK(manifest["seed"] == 4);
    CHECK(manifest["version"] == cli::kVersion);
    CHECK(manifest["config"]["epochs"] == "3");
    CHECK(manifest.contains("started_at"));
    bool json_report = false, svg = false;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      json_report |= e.path().extension() == ".json" && e.path().filename() != "manifest.json";
      svg |= e.path().extension() == ".svg";
    }
    CHECK(json_report);
    CHECK(svg);
  }

  TEST_CASE("identical runs give identical report bytes") {
    const std::vector<std::string> args{"measure-entropy", "--dataset", "mini", "--attack", "fgsm", "--seed", "3"};
    CHECK(call(args).out == call(args).out);
  }

  TEST_CASE("config file fills options that flags leave unset") {
    const auto dir = scratch("config");
    std::ofstream(dir / "cfg.json") << R"({"epochs": 2, "snr_list": ["inf", 1], "seed": 11})";
    const auto out1 = scratch("config_a");
    const Run a = call({"snr-sweep", "--dataset", "mini", "--config", (dir / "cfg.json").string(), "--epochs", "4",
                        "--out", out1.string()});
    REQUIRE(a.code == 0);
    const auto m = nlohmann::json::parse(slurp(out1 / "manifest.json"));
    CHECK(m["config"]["epochs"] == "4");     // flag beats file
    CHECK(m["config"]["snr-list"] == "inf,1");  // file beats default
    CHECK(m["seed"] == 11);
    CHECK(m["input_digests"].contains((dir / "cfg.json").string()));
    CHECK(m["input_digests"][(dir / "cfg.json").string()].get<std::string>().size() == 64);

    std::ofstream(dir / "bad.json") << R"({"no_such_option": 1})";
    CHECK(call({"snr-sweep", "--dataset", "mini", "--config", (dir / "bad.json").string()}).code == 1);
  }

  TEST_CASE("snr sweep keeps clean accuracy at the infinite sentinel") {
    const Dataset data = synth_digits(40, 5);
    const std::vector<LayerSpec> arch{{784, 16, Activation::kReLU}, {16, 10, Activation::kIdentity}};
    TrainConfig tc;
    tc.max_epochs = 5;
    const MlpModel m = train(mlp_init(arch, 1), data, tc).model;
    const std::vector<double> snrs{kSnrInfinity, 0.1};
    const auto pts = cli::snr_sweep(m, data, snrs, 3);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].accuracy == doctest::Approx(accuracy(m, data)));
    CHECK(pts[1].accuracy <= pts[0].accuracy);
  }

  TEST_CASE("real lists") {
    const auto v = cli::parse_real_list("1,2.5,inf");
    REQUIRE(v.size() == 3);
    CHECK(v[1] == 2.5);
    CHECK(std::isinf(v[2]));
    CHECK_THROWS(cli::parse_real_list("1,,2"));
    CHECK_THROWS(cli::parse_real_list("x"));
  }

  TEST_CASE("sha256 of a known file") {
    const auto dir = scratch("sha");
    std::ofstream(dir / "abc.txt") << "abc";
    CHECK(cli::sha256_hex(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
