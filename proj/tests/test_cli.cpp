#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepframe/cli.hpp"
#include "deepframe/io.hpp"

using namespace deepframe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "deepframe");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("deepframe_cli_" + tag)) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name, const std::string& text) const {
        const auto p = (path_ / name).string();
        write_text_file(p, text);
        return p;
    }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

const char* kEtf = R"({"name": "etf", "input_dim": 2, "layers": [{"kind": "fully_connected", "width": 3}], "connectivity": "chain"})";
const char* kChain = R"({"name": "small", "input_dim": 3, "layers": [{"kind": "fully_connected", "width": 5},
    {"kind": "fully_connected", "width": 4}], "connectivity": "chain"})";
const char* kBad = R"({"name": "bad", "input_dim": 3, "layers": [{"kind": "fully_connected", "width": 0}], "connectivity": "chain"})";
const char* kConv = R"({"name": "conv1d", "input_dim": 16, "layers": [{"kind": "convolutional", "width": 5,
    "channels": 2, "spatial": 8, "filter": 3, "dims": 1}], "connectivity": "chain"})";

json without_timing(const std::string& text) {
    auto doc = json::parse(text);
    doc.erase("timing");
    return doc;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("validate") {
    TempDir dir("validate");
    const auto good = dir.file("etf.json", kEtf);
    auto r = run({"validate", good});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("OK") == 0);
    CHECK(r.out.find("6 params") != std::string::npos);

    const auto bad = dir.file("bad.json", kBad);
    r = run({"validate", bad});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("/layers/0/width") != std::string::npos);

    dir.file("chain.json", kChain);
    r = run({"validate", dir.str()});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("INVALID") != std::string::npos);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
}

TEST_CASE("bundled example specs validate") {
    CHECK(run({"validate", DEEPFRAME_SPEC_DIR}).code == kExitOk);
}

TEST_CASE("analyze") {
    TempDir dir("analyze");
    auto r = run({"analyze", dir.file("conv1d.json", kConv), "--seed", "3"});
    REQUIRE(r.code == kExitOk);
    auto doc = json::parse(r.out);
    CHECK(doc["tool"] == "deepframe");
    CHECK(doc["command"] == "analyze");
    CHECK(doc["seed"] == 3);
    CHECK(doc["report"]["rows"] == 16);
    CHECK(doc["report"]["cols"] == 40);

    const auto frame_path = dir.str() + "/frame.bin";
    r = run({"analyze", dir.file("etf.json", kEtf), "--export-frame", frame_path});
    REQUIRE(r.code == kExitOk);
    const auto m = read_matrix(frame_path);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);

    r = run({"analyze", dir.file("etf.json", kEtf), "--format", "csv"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("mutual_coherence") != std::string::npos);

    CHECK(run({"analyze", dir.str() + "/missing.json"}).code == kExitInput);
}

TEST_CASE("minimize then analyze the minimizer") {
    TempDir dir("minimize");
    const auto spec = dir.file("etf.json", kEtf);
    const auto out = dir.str() + "/min.json";
    auto r = run({"minimize", spec, "--seed", "1", "--restarts", "2", "--out", out});
    REQUIRE(r.code == kExitOk);
    const auto doc = json::parse(read_text_file(out));
    CHECK(doc["result"]["objective"].get<double>() == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(doc["result"]["mutual_coherence"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));

    const auto params = dir.file("params.json", doc["result"]["params"].dump());
    r = run({"analyze", spec, "--params", params});
    REQUIRE(r.code == kExitOk);
    CHECK(json::parse(r.out)["report"]["mutual_coherence"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));

    r = run({"minimize", spec, "--restarts", "1", "--format", "csv"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("iteration,objective,mutual_coherence") == 0);

    CHECK(run({"minimize", spec, "--restarts", "0"}).code == kExitInput);
}

TEST_CASE("reruns are reproducible apart from timing") {
    TempDir dir("repro");
    const auto spec = dir.file("chain.json", kChain);
    for (const char* cmd : {"analyze", "minimize", "infer"}) {
        std::vector<std::string> args{cmd, spec, "--seed", "42"};
        if (std::string(cmd) == "minimize") args.insert(args.end(), {"--restarts", "2"});
        const auto a = run(args), b = run(args);
        REQUIRE(a.code == kExitOk);
        CHECK(without_timing(a.out) == without_timing(b.out));
    }
}

TEST_CASE("infer") {
    TempDir dir("infer");
    const auto spec = dir.file("chain.json", kChain);
    const auto inputs = dir.file("x.csv", "1,0.5,-0.2\n0.3,0.1,2\n");
    auto ff = run({"infer", spec, "--inputs", inputs, "--method", "feed_forward"});
    auto bcd = run({"infer", spec, "--inputs", inputs, "--method", "bcd", "--iters", "200", "--lambda", "0.05"});
    REQUIRE(ff.code == kExitOk);
    REQUIRE(bcd.code == kExitOk);
    const auto f = json::parse(ff.out), b = json::parse(bcd.out);
    REQUIRE(f["results"].size() == 2);
    CHECK(b["results"][0]["method"] == "bcd");
    CHECK(b["results"][0]["trajectory"].size() == 201);
    CHECK(b["results"][0]["lambda"][0].get<double>() == 0.05);

    auto bcd_same = run({"infer", spec, "--inputs", inputs, "--method", "bcd"});
    const auto s = json::parse(bcd_same.out);
    for (int i = 0; i < 2; ++i)
        CHECK(s["results"][i]["objective"].get<double>() <= f["results"][i]["objective"].get<double>());

    CHECK(run({"infer", spec, "--method", "admm"}).code == kExitInput);
    CHECK(run({"infer", spec, "--inputs", dir.file("wrong.csv", "1,2\n")}).code == kExitInput);
    auto lbp = run({"infer", spec, "--method", "layered_bp", "--format", "csv"});
    CHECK(lbp.code == kExitOk);
    CHECK(lbp.out.find("input,method,objective,cycles") == 0);
}

TEST_CASE("rank") {
    TempDir dir("rank");
    CHECK(run({"rank", dir.str()}).code == kExitInput);
    dir.file("chain.json", R"({"name": "chain", "input_dim": 3, "layers": [{"kind": "fully_connected", "width": 6},
        {"kind": "fully_connected", "width": 6}, {"kind": "fully_connected", "width": 6}], "connectivity": "chain"})");
    dir.file("dense.json", R"({"name": "dense", "input_dim": 3, "layers": [{"kind": "fully_connected", "width": 5},
        {"kind": "fully_connected", "width": 5}, {"kind": "fully_connected", "width": 5}],
        "connectivity": "dense"})");
    auto r = run({"rank", dir.str(), "--restarts", "2", "--seed", "1"});
    REQUIRE(r.code == kExitOk);
    const auto doc = json::parse(r.out);
    CHECK(doc["ranking"]["ranked"][0]["name"] == "dense");
    CHECK(doc["ranking"]["ranked"][1]["name"] == "chain");

    r = run({"rank", dir.str(), "--restarts", "1", "--format", "csv", "--max-params", "89"});
    CHECK(r.code == kExitInput);
    r = run({"rank", dir.str(), "--restarts", "1", "--format", "csv", "--max-params", "90"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("name,params,score,mu") == 0);
}

TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitInput);
    CHECK(run({"frobnicate"}).code == kExitInput);
    CHECK(run({"analyze", "a.json", "--format", "xml"}).code == kExitInput);
    CHECK(run({"--help"}).code == kExitOk);
}

}  // TEST_SUITE
