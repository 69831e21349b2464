#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "elm/cli/cli.hpp"
#include "elm/cli/config.hpp"
#include "elm/cli/run.hpp"
#include "elm/common/error.hpp"
#include "support/synthetic.hpp"

using namespace elm;
using namespace elm::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "elm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("defaults build a valid configuration") {
        const auto cfg = build_config(merge_config(json::object()));
        CHECK(cfg.seed == 42);
        CHECK(cfg.training.batch_size == 4);
        CHECK(cfg.training.grad_accum == 8);
        CHECK(cfg.training.lora.rank == 16);
        CHECK(cfg.training.lora.alpha == 32.0);
        CHECK(cfg.training.adapter_hidden == 2048);
        CHECK(cfg.evaluation.n_seeds == 5);
        CHECK(cfg.cav.svm.C == 1.0);
        CHECK(cfg.oracle.api_key_env == "ORACLE_API_KEY");
    }

    TEST_CASE("unknown keys and bad values name the key") {
        try {
            merge_config(json{{"training", {{"batchsize", 2}}}});
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("training.batchsize") != std::string::npos);
        }
        try {
            build_config(merge_config(json{{"lora", {{"rank", 0}}}}));
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()) == "config key 'lora.rank' must be >= 1");
        }
        CHECK_THROWS_AS(merge_config(json{{"seed", "forty-two"}}), ValidationError);
    }

    TEST_CASE("environment interpolation and secret masking") {
        ::setenv("ELM_CFG_TEST_ENDPOINT", "http://example.invalid/v1", 1);
        const auto j = interpolate_env(json{{"oracle", {{"endpoint", "${ELM_CFG_TEST_ENDPOINT}"}}}});
        CHECK(j["oracle"]["endpoint"] == "http://example.invalid/v1");
        ::unsetenv("ELM_CFG_TEST_UNSET");
        CHECK_THROWS_AS(interpolate_env(json{{"x", "${ELM_CFG_TEST_UNSET}"}}), ValidationError);
        const auto masked = redact_secrets(json{{"oracle", {{"api_key", "sk-1"}, {"api_key_env", "ORACLE_API_KEY"}}}});
        CHECK(masked["oracle"]["api_key"] != "sk-1");
        CHECK(masked["oracle"]["api_key_env"] == "ORACLE_API_KEY");
    }

    TEST_CASE("no arguments prints usage and fails") {
        CHECK(run_args({}) == 1);
        CHECK(run_args({"no-such-command"}) == 1);
    }

    TEST_CASE("redact writes a run folder with a manifest") {
        const auto dir = testing::temp_dir("cli_redact");
        write_text(dir / "in.txt", "See NCT01234567 and ISRCTN12345.\n");
        CHECK(run_args({"--run-root", (dir / "runs").string(), "--run-id", "r1", "redact", "--in", (dir / "in.txt").string(),
                   "--out", (dir / "out.txt").string()}) == 0);
        std::ifstream in(dir / "out.txt");
        std::string line;
        std::getline(in, line);
        CHECK(line == "See [redacted] and [redacted].");
        const auto m = read_json(dir / "runs" / "r1" / "manifest.json");
        CHECK(m["status"] == "ok");
        CHECK(m["exit_code"] == 0);
        CHECK(m["command"] == "redact");
        CHECK(m["input_digests"].size() == 1);
        CHECK(fs::exists(dir / "runs" / "r1" / "config.resolved"));
        CHECK(fs::exists(dir / "runs" / "r1" / "logs" / "run.log"));
        fs::remove_all(dir);
    }

    TEST_CASE("bad config exits 1, missing inputs exit 1 with a failed manifest") {
        const auto dir = testing::temp_dir("cli_errors");
        write_text(dir / "bad.json", R"({"lora": {"rank": 0}})");
        CHECK(run_args({"--config", (dir / "bad.json").string(), "--run-root", (dir / "runs").string(), "redact", "--in",
                   "x"}) == 1);
        CHECK(run_args({"--run-root", (dir / "runs").string(), "--run-id", "miss", "ingest", "--in",
                   (dir / "nothing").string()}) == 1);
        const auto m = read_json(dir / "runs" / "miss" / "manifest.json");
        CHECK(m["status"] != "ok");
        CHECK(m["exit_code"] == 1);
        fs::remove_all(dir);
    }

    TEST_CASE("offline pipeline from raw abstracts to SC") {
        const auto dir = testing::temp_dir("cli_pipeline");
        const auto recs = testing::records_of(testing::synthetic_abstracts(24, 77, false));
        fs::create_directories(dir / "data");
        testing::write_pubmed_rct(dir / "data" / "train.txt", {recs.begin(), recs.begin() + 20});
        testing::write_pubmed_rct(dir / "data" / "test.txt", {recs.begin() + 20, recs.end()});
        write_text(dir / "cfg.json", R"({
            "run_root": ")" + (dir / "runs").string() + R"(",
            "cache_dir": ")" + (dir / "cache").string() + R"(",
            "embedding": {"kind": "hashing", "dim": 32},
            "oracle": {"kind": "rule"}, "judge": {"kind": "rule"},
            "topics": {"min_cluster_sizes": [3]},
            "training": {"batch_size": 2, "grad_accum": 1, "max_seq_len": 200, "adapter_hidden": 16},
            "lora": {"rank": 2, "alpha": 4},
            "generation": {"max_new_tokens": 16},
            "base": {"steps": 3, "d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32, "max_seq_len": 256}
        })");
        const std::string cfg = (dir / "cfg.json").string();
        const auto out = [&](const std::string& run) { return dir / "runs" / run / "outputs"; };
        REQUIRE(run_args({"--config", cfg, "--run-id", "ing", "ingest", "--in", (dir / "data").string()}) == 0);
        REQUIRE(run_args({"--config", cfg, "--run-id", "top", "fit-topics", "--records", (out("ing") / "train.jsonl").string()}) == 0);
        REQUIRE(run_args({"--config", cfg, "--run-id", "bd", "build-data", "--records", (out("ing") / "train.jsonl").string(),
                     "--topics", (out("top") / "topics.jsonl").string()}) == 0);
        CHECK(count_lines(out("bd") / "emb2abs.jsonl") == 20);
        const auto summary = read_json(out("bd") / "summary.json");
        CHECK(summary["emb2com"]["instances"] == summary["emb2dif"]["instances"]);
        REQUIRE(run_args({"--config", cfg, "--run-id", "bdt", "build-data", "--records", (out("ing") / "test.jsonl").string(),
                     "--split", "test", "--tasks", "emb2abs"}) == 0);
        REQUIRE(run_args({"--config", cfg, "--run-id", "base", "init-base", "--records", (out("ing") / "train.jsonl").string()}) == 0);
        REQUIRE(run_args({"--config", cfg, "--run-id", "tr", "train", "--data", out("bd").string(), "--base",
                     (out("base") / "base").string(), "--plan", "2P-1E", "--limit", "8"}) == 0);
        const auto ckpt = dir / "runs" / "tr" / "checkpoints" / "final";
        REQUIRE(fs::exists(ckpt / "manifest.json"));
        CHECK(fs::exists(dir / "runs" / "tr" / "loss.csv"));
        REQUIRE(run_args({"--config", cfg, "--run-id", "sc", "eval-sc", "--checkpoint", ckpt.string(), "--data",
                     (out("bdt") / "emb2abs.jsonl").string()}) == 0);
        const auto sc = read_json(out("sc") / "emb2abs_sc.json");
        CHECK(sc["n"].get<std::size_t>() + sc["failures"].size() == 4);
        REQUIRE(run_args({"--config", cfg, "--run-id", "gen", "generate", "--checkpoint", ckpt.string(), "--data",
                     (out("bdt") / "emb2abs.jsonl").string()}) == 0);
        CHECK(count_lines(out("gen") / "generations.jsonl") == 4);
        REQUIRE(run_args({"--config", cfg, "--run-id", "wr", "winrate", "--real", (out("gen") / "generations.jsonl").string(),
                     "--real-field", "target", "--generated", (out("gen") / "generations.jsonl").string(),
                     "--generated-field", "generated"}) == 0);
        fs::remove_all(dir);
    }
}
