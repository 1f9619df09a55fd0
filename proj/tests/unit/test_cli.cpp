#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "instances.hpp"
#include "nudge/cli.hpp"
#include "nudge/io.hpp"
#include "temp_dir.hpp"

using namespace nudge;
using nudge::testing::TempDir;
using Json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "nudge");
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json report_without_runtime(const std::filesystem::path& p) {
  Json j = Json::parse(slurp(p));
  j.erase("runtime");
  return j;
}

// The two-record magnitude example, written to disk.
struct ExampleFiles {
  TempDir dir;
  ExampleFiles(DType dtype = DType::Float64) {
    write_embedding_file(dir / "data.emb", EmbeddingMatrix::from_rows({{1, 0}, {0, 1}}), dtype);
    write_embedding_file(dir / "q.emb", EmbeddingMatrix::from_rows({{0, 1}}), dtype);
    write_label_file(dir / "q.labels", LabelSet{{0, 0}});
  }
  std::vector<std::string> finetune(const std::string& method) const {
    return {"finetune",
            "--embeddings", (dir / "data.emb").string(),
            "--train-queries", (dir / "q.emb").string(),
            "--train-labels", (dir / "q.labels").string(),
            "--val-queries", (dir / "q.emb").string(),
            "--val-labels", (dir / "q.labels").string(),
            "--method", method,
            "--out", (dir / ("out-" + method + ".emb")).string(),
            "--report", (dir / ("report-" + method + ".json")).string()};
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("finetune m on the two-record example") {
    const ExampleFiles ex;
    const auto r = run(ex.finetune("m"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const Json report = Json::parse(slurp(ex.dir / "report-m.json"));
    CHECK(report["method"] == "m");
    CHECK(report["val_correct_before"] == 0);
    CHECK(report["val_correct_after"] == 1);
    CHECK(report["gamma_star"].get<double>() == doctest::Approx(2.0));
    CHECK(report["n"] == 2);
    CHECK(report["d"] == 2);
    CHECK(report["n_T"] == 1);
    CHECK(report["n_V"] == 1);
    CHECK(report["runtime"]["timings_ms"].contains("select_gamma"));
    CHECK(report["config"]["dtype"] == "f64");
    const auto out = read_embedding_file(ex.dir / "out-m.emb");
    CHECK(out.matrix == EmbeddingMatrix::from_rows({{1, 2}, {0, 1}}));
  }

  TEST_CASE("every method runs and never regresses") {
    const ExampleFiles ex;
    for (std::string method : {"m", "n", "n-exact", "im", "in"}) {
      auto args = ex.finetune(method);
      if (method == "im" || method == "in") {
        args.insert(args.end(), {"--alpha", "0.5", "--iters", "4", "--checkpoint-every", "2"});
      }
      const auto r = run(args);
      REQUIRE_MESSAGE(r.code == 0, r.err);
      const Json report = Json::parse(slurp(ex.dir / ("report-" + method + ".json")));
      CHECK(report["val_correct_after"].get<int>() >= report["val_correct_before"].get<int>());
      CHECK(report["method"] == method);
    }
  }

  TEST_CASE("float32 inputs produce float32 outputs") {
    const ExampleFiles ex(DType::Float32);
    const auto r = run(ex.finetune("n"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(read_embedding_file(ex.dir / "out-n.emb").dtype == DType::Float32);
  }

  TEST_CASE("missing iterative flags are named") {
    const ExampleFiles ex;
    const auto no_alpha = run(ex.finetune("im"));
    CHECK(no_alpha.code != 0);
    CHECK(no_alpha.err.find("--alpha") != std::string::npos);
    auto args = ex.finetune("in");
    args.insert(args.end(), {"--alpha", "0.1"});
    const auto no_iters = run(args);
    CHECK(no_iters.code != 0);
    CHECK(no_iters.err.find("--iters") != std::string::npos);
  }

  TEST_CASE("bad flags are rejected with one line") {
    const ExampleFiles ex;
    const auto bad_method = run(ex.finetune("q"));
    CHECK(bad_method.code != 0);
    CHECK(bad_method.err.find("--method") != std::string::npos);
    auto args = ex.finetune("n");
    args.insert(args.end(), {"--grid-points", "1"});
    const auto bad_grid = run(args);
    CHECK(bad_grid.code != 0);
    CHECK(bad_grid.err.find("--grid-points") != std::string::npos);
    const auto missing = run({"finetune", "--method", "m"});
    CHECK(missing.code != 0);
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);
    CHECK(run({}).code != 0);
  }

  TEST_CASE("input errors become nonzero exits") {
    const ExampleFiles ex;
    auto args = ex.finetune("m");
    args[2] = (ex.dir / "missing.emb").string();
    const auto r = run(args);
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error: ", 0) == 0);
  }

  TEST_CASE("eval reports metrics") {
    TempDir dir;
    std::vector<double> values;
    for (int j = 0; j < 10; ++j) {
      values.push_back(10.0 - j);
      values.push_back(0.0);
    }
    write_embedding_file(dir / "data.emb", EmbeddingMatrix(10, 2, values), DType::Float64);
    write_embedding_file(dir / "q.emb", EmbeddingMatrix::from_rows({{1, 0}}), DType::Float64);
    write_label_file(dir / "q.labels", LabelSet{{0, 0}});
    const std::vector<std::string> base{"eval", "--embeddings", (dir / "data.emb").string(),
                                        "--queries", (dir / "q.emb").string(),
                                        "--labels", (dir / "q.labels").string(), "--k", "10"};
    const auto r = run(base);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const Json j = Json::parse(r.out);
    CHECK(j["ndcg_at_k"].get<double>() == 1.0);
    CHECK(j["recall_at_k"].get<double>() == 1.0);
    CHECK(j["recall_denominator"] == "min(k, relevant)");

    auto only_ndcg = base;
    only_ndcg.insert(only_ndcg.end(), {"--metrics", "ndcg"});
    const Json n = Json::parse(run(only_ndcg).out);
    CHECK(n.contains("ndcg_at_k"));
    CHECK_FALSE(n.contains("recall_at_k"));

    auto bad = base;
    bad.insert(bad.end(), {"--metrics", "map"});
    const auto b = run(bad);
    CHECK(b.code != 0);
    CHECK(b.err.find("--metrics") != std::string::npos);

    auto big_k = base;
    big_k[8] = "11";
    CHECK(run(big_k).code != 0);
  }

  TEST_CASE("split and normalize commands") {
    TempDir dir;
    nudge::testing::Rng rng(131);
    write_embedding_file(dir / "q.emb", nudge::testing::random_matrix(rng, 10, 3, false),
                         DType::Float32);
    std::vector<LabelEntry> entries;
    for (std::size_t i = 0; i < 10; ++i) entries.push_back({i, i % 4, 1.0});
    write_label_file(dir / "q.labels", LabelSet(entries));
    const auto prefix = (dir / "part").string();
    const auto r = run({"split", "--queries", (dir / "q.emb").string(), "--labels",
                        (dir / "q.labels").string(), "--fractions", "0.7,0.1,0.2", "--seed", "42",
                        "--out-prefix", prefix});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(read_embedding_file(prefix + ".train.emb").matrix.rows() == 7);
    CHECK(read_embedding_file(prefix + ".val.emb").matrix.rows() == 1);
    CHECK(read_embedding_file(prefix + ".test.emb").dtype == DType::Float32);
    CHECK(read_label_file(prefix + ".test.labels").size() == 2);

    const auto bad = run({"split", "--queries", (dir / "q.emb").string(), "--labels",
                          (dir / "q.labels").string(), "--fractions", "0.7,0.6", "--seed", "1",
                          "--out-prefix", prefix});
    CHECK(bad.code != 0);
    CHECK(bad.err.find("--fractions") != std::string::npos);

    const auto n = run({"normalize", "--in", (dir / "q.emb").string(), "--out",
                        (dir / "n.emb").string()});
    REQUIRE_MESSAGE(n.code == 0, n.err);
    const auto normalized = read_embedding_file(dir / "n.emb");
    CHECK(normalized.dtype == DType::Float32);
    CHECK(normalized.matrix.is_normalized(1e-6));
  }

  TEST_CASE("thread count does not change outputs") {
    TempDir dir;
    nudge::testing::Rng rng(137);
    nudge::testing::RandomShape shape{40, 6, 60, 30, 0, 0.8, true};
    const auto inst = nudge::testing::random_instance(rng, shape);
    write_embedding_file(dir / "data.emb", inst.data, DType::Float64);
    write_embedding_file(dir / "tq.emb", inst.train_queries, DType::Float64);
    write_label_file(dir / "tq.labels", inst.train_labels);
    write_embedding_file(dir / "vq.emb", inst.val_queries, DType::Float64);
    write_label_file(dir / "vq.labels", inst.val_labels);
    for (std::string method : {"m", "n", "n-exact", "im", "in"}) {
      std::string outputs[2];
      Json reports[2];
      for (int t = 0; t < 2; ++t) {
        const std::string tag = method + "-" + std::to_string(t);
        std::vector<std::string> args{
            "--threads", t == 0 ? "1" : "8", "finetune",
            "--embeddings", (dir / "data.emb").string(),
            "--train-queries", (dir / "tq.emb").string(),
            "--train-labels", (dir / "tq.labels").string(),
            "--val-queries", (dir / "vq.emb").string(),
            "--val-labels", (dir / "vq.labels").string(),
            "--method", method,
            "--out", (dir / (tag + ".emb")).string(),
            "--report", (dir / (tag + ".json")).string(),
            "--alpha", "0.05", "--iters", "20", "--checkpoint-every", "5"};
        const auto r = run(args);
        REQUIRE_MESSAGE(r.code == 0, r.err);
        outputs[t] = slurp(dir / (tag + ".emb"));
        reports[t] = report_without_runtime(dir / (tag + ".json"));
        CHECK(Json::parse(slurp(dir / (tag + ".json")))["runtime"]["threads"] == (t == 0 ? 1 : 8));
      }
      CHECK(outputs[0] == outputs[1]);
      CHECK(reports[0] == reports[1]);
    }
  }

  TEST_CASE("thread count falls back to the environment") {
    const ExampleFiles ex;
    ::setenv("NUDGE_THREADS", "3", 1);
    const auto r = run(ex.finetune("m"));
    ::unsetenv("NUDGE_THREADS");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(Json::parse(slurp(ex.dir / "report-m.json"))["runtime"]["threads"] == 3);
  }
}
