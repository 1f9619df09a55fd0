#include "nudge/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "nudge/error.hpp"
#include "nudge/eval.hpp"
#include "nudge/io.hpp"
#include "nudge/iterative.hpp"
#include "nudge/nudge_m.hpp"
#include "nudge/nudge_n.hpp"
#include "nudge/parallel.hpp"
#include "nudge/split.hpp"

namespace nudge {

namespace {

using Json = nlohmann::ordered_json;

const char* dtype_name(DType dtype) { return dtype == DType::Float32 ? "f32" : "f64"; }

struct FinetuneArgs {
  std::string embeddings;
  std::string train_queries;
  std::string train_labels;
  std::string val_queries;
  std::string val_labels;
  std::string method;
  std::string out;
  std::string report;
  std::size_t grid_points = 1024;
  std::optional<double> alpha;
  std::optional<std::size_t> iters;
  std::size_t checkpoint_every = 1;
  bool weighted_labels = false;
};

struct EvalArgs {
  std::string embeddings;
  std::string queries;
  std::string labels;
  std::size_t k = 10;
  std::string metrics = "recall,ndcg";
};

struct SplitArgs {
  std::string queries;
  std::string labels;
  std::string fractions;
  std::uint64_t seed = 0;
  std::string out_prefix;
};

struct NormalizeArgs {
  std::string in;
  std::string out;
};

LabelSet load_labels(const std::string& path, const EmbeddingMatrix& queries,
                     const EmbeddingMatrix& data) {
  return read_label_file(path, {queries.rows(), data.rows()});
}

Json report_json(const FineTuneReport& r, DType dtype) {
  Json j;
  j["method"] = r.method;
  j["gamma_star"] = r.gamma_star;
  j["val_correct_before"] = r.val_correct_before;
  j["val_correct_after"] = r.val_correct_after;
  j["predicted_correct"] = r.predicted_correct;
  j["n"] = r.n;
  j["d"] = r.d;
  j["n_T"] = r.n_train;
  j["n_V"] = r.n_val;
  j["input_renormalized"] = r.input_renormalized;
  j["fell_back_to_zero"] = r.fell_back_to_zero;
  if (r.best_step) j["best_step"] = *r.best_step;

  Json config;
  config["method"] = r.method;
  config["weighted_labels"] = r.weighted_labels;
  config["dtype"] = dtype_name(dtype);
  if (r.grid_points) config["grid_points"] = *r.grid_points;
  if (r.alpha) config["alpha"] = *r.alpha;
  if (r.iters) config["iters"] = *r.iters;
  if (r.checkpoint_every) config["checkpoint_every"] = *r.checkpoint_every;
  j["config"] = std::move(config);

  // Everything under "runtime" is excluded from the determinism contract.
  Json timings = Json::object();
  double total = 0.0;
  for (const auto& [phase, ms] : r.timings_ms) {
    timings[phase] = ms;
    total += ms;
  }
  timings["total"] = total;
  j["runtime"] = {{"threads", thread_count()}, {"timings_ms", std::move(timings)}};
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path);
}

void run_finetune(const FinetuneArgs& a, std::ostream& out) {
  const bool iterative = a.method == "im" || a.method == "in";
  if (iterative) {
    if (!a.alpha) throw InvalidArgument("--alpha is required for --method " + a.method);
    if (!a.iters) throw InvalidArgument("--iters is required for --method " + a.method);
  }

  const EmbeddingFile emb = read_embedding_file(a.embeddings);
  const EmbeddingMatrix& data = emb.matrix;
  const EmbeddingMatrix train_q = read_embedding_file(a.train_queries).matrix;
  const EmbeddingMatrix val_q = read_embedding_file(a.val_queries).matrix;
  const LabelSet train_labels = load_labels(a.train_labels, train_q, data);
  const LabelSet val_labels = load_labels(a.val_labels, val_q, data);

  FineTuneResult result;
  if (a.method == "m") {
    result = nudge_m(data, train_q, train_labels, val_q, val_labels, {a.weighted_labels});
  } else if (a.method == "n" || a.method == "n-exact") {
    NudgeNOptions options{a.weighted_labels, a.grid_points};
    result = a.method == "n"
                 ? nudge_n_grid(data, train_q, train_labels, val_q, val_labels, options)
                 : nudge_n_exact(data, train_q, train_labels, val_q, val_labels, options);
  } else {
    if (train_q.dim() != data.dim()) {
      throw InvalidArgument("dimension mismatch: --train-queries has d=" +
                            std::to_string(train_q.dim()) + ", --embeddings has d=" +
                            std::to_string(data.dim()));
    }
    const AggregateMatrix g =
        compute_aggregates(train_q, train_labels, data.rows(), a.weighted_labels);
    IterativeConfig config{*a.alpha, *a.iters, a.checkpoint_every, a.method == "in"};
    result = a.method == "im" ? nudge_im(data, g, val_q, val_labels, config)
                              : nudge_in(data, g, val_q, val_labels, config);
    result.report.n_train = train_q.rows();
    result.report.weighted_labels = a.weighted_labels;
  }

  write_embedding_file(a.out, result.data, emb.dtype);
  const Json report = report_json(result.report, emb.dtype);
  write_text(a.report, report.dump(2) + "\n");
  out << "method=" << result.report.method << " gamma_star=" << result.report.gamma_star
      << " val_correct_before=" << result.report.val_correct_before
      << " val_correct_after=" << result.report.val_correct_after << "\n";
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  bool want_recall = false;
  bool want_ndcg = false;
  std::stringstream names(a.metrics);
  std::string name;
  while (std::getline(names, name, ',')) {
    if (name == "recall") {
      want_recall = true;
    } else if (name == "ndcg") {
      want_ndcg = true;
    } else {
      throw InvalidArgument("--metrics: unknown metric '" + name + "' (expected recall, ndcg)");
    }
  }
  const EmbeddingMatrix data = read_embedding_file(a.embeddings).matrix;
  const EmbeddingMatrix queries = read_embedding_file(a.queries).matrix;
  const LabelSet labels = load_labels(a.labels, queries, data);
  if (a.k < 1 || a.k > data.rows()) {
    throw InvalidArgument("--k must be between 1 and " + std::to_string(data.rows()));
  }
  const MetricReport m = metrics(queries, labels, data, a.k);

  Json j;
  j["k"] = m.k;
  j["query_count"] = m.query_count;
  if (want_recall) {
    j["recall_at_k"] = m.recall_at_k;
    j["recall_denominator"] = "min(k, relevant)";
  }
  if (want_ndcg) j["ndcg_at_k"] = m.ndcg_at_k;
  j["recall_at_1"] = m.recall_at_1;
  out << j.dump(2) << "\n";
}

void run_split(const SplitArgs& a, std::ostream& out) {
  std::vector<double> fractions;
  std::stringstream parts(a.fractions);
  std::string item;
  while (std::getline(parts, item, ',')) {
    try {
      std::size_t pos = 0;
      fractions.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("--fractions: cannot parse '" + item + "'");
    }
  }
  const EmbeddingFile qf = read_embedding_file(a.queries);
  const LabelSet labels = read_label_file(a.labels, {qf.matrix.rows(), std::nullopt});
  labels.validate(qf.matrix.rows(), std::numeric_limits<std::size_t>::max());

  std::vector<QueryPartition> result;
  try {
    result = split(qf.matrix, labels, fractions, a.seed);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("--fractions: ") + e.what());
  }
  const std::vector<std::string> names =
      result.size() == 3 ? std::vector<std::string>{"train", "val", "test"}
                         : std::vector<std::string>{};
  for (std::size_t k = 0; k < result.size(); ++k) {
    const std::string stem =
        a.out_prefix + "." + (names.empty() ? "part" + std::to_string(k) : names[k]);
    write_embedding_file(stem + ".emb", result[k].queries, qf.dtype);
    write_label_file(stem + ".labels", result[k].labels);
    out << stem << " " << result[k].queries.rows() << "\n";
  }
}

void run_normalize(const NormalizeArgs& a, std::ostream& out) {
  const EmbeddingFile f = read_embedding_file(a.in);
  write_embedding_file(a.out, normalize_rows(f.matrix), f.dtype);
  out << "normalized " << f.matrix.rows() << " rows\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-parametric fine-tuning of data embeddings for nearest-neighbour retrieval",
               args.empty() ? "nudge" : args[0]};
  app.require_subcommand(1);

  std::optional<std::size_t> threads;
  app.add_option("--threads", threads,
                 "Worker threads (0 = all cores); falls back to NUDGE_THREADS")
      ->check(CLI::NonNegativeNumber);

  FinetuneArgs ft;
  auto* finetune = app.add_subcommand("finetune", "Fine-tune data embeddings");
  finetune->fallthrough();
  finetune->add_option("--embeddings", ft.embeddings, "Data embedding file")->required();
  finetune->add_option("--train-queries", ft.train_queries, "Training query embeddings")
      ->required();
  finetune->add_option("--train-labels", ft.train_labels, "Training labels")->required();
  finetune->add_option("--val-queries", ft.val_queries, "Validation query embeddings")
      ->required();
  finetune->add_option("--val-labels", ft.val_labels, "Validation labels")->required();
  finetune->add_option("--method", ft.method, "Fine-tuning method")
      ->required()
      ->check(CLI::IsMember({"m", "n", "n-exact", "im", "in"}));
  finetune->add_option("--out", ft.out, "Output embedding file")->required();
  finetune->add_option("--report", ft.report, "Output report (JSON)")->required();
  finetune->add_option("--grid-points", ft.grid_points, "Grid size for --method n")
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
  finetune->add_option("--alpha", ft.alpha, "Step size for im/in")
      ->check(CLI::PositiveNumber);
  finetune->add_option("--iters", ft.iters, "Step count for im/in")
      ->check(CLI::PositiveNumber);
  finetune->add_option("--checkpoint-every", ft.checkpoint_every, "Validation cadence for im/in")
      ->check(CLI::PositiveNumber);
  finetune->add_flag("--weighted-labels", ft.weighted_labels,
                     "Weight training queries by relevance");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Compute retrieval metrics");
  eval->fallthrough();
  eval->add_option("--embeddings", ev.embeddings, "Data embedding file")->required();
  eval->add_option("--queries", ev.queries, "Query embeddings")->required();
  eval->add_option("--labels", ev.labels, "Query labels")->required();
  eval->add_option("--k", ev.k, "Cutoff")->required()->check(CLI::PositiveNumber);
  eval->add_option("--metrics", ev.metrics, "Comma-separated subset of recall,ndcg");

  SplitArgs sp;
  auto* splitter = app.add_subcommand("split", "Seeded train/validation/test split of queries");
  splitter->fallthrough();
  splitter->add_option("--queries", sp.queries, "Query embeddings")->required();
  splitter->add_option("--labels", sp.labels, "Query labels")->required();
  splitter->add_option("--fractions", sp.fractions, "Comma-separated fractions")->required();
  splitter->add_option("--seed", sp.seed, "Shuffle seed")->required();
  splitter->add_option("--out-prefix", sp.out_prefix, "Output path prefix")->required();

  NormalizeArgs nm;
  auto* normalize = app.add_subcommand("normalize", "Scale every row to unit length");
  normalize->fallthrough();
  normalize->add_option("--in", nm.in, "Input embedding file")->required();
  normalize->add_option("--out", nm.out, "Output embedding file")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("nudge");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  const std::size_t previous_threads = thread_count();
  try {
    if (threads) {
      set_thread_count(*threads);
    } else if (const std::size_t env = thread_count_from_env(); env > 0) {
      set_thread_count(env);
    }
    if (finetune->parsed()) {
      run_finetune(ft, out);
    } else if (eval->parsed()) {
      run_eval(ev, out);
    } else if (splitter->parsed()) {
      run_split(sp, out);
    } else if (normalize->parsed()) {
      run_normalize(nm, out);
    }
  } catch (const std::exception& e) {
    set_thread_count(previous_threads);
    err << "error: " << e.what() << "\n";
    return 1;
  }
  set_thread_count(previous_threads);
  return 0;
}

}  // namespace nudge
