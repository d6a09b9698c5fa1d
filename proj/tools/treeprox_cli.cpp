// treeprox command-line front end: train models, export proximity matrices
// and their factors, cross-check the factorized path against the pairwise
// reference, and run the scaling benchmark.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "treeprox/memprobe.hpp"
#include "treeprox/treeprox.hpp"

TREEPROX_DEFINE_ALLOC_TRACKER();

namespace {

using namespace treeprox;

struct TrainFlags {
  std::string data;
  std::string idx_images, idx_labels;
  std::string label_column;
  idx trees = 100;
  idx max_depth = 0;
  idx min_leaf = 1;
  idx mtry = 0;
  bool no_bootstrap = false;
  std::string criterion = "gini";
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_inputs) {
  if (with_inputs) {
    auto* data = cmd->add_option("--data", f.data, "CSV dataset (header row)");
    auto* imgs = cmd->add_option("--idx-images", f.idx_images, "IDX image file");
    auto* labs = cmd->add_option("--idx-labels", f.idx_labels, "IDX label file");
    imgs->needs(labs);
    labs->needs(imgs);
    data->excludes(imgs);
    cmd->add_option("--label-column", f.label_column,
                    "label column name (required with --data)");
  }
  cmd->add_option("--trees", f.trees, "number of trees")->capture_default_str();
  cmd->add_option("--max-depth", f.max_depth, "depth cap, 0 = unlimited")
      ->capture_default_str();
  cmd->add_option("--min-leaf", f.min_leaf, "minimum samples per leaf")
      ->capture_default_str();
  cmd->add_option("--mtry", f.mtry, "features tried per split, 0 = auto")
      ->capture_default_str();
  cmd->add_flag("--no-bootstrap", f.no_bootstrap, "train each tree on the full data");
  cmd->add_option("--criterion", f.criterion, "split criterion: gini | variance")
      ->check(CLI::IsMember({"gini", "variance"}))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "training seed")->capture_default_str();
  cmd->add_option("--threads", f.threads, "worker threads, 0 = hardware")
      ->capture_default_str();
}

Dataset load_train_data(const TrainFlags& f) {
  if (!f.data.empty()) {
    if (f.label_column.empty())
      throw ConfigError("--label-column is required when training from CSV");
    return load_csv(f.data, f.label_column);
  }
  if (!f.idx_images.empty()) return load_idx(f.idx_images, f.idx_labels);
  throw ConfigError("no input: pass --data or --idx-images/--idx-labels");
}

TrainConfig to_train_config(const TrainFlags& f) {
  TrainConfig cfg;
  cfg.n_trees = f.trees;
  cfg.max_depth = f.max_depth;
  cfg.min_samples_leaf = f.min_leaf;
  cfg.mtry = f.mtry;
  cfg.criterion = (f.criterion == "gini") ? Criterion::gini : Criterion::variance;
  cfg.bootstrap = !f.no_bootstrap;
  cfg.seed = f.seed;
  return cfg;
}

void warn_never_oob(const Ensemble& ens) {
  if (ens.bagging.bootstrap && ens.bagging.never_oob_count > 0)
    std::cerr << "warning: " << ens.bagging.never_oob_count
              << " training sample(s) never out-of-bag; their rf-gap query rows are zero\n";
}

int cmd_train(const TrainFlags& f, const std::string& out_path) {
  const Dataset ds = load_train_data(f);
  const Ensemble ens = train_forest(ds.X, ds.y, to_train_config(f), resolve_threads(f.threads));
  save_ensemble(ens, out_path);
  std::cout << "trained T=" << ens.n_trees() << " N=" << ens.n_train << " p=" << ens.n_features
            << " never_oob=" << ens.bagging.never_oob_count << "\n";
  warn_never_oob(ens);
  return 0;
}

struct ProxFlags {
  std::string model;
  std::string data;
  std::string label_column = "label";
  std::string query;
  std::string scheme = "original";
  std::string out;
  std::string q_out, w_out;
  int threads = 1;
};

Matrix load_features(const std::string& path, const std::string& label_column) {
  return load_csv(path, label_column).X;
}

void print_prox_stats(const CsrMatrix& p) {
  double min_sum = 0.0, max_sum = 0.0, total = 0.0;
  for (idx i = 0; i < p.n_rows; ++i) {
    double s = 0.0;
    for (idx e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) s += p.values[e];
    if (i == 0 || s < min_sum) min_sum = s;
    if (i == 0 || s > max_sum) max_sum = s;
    total += s;
  }
  const double cells = static_cast<double>(p.n_rows) * static_cast<double>(p.n_cols);
  std::cout << "P " << p.n_rows << "x" << p.n_cols << " nnz=" << p.nnz()
            << " density=" << format_double(cells > 0 ? p.nnz() / cells : 0.0)
            << " row_sum[min=" << format_double(min_sum) << " mean="
            << format_double(p.n_rows > 0 ? total / static_cast<double>(p.n_rows) : 0.0)
            << " max=" << format_double(max_sum) << "]\n";
}

int cmd_prox(const ProxFlags& f) {
  const Ensemble ens = load_ensemble(f.model);
  const Matrix X = load_features(f.data, f.label_column);
  const Scheme scheme = parse_scheme(f.scheme);
  const int threads = resolve_threads(f.threads);
  warn_never_oob(ens);

  CsrMatrix p;
  if (f.query.empty()) {
    p = proximity_sparse(ens, X, scheme, threads);
  } else {
    const Matrix Xq = load_features(f.query, f.label_column);
    p = proximity_query_rows(ens, X, Xq, scheme, threads);
  }
  write_matrix_market_file(f.out, p);
  print_prox_stats(p);
  return 0;
}

int cmd_export(const ProxFlags& f) {
  const Ensemble ens = load_ensemble(f.model);
  const Matrix X = load_features(f.data, f.label_column);
  const Scheme scheme = parse_scheme(f.scheme);
  const int threads = resolve_threads(f.threads);
  warn_never_oob(ens);

  const SchemeContext ctx = SchemeContext::build(ens, X, scheme, threads);
  const ProximityFactors factors = build_factors(ens, ctx.train_assign, ctx.weights());
  if (!f.q_out.empty()) write_matrix_market_file(f.q_out, factors.query_factor);
  if (!f.w_out.empty()) write_matrix_market_file(f.w_out, factors.reference_factor);
  std::cout << "Q nnz=" << factors.query_factor.nnz()
            << " W nnz=" << factors.reference_factor.nnz()
            << " columns=" << factors.map.total_leaves << "\n";
  if (!f.out.empty()) {
    const CsrMatrix p =
        spgemm_transposed(factors.query_factor, factors.reference_factor, threads);
    write_matrix_market_file(f.out, p);
    print_prox_stats(p);
  }
  return 0;
}

struct OracleFlags {
  std::string model;
  std::string data;
  std::string label_column = "label";
  std::string scheme = "original";
  double tolerance = 1e-12;
  idx guard = kNaiveOracleGuard;
  int threads = 1;
};

int cmd_oracle_check(const OracleFlags& f) {
  if (f.tolerance < 1e-15)
    throw ConfigError("tolerance below 1e-15 is not supported: the two paths sum "
                      "floating-point products and bit-exact equality is not contractual");
  // The model is the object under suspicion here, so load it with routing
  // checks only and let the numeric comparison judge the rest (a fully
  // validated model takes the identical path).
  const Ensemble ens = load_ensemble(f.model, ModelValidation::routing_only);
  const Matrix X = load_features(f.data, f.label_column);
  const Scheme scheme = parse_scheme(f.scheme);
  const int threads = resolve_threads(f.threads);
  check(X.rows <= f.guard, "oracle-check: N exceeds the oracle guard");
  warn_never_oob(ens);

  const SchemeContext ctx = SchemeContext::build(ens, X, scheme, threads);
  const SchemeWeights weights = ctx.weights();
  const ProximityFactors factors =
      build_factors(ens, ctx.train_assign, weights, audit_leaf_map(ens));
  const CsrMatrix p =
      spgemm_transposed(factors.query_factor, factors.reference_factor, threads);

  const idx n = X.rows;
  const NaiveReferenceTable ref = NaiveReferenceTable::build(weights, n);
  std::vector<double> dense_row(static_cast<std::size_t>(n), 0.0);
  std::vector<double> naive_row(static_cast<std::size_t>(n));
  std::vector<double> q_row;
  double max_diff = 0.0;
  idx arg_i = 0, arg_j = 0;
  for (idx i = 0; i < n; ++i) {
    proximity_naive_row(ctx.train_assign, i, ctx.train_assign, weights, ref, q_row,
                        naive_row.data());
    for (idx e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e)
      dense_row[p.col_idx[e]] = p.values[e];
    for (idx j = 0; j < n; ++j) {
      const double d = std::abs(dense_row[j] - naive_row[j]);
      if (d > max_diff) {
        max_diff = d;
        arg_i = i;
        arg_j = j;
      }
    }
    for (idx e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) dense_row[p.col_idx[e]] = 0.0;
  }

  std::cout << "max|P_sparse - P_naive| = " << format_double(max_diff) << " at (" << arg_i
            << "," << arg_j << ") tolerance=" << format_double(f.tolerance) << "\n";
  if (max_diff <= f.tolerance) {
    std::cout << "PASS\n";
    return 0;
  }
  std::cout << "FAIL\n";
  return 1;
}

struct BenchFlags {
  TrainFlags train;  // synthetic data: only the hyperparameter flags are used
  std::vector<idx> sizes{2000, 4000, 8000, 16000, 32000};
  idx trials = 3;
  std::vector<std::string> schemes{"original", "rf-gap"};
  std::vector<std::string> methods{"sparse", "naive"};
  idx guard = 40'000;
  bool no_warmup = false;
  idx blob_classes = 2;
  idx blob_features = 2;
  double blob_noise = 0.25;
  std::string csv = "bench.csv";
  std::string summary = "bench_summary.json";
};

int cmd_bench(const BenchFlags& f) {
  BenchConfig cfg;
  cfg.sizes = f.sizes;
  cfg.trials = f.trials;
  cfg.schemes.clear();
  for (const std::string& s : f.schemes) cfg.schemes.push_back(parse_scheme(s));
  cfg.methods.clear();
  for (const std::string& m : f.methods) {
    if (m == "sparse")
      cfg.methods.push_back(BenchMethod::sparse);
    else if (m == "naive")
      cfg.methods.push_back(BenchMethod::naive);
    else
      throw ConfigError("unknown method: " + m + " (expected sparse|naive)");
  }
  cfg.train = to_train_config(f.train);
  cfg.blobs.n_classes = f.blob_classes;
  cfg.blobs.n_features = f.blob_features;
  cfg.blobs.label_noise = f.blob_noise;
  cfg.naive_guard = f.guard;
  cfg.warmup = !f.no_warmup;
  cfg.threads = resolve_threads(f.train.threads);
  cfg.seed = f.train.seed;
  cfg.log = [](const std::string& line) { std::cerr << line << "\n"; };

  const ScalingResult result = run_scaling(cfg);
  emit_report(result, cfg, f.csv, f.summary);

  for (const CurveFit& cf : fit_curves(result.runs))
    if (cf.metric == "wall_seconds")
      std::cout << bench_method_name(cf.method) << " " << scheme_name(cf.scheme)
                << " time exponent m=" << format_double(cf.fit.exponent) << "\n";
  std::cout << "wrote " << f.csv << " and " << f.summary << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree-ensemble proximities via the sparse factorization P = QW^T"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  std::string train_out = "model.json";
  CLI::App* train_cmd = app.add_subcommand("train", "train a bagged tree ensemble");
  add_train_flags(train_cmd, train_flags, true);
  train_cmd->add_option("--out", train_out, "output model path")->capture_default_str();

  ProxFlags prox_flags;
  CLI::App* prox_cmd =
      app.add_subcommand("prox", "compute a proximity matrix from a trained model");
  prox_cmd->add_option("--model", prox_flags.model, "model.json path")->required();
  prox_cmd->add_option("--data", prox_flags.data, "training CSV (defines reference rows)")
      ->required();
  prox_cmd->add_option("--label-column", prox_flags.label_column, "label column name")
      ->capture_default_str();
  prox_cmd->add_option("--query", prox_flags.query, "optional query CSV (out-of-sample rows)");
  prox_cmd->add_option("--scheme", prox_flags.scheme, "original | rf-gap | gbt")
      ->capture_default_str();
  prox_cmd->add_option("--out", prox_flags.out, "output .mtx path")->required();
  prox_cmd->add_option("--threads", prox_flags.threads, "worker threads, 0 = hardware")
      ->capture_default_str();

  ProxFlags export_flags;
  CLI::App* export_cmd =
      app.add_subcommand("export", "write the sparse factors Q and W (and optionally P)");
  export_cmd->add_option("--model", export_flags.model, "model.json path")->required();
  export_cmd->add_option("--data", export_flags.data, "training CSV")->required();
  export_cmd->add_option("--label-column", export_flags.label_column, "label column name")
      ->capture_default_str();
  export_cmd->add_option("--scheme", export_flags.scheme, "original | rf-gap | gbt")
      ->capture_default_str();
  export_cmd->add_option("--q-out", export_flags.q_out, "output .mtx for Q");
  export_cmd->add_option("--w-out", export_flags.w_out, "output .mtx for W");
  export_cmd->add_option("--p-out", export_flags.out, "optional output .mtx for P");
  export_cmd->add_option("--threads", export_flags.threads, "worker threads, 0 = hardware")
      ->capture_default_str();

  OracleFlags oracle_flags;
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle-check", "compare factorized and pairwise proximities entrywise");
  oracle_cmd->add_option("--model", oracle_flags.model, "model.json path")->required();
  oracle_cmd->add_option("--data", oracle_flags.data, "training CSV")->required();
  oracle_cmd->add_option("--label-column", oracle_flags.label_column, "label column name")
      ->capture_default_str();
  oracle_cmd->add_option("--scheme", oracle_flags.scheme, "original | rf-gap | gbt")
      ->capture_default_str();
  oracle_cmd->add_option("--tolerance", oracle_flags.tolerance, "max allowed |diff|, >= 1e-15")
      ->capture_default_str();
  oracle_cmd->add_option("--guard", oracle_flags.guard, "refuse N above this")
      ->capture_default_str();
  oracle_cmd->add_option("--threads", oracle_flags.threads, "worker threads, 0 = hardware")
      ->capture_default_str();

  BenchFlags bench_flags;
  bench_flags.train.min_leaf = 4;  // bench default: bounded leaves keep P's rows sparse
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "scaling benchmark on synthetic blobs (sparse vs naive)");
  add_train_flags(bench_cmd, bench_flags.train, false);
  bench_cmd->add_option("--sizes", bench_flags.sizes, "training-set sizes")
      ->capture_default_str();
  bench_cmd->add_option("--trials", bench_flags.trials, "timed trials per configuration")
      ->capture_default_str();
  bench_cmd->add_option("--schemes", bench_flags.schemes, "schemes to benchmark")
      ->capture_default_str();
  bench_cmd->add_option("--methods", bench_flags.methods, "sparse and/or naive")
      ->capture_default_str();
  bench_cmd->add_option("--guard", bench_flags.guard, "skip naive runs above this N")
      ->capture_default_str();
  bench_cmd->add_flag("--no-warmup", bench_flags.no_warmup, "skip the untimed warm-up runs");
  bench_cmd->add_option("--blob-classes", bench_flags.blob_classes, "synthetic class count")
      ->capture_default_str();
  bench_cmd->add_option("--blob-features", bench_flags.blob_features, "synthetic feature count")
      ->capture_default_str();
  bench_cmd->add_option("--blob-noise", bench_flags.blob_noise, "label noise fraction")
      ->capture_default_str();
  bench_cmd->add_option("--csv", bench_flags.csv, "results CSV path")->capture_default_str();
  bench_cmd->add_option("--summary", bench_flags.summary, "summary JSON path")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags, train_out);
    if (prox_cmd->parsed()) return cmd_prox(prox_flags);
    if (export_cmd->parsed()) return cmd_export(export_flags);
    if (oracle_cmd->parsed()) return cmd_oracle_check(oracle_flags);
    if (bench_cmd->parsed()) return cmd_bench(bench_flags);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
