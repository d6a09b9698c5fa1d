#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeprox/common.hpp"
#include "treeprox/datasets.hpp"
#include "treeprox/matrix_market.hpp"
#include "treeprox/memprobe.hpp"
#include "treeprox/oracle.hpp"
#include "treeprox/proximity.hpp"

namespace treeprox {

enum class BenchMethod { sparse, naive };

inline const char* bench_method_name(BenchMethod m) {
  return m == BenchMethod::sparse ? "sparse" : "naive";
}

struct BenchRun {
  BenchMethod method = BenchMethod::sparse;
  Scheme scheme = Scheme::original;
  idx n = 0;
  idx trial = 0;
  double wall_seconds = 0.0;
  std::int64_t peak_bytes = 0;
  idx nnz_p = 0;
  // recorded in the summary, not the pinned CSV schema
  idx nnz_q = 0;
  idx nnz_w = 0;
};

struct SkippedRun {
  BenchMethod method = BenchMethod::naive;
  Scheme scheme = Scheme::original;
  idx n = 0;
  std::string reason;
};

struct PowerLawFit {
  double exponent = 0.0;   // slope of the log-log regression
  double ln_coeff = 0.0;   // intercept: ln(y) = ln_coeff + exponent * ln(x)
  double r_squared = 0.0;  // goodness of the log-log line
  idx n_points = 0;
};

/// Least-squares fit of ln(y) = a + m ln(x). Inputs must be positive.
inline PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  check(x.size() == y.size(), "fit_power_law: length mismatch");
  check(x.size() >= 3, "fit_power_law: need at least three points");
  const idx n = static_cast<idx>(x.size());
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(x.size()), ly(y.size());
  for (idx i = 0; i < n; ++i) {
    check(x[i] > 0.0 && y[i] > 0.0, "fit_power_law: inputs must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (idx i = 0; i < n; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  check(sxx > 0.0, "fit_power_law: x values must not all coincide");
  PowerLawFit f;
  f.exponent = sxy / sxx;
  f.ln_coeff = my - f.exponent * mx;
  f.n_points = n;
  if (syy > 0.0) {
    double sse = 0.0;
    for (idx i = 0; i < n; ++i) {
      const double r = ly[i] - (f.ln_coeff + f.exponent * lx[i]);
      sse += r * r;
    }
    f.r_squared = 1.0 - sse / syy;
  } else {
    f.r_squared = 1.0;  // constant y: the flat line fits exactly
  }
  return f;
}

struct BenchConfig {
  std::vector<idx> sizes{2000, 4000, 8000, 16000, 32000};
  idx trials = 3;
  std::vector<Scheme> schemes{Scheme::original, Scheme::rf_gap};
  std::vector<BenchMethod> methods{BenchMethod::sparse, BenchMethod::naive};
  TrainConfig train = [] {
    TrainConfig t;
    t.n_trees = 100;
    t.min_samples_leaf = 4;
    return t;
  }();
  // Two coarse classes with heavy label noise: the noise keeps carving the
  // trees down to small leaves at every n, so proximity rows stop densifying
  // early in the size ladder and the timed window separates the two methods
  // cleanly. Few wide features keep training from dominating the small sizes.
  BlobsConfig blobs = [] {
    BlobsConfig b;
    b.n_classes = 2;
    b.n_features = 2;
    b.label_noise = 0.25;
    return b;
  }();
  idx naive_guard = 40'000;  // looser than the dense-oracle guard: rows stream
  bool warmup = true;
  int threads = 1;
  std::uint64_t seed = 0;
  std::function<void(const std::string&)> log;  // optional progress sink
};

struct EquivalenceCheck {
  Scheme scheme = Scheme::original;
  idx n = 0;
  double max_abs_diff = 0.0;
};

struct ScalingResult {
  std::vector<BenchRun> runs;
  std::vector<SkippedRun> skipped;
  std::vector<EquivalenceCheck> equivalence;
  std::string memory_metric;
  int threads = 1;
};

namespace detail {

struct TimedOutcome {
  double wall_seconds = 0.0;
  std::int64_t peak_bytes = 0;
  idx nnz_p = 0;
  idx nnz_q = 0;
  idx nnz_w = 0;
};

/// One end-to-end measured run: train, assign leaves, then either the
/// factorized product or the pairwise loop. Training sits inside the timed
/// region on both paths, mirroring the benchmark protocol this reproduces.
inline TimedOutcome timed_run(BenchMethod method, Scheme scheme, const Dataset& ds,
                              const BenchConfig& cfg, MemoryProbe& probe) {
  TimedOutcome out;
  probe.reset();
  const auto t0 = std::chrono::steady_clock::now();
  const Ensemble ens = train_forest(ds.X, ds.y, cfg.train, cfg.threads);
  const SchemeContext ctx = SchemeContext::build(ens, ds.X, scheme, cfg.threads);
  if (method == BenchMethod::sparse) {
    const ProximityFactors f = build_factors(ens, ctx.train_assign, ctx.weights());
    const CsrMatrix p = spgemm_transposed(f.query_factor, f.reference_factor, cfg.threads);
    out.nnz_p = p.nnz();
    out.nnz_q = f.query_factor.nnz();
    out.nnz_w = f.reference_factor.nnz();
  } else {
    const SchemeWeights weights = ctx.weights();
    const NaiveReferenceTable ref = NaiveReferenceTable::build(weights, ctx.train_assign.n_rows);
    const idx n = ctx.train_assign.n_rows;
    std::vector<double> row(static_cast<std::size_t>(n));
    std::vector<double> q_row;
    idx nnz = 0;
    for (idx i = 0; i < n; ++i) {
      proximity_naive_row(ctx.train_assign, i, ctx.train_assign, weights, ref, q_row,
                          row.data());
      for (idx j = 0; j < n; ++j)
        if (row[j] != 0.0) ++nnz;
    }
    out.nnz_p = nnz;
  }
  const auto t1 = std::chrono::steady_clock::now();
  out.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.peak_bytes = probe.peak_bytes();
  return out;
}

}  // namespace detail

/// The scaling suite: for each size, one shared dataset; per (method,
/// scheme) an optional untimed warm-up then `trials` timed runs, executed
/// serially. The sparse and naive paths are cross-checked once per (size
/// minimum, scheme) outside the timed region.
inline ScalingResult run_scaling(const BenchConfig& cfg) {
  check(!cfg.sizes.empty(), "run_scaling: no sizes");
  check(cfg.trials >= 1, "run_scaling: trials must be positive");
  check(!cfg.schemes.empty(), "run_scaling: no schemes");
  check(!cfg.methods.empty(), "run_scaling: no methods");
  for (idx n : cfg.sizes) check(n >= 2, "run_scaling: sizes must be at least 2");

  std::vector<idx> sizes = cfg.sizes;
  std::sort(sizes.begin(), sizes.end());
  const idx smallest = sizes.front();
  const auto log = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };

  ScalingResult result;
  MemoryProbe probe;
  result.memory_metric = probe.metric_name();
  result.threads = cfg.threads;

  for (idx n : sizes) {
    BlobsConfig blobs = cfg.blobs;
    blobs.seed = cfg.seed + static_cast<std::uint64_t>(n);  // fresh draw per size
    const Dataset ds = make_blobs(n, blobs);

    if (n == smallest) {
      // equivalence spot check, untimed
      const Ensemble ens = train_forest(ds.X, ds.y, cfg.train, cfg.threads);
      for (Scheme scheme : cfg.schemes) {
        const SchemeContext ctx = SchemeContext::build(ens, ds.X, scheme, cfg.threads);
        const SchemeWeights weights = ctx.weights();
        const ProximityFactors f = build_factors(ens, ctx.train_assign, weights);
        const CsrMatrix p = spgemm_transposed(f.query_factor, f.reference_factor,
                                              cfg.threads);
        const NaiveReferenceTable ref = NaiveReferenceTable::build(weights, n);
        std::vector<double> dense_row(static_cast<std::size_t>(n), 0.0);
        std::vector<double> naive_row(static_cast<std::size_t>(n));
        std::vector<double> q_row;
        double max_diff = 0.0;
        for (idx i = 0; i < n; ++i) {
          proximity_naive_row(ctx.train_assign, i, ctx.train_assign, weights, ref, q_row,
                              naive_row.data());
          for (idx e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e)
            dense_row[p.col_idx[e]] = p.values[e];
          for (idx j = 0; j < n; ++j) {
            const double d = std::abs(dense_row[j] - naive_row[j]);
            if (d > max_diff) max_diff = d;
          }
          for (idx e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e)
            dense_row[p.col_idx[e]] = 0.0;
        }
        result.equivalence.push_back({scheme, n, max_diff});
        log("equivalence " + std::string(scheme_name(scheme)) + " N=" + std::to_string(n) +
            " max|diff|=" + format_double(max_diff));
      }
    }

    for (BenchMethod method : cfg.methods) {
      for (Scheme scheme : cfg.schemes) {
        if (method == BenchMethod::naive && n > cfg.naive_guard) {
          result.skipped.push_back({method, scheme, n,
                                    "N exceeds naive guard " + std::to_string(cfg.naive_guard)});
          log("skip naive " + std::string(scheme_name(scheme)) + " N=" + std::to_string(n));
          continue;
        }
        const idx first_trial = cfg.warmup ? -1 : 0;
        for (idx trial = first_trial; trial < cfg.trials; ++trial) {
          const detail::TimedOutcome o = detail::timed_run(method, scheme, ds, cfg, probe);
          if (trial < 0) {
            log("warmup " + std::string(bench_method_name(method)) + " " +
                scheme_name(scheme) + " N=" + std::to_string(n) + " " +
                format_double(o.wall_seconds) + "s");
            continue;
          }
          BenchRun run;
          run.method = method;
          run.scheme = scheme;
          run.n = n;
          run.trial = trial;
          run.wall_seconds = o.wall_seconds;
          run.peak_bytes = o.peak_bytes;
          run.nnz_p = o.nnz_p;
          run.nnz_q = o.nnz_q;
          run.nnz_w = o.nnz_w;
          result.runs.push_back(run);
          log("run " + std::string(bench_method_name(method)) + " " + scheme_name(scheme) +
              " N=" + std::to_string(n) + " trial=" + std::to_string(trial) + " " +
              format_double(o.wall_seconds) + "s peak=" + std::to_string(o.peak_bytes) +
              " nnz_P=" + std::to_string(o.nnz_p));
        }
      }
    }
  }
  return result;
}

struct CurveFit {
  BenchMethod method = BenchMethod::sparse;
  Scheme scheme = Scheme::original;
  std::string metric;  // "wall_seconds" or "peak_bytes"
  PowerLawFit fit;
};

/// Power-law fits of per-size trial means, one curve per (method, scheme,
/// metric). Needs at least three distinct sizes per curve.
inline std::vector<CurveFit> fit_curves(const std::vector<BenchRun>& runs) {
  std::map<std::pair<int, int>, std::map<idx, std::vector<const BenchRun*>>> groups;
  for (const BenchRun& r : runs)
    groups[{static_cast<int>(r.method), static_cast<int>(r.scheme)}][r.n].push_back(&r);

  std::vector<CurveFit> fits;
  for (const auto& [key, by_n] : groups) {
    if (by_n.size() < 3) continue;
    std::vector<double> xs, wall, mem;
    for (const auto& [n, rs] : by_n) {
      double w = 0.0, m = 0.0;
      for (const BenchRun* r : rs) {
        w += r->wall_seconds;
        m += static_cast<double>(r->peak_bytes);
      }
      xs.push_back(static_cast<double>(n));
      wall.push_back(w / static_cast<double>(rs.size()));
      mem.push_back(m / static_cast<double>(rs.size()));
    }
    CurveFit cf;
    cf.method = static_cast<BenchMethod>(key.first);
    cf.scheme = static_cast<Scheme>(key.second);
    cf.metric = "wall_seconds";
    cf.fit = fit_power_law(xs, wall);
    fits.push_back(cf);
    cf.metric = "peak_bytes";
    cf.fit = fit_power_law(xs, mem);
    fits.push_back(cf);
  }
  return fits;
}

/// CSV results table (pinned column schema) plus a JSON summary with the
/// exponent fits, skipped runs, and how the numbers were measured.
inline void emit_report(const ScalingResult& result, const BenchConfig& cfg,
                        const std::string& csv_path, const std::string& summary_path) {
  {
    std::ofstream csv(csv_path, std::ios::binary);
    check(csv.good(), "cannot open for writing: " + csv_path);
    csv << "method,scheme,N,trial,wall_seconds,peak_bytes,nnz_P\n";
    for (const BenchRun& r : result.runs)
      csv << bench_method_name(r.method) << ',' << scheme_name(r.scheme) << ',' << r.n << ','
          << r.trial << ',' << format_double(r.wall_seconds) << ',' << r.peak_bytes << ','
          << r.nnz_p << '\n';
    csv.flush();
    check(csv.good(), "write failed: " + csv_path);
  }

  nlohmann::json summary;
  summary["timer"] = "steady_clock";
  summary["memory_metric"] = result.memory_metric;
  summary["threads"] = result.threads;
  summary["trials"] = cfg.trials;
  summary["naive_guard"] = cfg.naive_guard;
  summary["sizes"] = cfg.sizes;
  summary["seed"] = cfg.seed;
  summary["train"] = {{"n_trees", cfg.train.n_trees},
                      {"max_depth", cfg.train.max_depth},
                      {"min_samples_leaf", cfg.train.min_samples_leaf},
                      {"mtry", cfg.train.mtry},
                      {"bootstrap", cfg.train.bootstrap}};
  summary["dataset"] = {{"kind", "gaussian-blobs"},
                        {"n_classes", cfg.blobs.n_classes},
                        {"n_features", cfg.blobs.n_features},
                        {"center_scale", cfg.blobs.center_scale},
                        {"cluster_std", cfg.blobs.cluster_std},
                        {"label_noise", cfg.blobs.label_noise}};

  nlohmann::json fits = nlohmann::json::array();
  for (const CurveFit& cf : fit_curves(result.runs))
    fits.push_back({{"method", bench_method_name(cf.method)},
                    {"scheme", scheme_name(cf.scheme)},
                    {"metric", cf.metric},
                    {"exponent", cf.fit.exponent},
                    {"ln_coeff", cf.fit.ln_coeff},
                    {"r_squared", cf.fit.r_squared},
                    {"n_points", cf.fit.n_points}});
  summary["fits"] = std::move(fits);

  nlohmann::json skipped = nlohmann::json::array();
  for (const SkippedRun& s : result.skipped)
    skipped.push_back({{"method", bench_method_name(s.method)},
                       {"scheme", scheme_name(s.scheme)},
                       {"N", s.n},
                       {"reason", s.reason}});
  summary["skipped"] = std::move(skipped);

  nlohmann::json equiv = nlohmann::json::array();
  for (const EquivalenceCheck& e : result.equivalence)
    equiv.push_back({{"scheme", scheme_name(e.scheme)},
                     {"N", e.n},
                     {"max_abs_diff", e.max_abs_diff}});
  summary["equivalence"] = std::move(equiv);

  nlohmann::json per_run = nlohmann::json::array();
  for (const BenchRun& r : result.runs)
    if (r.method == BenchMethod::sparse)
      per_run.push_back({{"scheme", scheme_name(r.scheme)},
                         {"N", r.n},
                         {"trial", r.trial},
                         {"nnz_Q", r.nnz_q},
                         {"nnz_W", r.nnz_w}});
  summary["factor_nnz"] = std::move(per_run);

  std::ofstream os(summary_path, std::ios::binary);
  check(os.good(), "cannot open for writing: " + summary_path);
  os << summary.dump(1) << "\n";
  os.flush();
  check(os.good(), "write failed: " + summary_path);
}

}  // namespace treeprox
