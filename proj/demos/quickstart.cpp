// Minimal end-to-end tour: train a small forest on synthetic blobs, build
// the sparse factors, multiply them into P, and sanity-check against the
// pairwise reference.

#include <iostream>

#include "treeprox/treeprox.hpp"

int main() {
  using namespace treeprox;

  BlobsConfig blobs;
  blobs.n_classes = 3;
  blobs.n_features = 4;
  blobs.seed = 7;
  const Dataset ds = make_blobs(300, blobs);

  TrainConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 7;
  const Ensemble ens = train_forest(ds.X, ds.y, cfg);
  std::cout << "trained " << ens.n_trees() << " trees on " << ens.n_train << "x"
            << ens.n_features << " (never-oob: " << ens.bagging.never_oob_count << ")\n";
  std::cout << "oob error: " << oob_classification_error(ens, ds.X, ds.y) << "\n";

  for (Scheme scheme : {Scheme::original, Scheme::rf_gap, Scheme::gbt}) {
    const SchemeContext ctx = SchemeContext::build(ens, ds.X, scheme);
    const ProximityFactors f = build_factors(ens, ctx.train_assign, ctx.weights());
    const CsrMatrix p = spgemm_transposed(f.query_factor, f.reference_factor);

    const Matrix reference = proximity_naive(ens, ds.X, scheme);
    double max_diff = 0.0;
    const Matrix dense = to_dense(p);
    for (idx i = 0; i < dense.rows; ++i)
      for (idx j = 0; j < dense.cols; ++j)
        max_diff = std::max(max_diff, std::abs(dense(i, j) - reference(i, j)));

    std::cout << scheme_name(scheme) << ": nnz(Q)=" << f.query_factor.nnz()
              << " nnz(W)=" << f.reference_factor.nnz() << " nnz(P)=" << p.nnz()
              << " max|sparse-naive|=" << format_double(max_diff) << "\n";
  }
  return 0;
}
