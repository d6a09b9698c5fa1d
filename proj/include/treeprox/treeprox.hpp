#pragma once

// Tree-ensemble proximities through the sparse factorization P = QWᵀ:
// bagged CART training, leaf-collision weighting schemes, CSR kernels, the
// pairwise reference implementation, and the scaling benchmark harness.

#include "treeprox/bagging.hpp"
#include "treeprox/bench.hpp"
#include "treeprox/common.hpp"
#include "treeprox/datasets.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/matrix.hpp"
#include "treeprox/matrix_market.hpp"
#include "treeprox/memprobe.hpp"
#include "treeprox/oracle.hpp"
#include "treeprox/proximity.hpp"
#include "treeprox/rng.hpp"
#include "treeprox/serialize.hpp"
#include "treeprox/sparse.hpp"
#include "treeprox/tree.hpp"
