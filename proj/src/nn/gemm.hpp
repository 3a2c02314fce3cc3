// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cblas.h>

namespace mvsync {

// Row-major C(m x n) = alpha * op(A) * op(B) + beta * C.
// A holds op(A) pre-transposition: ta selects A^T of a (k x m)-stored matrix.
inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                 const float* A, const float* B, float beta, float* C) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, ta ? m : k, B,
              tb ? k : n, beta, C, n);
}

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                 const double* A, const double* B, double beta, double* C) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, ta ? m : k, B,
              tb ? k : n, beta, C, n);
}

}  // namespace mvsync
