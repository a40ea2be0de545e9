/*
 * Copyright 2026 The imrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "imrec/linalg.h"

#include <cmath>
#include <sstream>

namespace imrec {

Vector solve_spd(const SquareMatrix& a, const Vector& b) {
  Eigen::LLT<SquareMatrix> llt(a);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const auto& l = llt.matrixLLT();
    for (Index k = 0; k < l.rows(); ++k) {
      if (!(l(k, k) > 0.0) || !std::isfinite(l(k, k))) ok = false;
    }
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<SquareMatrix> eig(a, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double lo = ev.size() ? ev.minCoeff() : 0.0;
    const double hi = ev.size() ? ev.maxCoeff() : 0.0;
    std::ostringstream msg;
    msg << "normal matrix is singular or not positive definite (eigenvalues in ["
        << lo << ", " << hi << "], condition estimate "
        << (lo > 0.0 ? hi / lo : INFINITY) << "); increase lambda";
    throw NumericError(msg.str());
  }
  Vector x = llt.solve(b);
  if (!x.allFinite()) {
    throw NumericError("non-finite solution of normal equations");
  }
  return x;
}

void add_outer(SquareMatrix& acc, const Eigen::Ref<const Vector>& v,
               double scale) {
  const Index d = v.size();
  for (Index a = 0; a < d; ++a) {
    const double va = scale * v[a];
    for (Index b = a; b < d; ++b) {
      acc(a, b) += va * v[b];
    }
  }
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < a; ++b) acc(a, b) = acc(b, a);
  }
}

SquareMatrix gram_of_rows(const RowMatrix& rows,
                          const std::vector<double>& row_scales) {
  const Index d = rows.cols();
  SquareMatrix g = SquareMatrix::Zero(d, d);
  for (Index r = 0; r < rows.rows(); ++r) {
    const double s = row_scales.empty() ? 1.0 : row_scales[r];
    for (Index a = 0; a < d; ++a) {
      const double va = s * rows(r, a);
      for (Index b = a; b < d; ++b) g(a, b) += va * rows(r, b);
    }
  }
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < a; ++b) g(a, b) = g(b, a);
  }
  return g;
}

double frobenius_dot(const SquareMatrix& a, const SquareMatrix& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace imrec
