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

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "imrec/error.h"

namespace imrec {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SquareMatrix = Eigen::MatrixXd;

// Solves a x = b for symmetric positive definite `a` by Cholesky. Throws
// NumericError carrying a condition estimate when `a` is not numerically
// positive definite.
Vector solve_spd(const SquareMatrix& a, const Vector& b);

// Adds scale * v v^T, keeping the result exactly symmetric.
void add_outer(SquareMatrix& acc, const Eigen::Ref<const Vector>& v,
               double scale = 1.0);

// Sum over rows of scale_r * row_r row_r^T (scale_r = 1 when `row_scales` is
// empty). Accumulated in row order; exactly symmetric.
SquareMatrix gram_of_rows(const RowMatrix& rows,
                          const std::vector<double>& row_scales = {});

// Frobenius inner product <a, b>.
double frobenius_dot(const SquareMatrix& a, const SquareMatrix& b);

}  // namespace imrec
