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

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "gtest/gtest.h"
#include "imrec/linalg.h"
#include "imrec/model.h"
#include "test_util.h"

namespace imrec {
namespace {

using testing::m_toy_model;
using testing::random_model;

// Full sort with the tie rule, the reference for rank_of and top_n.
std::vector<Index> full_order(const Vector& scores,
                              const std::vector<Index>& excluded) {
  std::vector<Index> items;
  for (Index i = 0; i < scores.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) {
      items.push_back(i);
    }
  }
  std::sort(items.begin(), items.end(), [&](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return items;
}

TEST(InitModel, ZeroAndDeterminism) {
  const FactorModel z = init_model(2, 3, 2, 7, 0.0);
  EXPECT_TRUE(z.W.isZero(0.0));
  EXPECT_TRUE(z.H.isZero(0.0));
  EXPECT_EQ(init_model(5, 6, 3, 9, 0.3), init_model(5, 6, 3, 9, 0.3));
  EXPECT_FALSE(init_model(5, 6, 3, 9, 0.3) == init_model(5, 6, 3, 10, 0.3));
  EXPECT_THROW(init_model(2, 2, 0, 1, 0.1), ValidationError);
}

TEST(InitModel, SampleMean) {
  const FactorModel m = init_model(700, 700, 8, 3, 0.1);
  const double n = static_cast<double>(m.W.size() + m.H.size());
  const double mean = (m.W.sum() + m.H.sum()) / n;
  EXPECT_LE(std::abs(mean), 3.0 * 0.1 / std::sqrt(n));
  EXPECT_NEAR(default_init_sigma(4), 0.05, 1e-15);
}

TEST(Score, MToy) {
  const FactorModel m = m_toy_model();
  EXPECT_DOUBLE_EQ(score(m, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(score(m, 0, 1), 0.0);
  const Vector s = score_all(m, 1);
  EXPECT_EQ(s, (Vector(3) << 0, 1, 1).finished());
  EXPECT_THROW(score(m, 2, 0), IndexError);
  EXPECT_THROW(score(m, 0, 3), IndexError);
}

TEST(RankOf, MToy) {
  const FactorModel m = m_toy_model();
  EXPECT_EQ(rank_of(m, 0, 0), 1);
  EXPECT_EQ(rank_of(m, 0, 2), 2);
  EXPECT_EQ(rank_of(m, 0, 1), 3);
  EXPECT_EQ(rank_of(m, 1, 1), 1);
  EXPECT_EQ(rank_of(m, 1, 2), 2);
  EXPECT_EQ(rank_of(m, 1, 0), 3);
  const std::vector<Index> ex{0};
  EXPECT_EQ(rank_of(m, 0, 2, ex), 1);
  EXPECT_THROW(rank_of(m, 0, 0, ex), ValidationError);
}

TEST(RankOf, Bijection) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    FactorModel m = random_model(2, 30, 3, seed);
    // Coarse values force ties.
    m.H = (m.H.array() * 2.0).round().matrix();
    m.W = (m.W.array() * 2.0).round().matrix();
    const std::vector<Index> ex{3, 7, 11};
    std::vector<Index> ranks;
    for (Index i = 0; i < 30; ++i) {
      if (std::find(ex.begin(), ex.end(), i) != ex.end()) continue;
      ranks.push_back(rank_of(m, 1, i, ex));
    }
    std::sort(ranks.begin(), ranks.end());
    std::vector<Index> expect(27);
    std::iota(expect.begin(), expect.end(), 1);
    EXPECT_EQ(ranks, expect);
  }
}

TEST(TopN, MToy) {
  const FactorModel m = m_toy_model();
  auto r = top_n(m, 0, 2);
  EXPECT_EQ(r.items, (std::vector<Index>{0, 2}));
  EXPECT_EQ(r.scores, (std::vector<double>{1, 1}));
  r = top_n(m, 1, 5);
  EXPECT_EQ(r.items, (std::vector<Index>{1, 2, 0}));
  const std::vector<Index> ex{0, 2};
  r = top_n(m, 0, 1, ex);
  EXPECT_EQ(r.items, (std::vector<Index>{1}));
  EXPECT_THROW(top_n(m, 0, 0), ValidationError);
}

TEST(TopN, MatchesFullSort) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Index ni = 1 + static_cast<Index>(seed * 3 % 100);
    FactorModel m = random_model(1, ni, 2, seed);
    if (seed % 2 == 0) m.H = m.H.array().round().matrix();
    std::vector<Index> ex;
    for (Index i = 0; i < ni; ++i) {
      if (std::bernoulli_distribution(0.1)(rng)) ex.push_back(i);
    }
    const auto order = full_order(score_all(m, 0), ex);
    for (Index n = 1; n <= ni + 1; ++n) {
      const auto r = top_n(m, 0, n, ex);
      const std::vector<Index> expect(
          order.begin(),
          order.begin() + std::min<Index>(n, static_cast<Index>(order.size())));
      ASSERT_EQ(r.items, expect) << "seed " << seed << " n " << n;
    }
  }
}

TEST(TopN, ScaleInvariance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    FactorModel m = random_model(3, 40, 4, seed);
    const auto before = top_n(m, 2, 10).items;
    m.H *= 3.7;
    EXPECT_EQ(top_n(m, 2, 10).items, before);
  }
}

TEST(FoldIn, HandValues) {
  FactorModel m;
  m.W = RowMatrix::Zero(1, 1);
  m.H = RowMatrix::Constant(1, 1, 2.0);
  const SquareMatrix g = gram_of_rows(m.H);
  std::vector<FoldInObservation> h{{0, 1.0, 1.0}};
  EXPECT_NEAR(fold_in_context(m, h, 0.0, 0.0, g)[0], 0.5, 1e-15);
  EXPECT_NEAR(fold_in_context(m, {}, 0.0, 1.0, g)[0], 0.0, 0.0);
  m.H(0, 0) = 1.0;
  EXPECT_NEAR(fold_in_context(m, h, 0.0, 1.0, gram_of_rows(m.H))[0], 0.5,
              1e-15);
  EXPECT_THROW(fold_in_context(m, {}, 0.0, 0.0, g), NumericError);
}

TEST(FoldIn, StationaryPoint) {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index d = 1 + static_cast<Index>(seed % 8);
    const FactorModel m = random_model(1, 25, d, seed);
    const SquareMatrix g = gram_of_rows(m.H);
    std::vector<FoldInObservation> hist;
    for (Index i = 0; i < 25; i += 3) {
      hist.push_back({i, 1.0 + std::uniform_real_distribution<>(0, 2)(rng),
                      std::uniform_real_distribution<>(0.5, 2)(rng)});
    }
    const double alpha0 = 0.2, lambda = 1e-3;
    const Vector w = fold_in_context(m, hist, alpha0, lambda, g);
    // d/dw of sum alpha (w.h - y)^2 + alpha0 sum_i (w.h_i)^2 + lambda |w|^2.
    Vector grad = 2.0 * lambda * w;
    for (Index i = 0; i < 25; ++i) {
      grad += 2.0 * alpha0 * m.H.row(i).dot(w) * m.H.row(i).transpose();
    }
    for (const auto& o : hist) {
      const Vector h = m.H.row(o.item).transpose();
      grad += 2.0 * o.alpha * (w.dot(h) - o.label) * h;
    }
    EXPECT_LE(grad.norm(), 1e-8);
  }
}

TEST(Persist, RoundTrip) {
  for (const FactorModel& m :
       {m_toy_model(), init_model(3, 4, 2, 1, 0.0), random_model(7, 5, 3, 2)}) {
    EXPECT_EQ(deserialize_model(serialize_model(m)), m);
  }
  const auto path = std::filesystem::temp_directory_path() / "imrec_model.bin";
  persist(m_toy_model(), path.string());
  EXPECT_EQ(restore(path.string()), m_toy_model());
  std::filesystem::remove(path);
}

TEST(Persist, Layout) {
  const std::string bytes = serialize_model(m_toy_model());
  const std::string header = "IMFR1\n2 3 2\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(bytes.size(), header.size() + (4 + 6) * 8);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + header.size(), 8);
  EXPECT_EQ(first, 1.0);
}

TEST(Persist, Errors) {
  std::string bytes = serialize_model(m_toy_model());
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), FormatError);
  try {
    deserialize_model(bytes.substr(0, bytes.size() - 3));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  EXPECT_THROW(deserialize_model(bytes + "x"), FormatError);
  EXPECT_THROW(deserialize_model("IMFR1\n2 x 2\n"), FormatError);
  EXPECT_THROW(restore("/nonexistent/model.bin"), Error);
}

}  // namespace
}  // namespace imrec
