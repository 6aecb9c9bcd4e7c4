// Copyright 2026 The AfriE5 Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "afrie5/encoder.hpp"

namespace afrie5 {
namespace {

TEST(FormatInstructionTest, Template) {
  EXPECT_EQ(format_instruction("", "hello"), "hello");
  EXPECT_EQ(format_instruction("Classify topic", "x"), "Instruct: Classify topic\nQuery: x");
  // Not collapsed: formatting twice prefixes twice.
  EXPECT_EQ(format_instruction("A", format_instruction("A", "x")), "Instruct: A\nQuery: Instruct: A\nQuery: x");
}

ToyEncoderParams small_params(std::uint64_t seed, int d, int f, int order = 3) {
  return ToyEncoderParams::init(seed, d, f, order, 1.0);
}

TEST(ToyForwardTest, IdenticalTextsIdenticalRows) {
  const auto fw = toy_forward({"habari yako", "habari yako"}, ToyEncoderParams::init(3));
  EXPECT_EQ(fw.embeddings.row(0), fw.embeddings.row(1));
}

TEST(ToyForwardTest, RowsAreUnitNorm) {
  const auto p = ToyEncoderParams::init(11);
  const auto fw = toy_forward({"a", "ab", "abc", "ሰላም ነው", "a much longer sentence with words"}, p);
  for (Eigen::Index i = 0; i < fw.embeddings.rows(); ++i) EXPECT_NEAR(fw.embeddings.row(i).norm(), 1.0, 1e-9);
}

TEST(ToyForwardTest, HandNormalizedExample) {
  // One text shorter than the n-gram order hashes to a single bucket with weight 1, so setting
  // that bucket's column of W to (3,4) gives raw = (3,4) and the embedding (0.6, 0.8).
  ToyEncoderParams p = small_params(1, 2, 2);
  const auto feats = featurize("x", p);
  ASSERT_EQ(feats.size(), 1u);
  EXPECT_DOUBLE_EQ(feats[0].second, 1.0);
  p.weights.setZero();
  p.weights.col(feats[0].first) << 3.0, 4.0;
  const auto fw = toy_forward({"x"}, p);
  EXPECT_NEAR(fw.embeddings(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(fw.embeddings(0, 1), 0.8, 1e-12);
  EXPECT_NEAR(fw.cache.norms(0), 5.0, 1e-12);
}

TEST(ToyForwardTest, FeaturesAreMeanPooled) {
  const auto p = ToyEncoderParams::init(2);
  const auto f = featurize("abcdef", p);  // 4 trigrams
  double total = 0.0;
  for (const auto& [b, w] : f) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ToyForwardTest, ZeroRawVectorIsDegenerate) {
  ToyEncoderParams p = small_params(1, 2, 2);
  p.weights.setZero();
  try {
    toy_forward({"abc"}, p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "degenerate embedding");
  }
}

TEST(ToyForwardTest, PermutationEquivariance) {
  const auto p = ToyEncoderParams::init(5);
  const std::vector<std::string> texts = {"one", "two words", "three little words", "nne"};
  const auto base = toy_forward(texts, p).embeddings;
  const std::vector<int> perm = {2, 0, 3, 1};
  std::vector<std::string> shuffled;
  for (int i : perm) shuffled.push_back(texts[static_cast<std::size_t>(i)]);
  const auto out = toy_forward(shuffled, p).embeddings;
  for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(out.row(static_cast<long>(k)), base.row(perm[k]));
}

TEST(ToyForwardTest, CharacterCap) {
  ToyEncoderParams p = ToyEncoderParams::init(9);
  p.max_chars = 10;
  const std::string head = "abcdefghij";
  EXPECT_EQ(toy_forward({head}, p).embeddings, toy_forward({head + "zzzzzzzz"}, p).embeddings);
}

TEST(ToyBackwardTest, ZeroGradient) {
  const auto p = small_params(4, 3, 5);
  const auto fw = toy_forward({"abcd", "xyz"}, p);
  EXPECT_EQ(toy_backward(fw.cache, Matrix::Zero(2, 3)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ToyBackwardTest, RadialGradientIsAnnihilated) {
  const auto p = small_params(4, 3, 5);
  const auto fw = toy_forward({"abcd", "xyz"}, p);
  const Matrix g = 2.5 * fw.embeddings;
  EXPECT_LT(toy_backward(fw.cache, g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ToyBackwardTest, ShapeMismatch) {
  const auto p = small_params(4, 3, 5);
  const auto fw = toy_forward({"abcd"}, p);
  EXPECT_THROW(toy_backward(fw.cache, Matrix::Zero(2, 3)), ValidationError);
  EXPECT_THROW(toy_backward(fw.cache, Matrix::Zero(1, 4)), ValidationError);
}

// Scalar loss L = sum(C .* E) for a random C; dL/dW by central differences.
TEST(ToyBackwardTest, FiniteDifferencesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    ToyEncoderParams p = small_params(seed + 100, 3, 5, 2);
    const std::vector<std::string> texts = {"abca", "bcc", "cabba", "aa"};
    Matrix c(4, 3);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
    auto loss = [&](const ToyEncoderParams& q) { return toy_forward(texts, q).embeddings.cwiseProduct(c).sum(); };
    const Matrix analytic = toy_backward(toy_forward(texts, p).cache, c);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) {
      const double w = p.weights.data()[i];
      p.weights.data()[i] = w + h;
      const double up = loss(p);
      p.weights.data()[i] = w - h;
      const double down = loss(p);
      p.weights.data()[i] = w;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
    EXPECT_LE(worst, 1e-5) << "seed " << seed;
  }
}

TEST(EncoderPortTest, ToyAppliesInstructionToQueries) {
  ToyEncoder enc(ToyEncoderParams::init(1));
  const Matrix plain = enc.embed({"x y z"});
  const Matrix inst = enc.embed({"x y z"}, "Retrieve");
  const Matrix manual = enc.embed({format_instruction("Retrieve", "x y z")});
  EXPECT_EQ(inst, manual);
  EXPECT_NE(plain, inst);
}

TEST(EncoderPortTest, FileEncoderLooksUpByContentHash) {
  FileEncoder f;
  f.add(content_hash("alpha"), {3.0, 4.0});
  f.add(content_hash("beta"), {0.0, 2.0});
  const Matrix e = f.embed({"beta", "alpha"});
  EXPECT_NEAR(e(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(e(1, 0), 0.6, 1e-12);
  EXPECT_THROW(f.embed({"gamma"}), RuntimeError);
  const auto path = std::filesystem::temp_directory_path() / "afrie5_file_encoder.jsonl";
  write_file(path.string(), f.to_jsonl());
  auto loaded = make_encoder("file:" + path.string());
  EXPECT_EQ(loaded->embed({"alpha", "beta"}), f.embed({"alpha", "beta"}));
  std::filesystem::remove(path);
}

TEST(EncoderPortTest, CheckpointRoundTrip) {
  Checkpoint ck{ToyEncoderParams::init(77, 4, 64), 12, 0xabcdefULL};
  const auto path = std::filesystem::temp_directory_path() / "afrie5_ckpt_test.bin";
  write_checkpoint(path.string(), ck);
  const Checkpoint back = read_checkpoint(path.string());
  EXPECT_EQ(back.params.weights, ck.params.weights);
  EXPECT_EQ(back.params.hash_seed, 77u);
  EXPECT_EQ(back.step, 12u);
  EXPECT_EQ(back.config_hash, 0xabcdefULL);
  auto enc = make_encoder("ckpt:" + path.string());
  EXPECT_EQ(enc->dim(), 4);
  std::filesystem::remove(path);
}

TEST(EncoderPortTest, SpecErrors) {
  EXPECT_THROW(make_encoder("toy"), ValidationError);
  EXPECT_THROW(make_encoder("toy:1"), ValidationError);
  EXPECT_THROW(make_encoder("toy:a:b"), ValidationError);
  EXPECT_THROW(make_encoder("bert:x"), ValidationError);
  EXPECT_EQ(make_encoder("toy:1:16")->dim(), 16);
}

}  // namespace
}  // namespace afrie5
