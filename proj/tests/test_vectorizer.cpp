#include <doctest.h>

#include <fstream>

#include "cbgen/errors.hpp"
#include "cbgen/rng.hpp"
#include "cbgen/vectorizer.hpp"
#include "support/fixtures.hpp"

using namespace cbgen;

namespace {

ThresholdedFeature saturn_feature(double threshold) {
  ThresholdedFeature tf;
  tf.feature = FeatureId::parse("C:saturn_v");
  tf.threshold = threshold;
  tf.source_class = "sci.space";
  tf.score = 0.5;
  tf.positive_support = {"rocket", "shuttle"};
  return tf;
}

Vectorizer saturn_vectorizer(const AssociationMatrix& m,
                             bool sum_all = false) {
  return make_vectorizer({saturn_feature(2.30)}, {2}, m, sum_all);
}

}  // namespace

TEST_SUITE("vectorizer") {

TEST_CASE("embedding sums evocations above the threshold") {
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = saturn_vectorizer(m);

  // rocket 7.32 + shuttle 2.57, clipped by t = 2.30.
  CbVector vec = embed(v, "rocket shuttle", m);
  REQUIRE(vec.size() == 1);
  CHECK(vec[0] == doctest::Approx((7.32 + 2.57) / 2.30).epsilon(1e-12));
  CHECK(vec[0] == doctest::Approx(4.3).epsilon(1e-9));

  // No matrix n-grams: the zero vector.
  CbVector none = embed(v, "nothing matches here", m);
  CHECK(none[0] == 0.0);

  // Sub-threshold evocation is clipped to zero.
  CbVector low = embed(v, "capacity", m);
  CHECK(low[0] == 0.0);
}

TEST_CASE("sum-all mode lets sub-threshold weights accumulate") {
  AssociationMatrix m = testing::saturn_matrix();
  // Two occurrences of capacity: 2 * 1.95 = 3.90 >= 2.30.
  Vectorizer strict = saturn_vectorizer(m, false);
  CHECK(embed(strict, "capacity capacity", m)[0] == 0.0);

  Vectorizer lenient = saturn_vectorizer(m, true);
  CHECK(embed(lenient, "capacity capacity", m)[0] ==
        doctest::Approx(2 * 1.95 / 2.30).epsilon(1e-12));

  // kennedy sits exactly at the threshold: strict > bars it from the sum,
  // while sum-all admits it and e = t clips to exactly 1.
  CHECK(embed(strict, "kennedy", m)[0] == 0.0);
  CHECK(embed(lenient, "kennedy", m)[0] == 1.0);
}

TEST_CASE("entries are zero or at least one") {
  Rng rng(21);
  // Random matrices, vectorizers, and documents.
  for (int iter = 0; iter < 60; ++iter) {
    std::vector<MatrixRecord> records;
    int vocab = 4 + static_cast<int>(uniform_below(rng, 10));
    int feats = 1 + static_cast<int>(uniform_below(rng, 4));
    for (int w = 0; w < vocab; ++w) {
      for (int f = 0; f < feats; ++f) {
        if (uniform01(rng) < 0.5) continue;
        records.push_back({"tok" + std::to_string(w),
                           FeatureId::parse("C:f" + std::to_string(f)),
                           uniform_range(rng, 0.1, 8.0)});
      }
    }
    if (records.empty())
      records.push_back({"tok0", FeatureId::parse("C:f0"), 1.0});
    AssociationMatrix m = AssociationMatrix::from_records(records);

    std::vector<ThresholdedFeature> features;
    for (int f = 0; f < feats; ++f) {
      ThresholdedFeature tf;
      tf.feature = FeatureId::parse("C:f" + std::to_string(f));
      tf.threshold = uniform_range(rng, 0.2, 6.0);
      tf.score = uniform01(rng);
      tf.positive_support = {"tok0", "tok1"};
      features.push_back(tf);
    }
    Vectorizer v = make_vectorizer(features, {1}, m, uniform01(rng) < 0.5);

    for (int d = 0; d < 20; ++d) {
      std::string text;
      int len = static_cast<int>(uniform_below(rng, 12));
      for (int t = 0; t < len; ++t) {
        if (t) text += ' ';
        text += "tok" + std::to_string(uniform_below(rng, vocab + 3));
      }
      for (double entry : embed(v, text, m)) {
        CHECK((entry == 0.0 || entry >= 1.0));
        CHECK(entry != 0.5);
      }
    }
  }
}

TEST_CASE("evocation is additive over document concatenation") {
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = saturn_vectorizer(m);
  // Both halves above threshold: entries add exactly.
  double left = embed(v, "rocket liftoff", m)[0];
  double right = embed(v, "apollo shuttle", m)[0];
  double both = embed(v, "rocket liftoff apollo shuttle", m)[0];
  REQUIRE(left >= 1.0);
  REQUIRE(right >= 1.0);
  CHECK(both == doctest::Approx(left + right).epsilon(1e-12));
}

TEST_CASE("embedding ignores token order within the same multiset") {
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = saturn_vectorizer(m);
  CHECK(embed(v, "rocket shuttle apollo", m)[0] ==
        embed(v, "apollo rocket shuttle", m)[0]);
}

TEST_CASE("fingerprint mismatch is rejected") {
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = saturn_vectorizer(m);
  AssociationMatrix other = AssociationMatrix::from_records(
      {{"rocket", FeatureId::parse("C:saturn_v"), 7.32}});
  CHECK_THROWS_AS(embed(v, "rocket", other), ConfigError);
}

TEST_CASE("vectorizer round trip") {
  auto dir = testing::write_temp_dir("vec_rt");
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = saturn_vectorizer(m);
  save_vectorizer(v, dir + "/v.json");
  Vectorizer v2 = load_vectorizer(dir + "/v.json");
  CHECK(v2.matrix_fingerprint == v.matrix_fingerprint);
  CHECK(v2.sum_all_evocations == v.sum_all_evocations);
  CHECK(v2.extraction.max_ngram_order == v.extraction.max_ngram_order);
  REQUIRE(v2.dimension() == 1);
  CHECK(v2.features[0].feature.str() == "C:saturn_v");
  CHECK(v2.features[0].threshold == v.features[0].threshold);
  CHECK(v2.features[0].positive_support == v.features[0].positive_support);
  CHECK(embed(v2, "rocket shuttle", m)[0] ==
        embed(v, "rocket shuttle", m)[0]);

  // Saving twice produces identical bytes.
  save_vectorizer(v, dir + "/v2.json");
  std::ifstream a(dir + "/v.json"), b(dir + "/v2.json");
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("version and corruption errors") {
  auto dir = testing::write_temp_dir("vec_bad");
  {
    std::ofstream out(dir + "/future.json");
    out << R"({"format":"cbgen.vectorizer","version":99})";
  }
  CHECK_THROWS_AS(load_vectorizer(dir + "/future.json"), VersionError);
  {
    std::ofstream out(dir + "/corrupt.json");
    out << "{ nope";
  }
  CHECK_THROWS_AS(load_vectorizer(dir + "/corrupt.json"), ParseError);
  {
    std::ofstream out(dir + "/other.json");
    out << R"({"format":"something.else","version":1})";
  }
  CHECK_THROWS_AS(load_vectorizer(dir + "/other.json"), ConfigError);
}

TEST_CASE("empty vectorizer embeds to the empty vector") {
  auto dir = testing::write_temp_dir("vec_empty");
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer v = make_vectorizer({}, {2}, m);
  save_vectorizer(v, dir + "/v.json");
  Vectorizer v2 = load_vectorizer(dir + "/v.json");
  CHECK(v2.dimension() == 0);
  CHECK(embed(v2, "rocket shuttle", m).empty());
}

TEST_CASE("feature breakdown") {
  AssociationMatrix m = testing::saturn_matrix();
  Vectorizer all_fc = saturn_vectorizer(m);
  auto [fc, fs] = feature_breakdown(all_fc, 1);
  CHECK(fc == 1.0);
  CHECK(fs == 0.0);

  // 100 features, 71 co-occurrence.
  std::vector<ThresholdedFeature> feats;
  for (int i = 0; i < 100; ++i) {
    ThresholdedFeature tf;
    tf.feature = FeatureId::parse(
        (i < 71 ? "C:f" : "S:f") + std::to_string(i));
    tf.threshold = 1.0;
    tf.score = 1.0 - i * 0.001;
    feats.push_back(tf);
  }
  Vectorizer v = make_vectorizer(feats, {1}, m);
  auto [fc2, fs2] = feature_breakdown(v, 100);
  CHECK(fc2 == doctest::Approx(0.71));
  CHECK(fs2 == doctest::Approx(0.29));

  CHECK_THROWS_AS(feature_breakdown(v, 0), ArgumentError);
  CHECK_THROWS_AS(feature_breakdown(v, 101), ArgumentError);
}

}  // TEST_SUITE
