#include "cbgen/vectorizer.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cbgen/errors.hpp"

namespace cbgen {

using nlohmann::json;

static constexpr int kVectorizerFormatVersion = 1;

Vectorizer make_vectorizer(std::vector<ThresholdedFeature> features,
                           const ExtractionConfig& extraction,
                           const AssociationMatrix& matrix,
                           bool sum_all_evocations) {
  Vectorizer v;
  v.features = std::move(features);
  v.extraction = extraction;
  v.matrix_fingerprint = matrix.fingerprint();
  v.sum_all_evocations = sum_all_evocations;
  return v;
}

CbVector embed(const Vectorizer& v, const std::string& doc_text,
               const AssociationMatrix& matrix) {
  if (v.matrix_fingerprint != matrix.fingerprint()) {
    throw ConfigError("vectorizer was built against matrix " +
                      v.matrix_fingerprint + ", got " + matrix.fingerprint());
  }
  CbVector out(v.dimension(), 0.0);
  if (v.features.empty()) return out;

  NgramBag bag = extract_ngrams(doc_text, v.extraction.max_ngram_order, matrix);

  // Dimensions indexed by feature id; a feature can appear several times
  // with different thresholds.
  std::unordered_map<std::string, std::vector<std::size_t>> dims_by_feature;
  for (std::size_t i = 0; i < v.features.size(); ++i)
    dims_by_feature[v.features[i].feature.str()].push_back(i);

  std::vector<double> evocation(v.dimension(), 0.0);
  for (const auto& [ngram, count] : bag.counts) {
    for (const auto& [f, w] : matrix.evocations(ngram)) {
      auto it = dims_by_feature.find(f.str());
      if (it == dims_by_feature.end()) continue;
      for (std::size_t dim : it->second) {
        // Sub-threshold n-grams are barred from evoking the feature unless
        // the vectorizer was built in sum-all mode.
        if (!v.sum_all_evocations && !(w > v.features[dim].threshold))
          continue;
        evocation[dim] += w * static_cast<double>(count);
      }
    }
  }
  for (std::size_t dim = 0; dim < v.dimension(); ++dim) {
    double e = evocation[dim];
    double t = v.features[dim].threshold;
    out[dim] = e >= t ? e / t : 0.0;
  }
  return out;
}

void save_vectorizer(const Vectorizer& v, const std::string& path) {
  json features = json::array();
  for (const auto& tf : v.features) {
    features.push_back({{"id", tf.feature.str()},
                        {"threshold", tf.threshold},
                        {"class", tf.source_class},
                        {"score", tf.score},
                        {"support", tf.positive_support}});
  }
  json j = {{"format", "cbgen.vectorizer"},
            {"version", kVectorizerFormatVersion},
            {"extraction",
             {{"max_ngram_order", v.extraction.max_ngram_order},
              {"tokenizer", v.extraction.tokenizer}}},
            {"matrix_fingerprint", v.matrix_fingerprint},
            {"sum_all_evocations", v.sum_all_evocations},
            {"features", features}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path);
}

Vectorizer load_vectorizer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vectorizer file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("corrupt vectorizer file " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cbgen.vectorizer")
      throw ConfigError("not a vectorizer file: " + path);
    int version = j.at("version").get<int>();
    if (version != kVectorizerFormatVersion) {
      throw VersionError("vectorizer format version " +
                         std::to_string(version) + " unsupported (expected " +
                         std::to_string(kVectorizerFormatVersion) + ")");
    }
    Vectorizer v;
    v.extraction.max_ngram_order =
        j.at("extraction").at("max_ngram_order").get<int>();
    v.extraction.tokenizer = j.at("extraction").at("tokenizer");
    v.matrix_fingerprint = j.at("matrix_fingerprint");
    v.sum_all_evocations = j.at("sum_all_evocations").get<bool>();
    for (const auto& jf : j.at("features")) {
      ThresholdedFeature tf;
      tf.feature = FeatureId::parse(jf.at("id").get<std::string>());
      tf.threshold = jf.at("threshold").get<double>();
      tf.source_class = jf.at("class");
      tf.score = jf.at("score").get<double>();
      tf.positive_support =
          jf.at("support").get<std::vector<std::string>>();
      v.features.push_back(std::move(tf));
    }
    return v;
  } catch (const json::exception& e) {
    throw ParseError("invalid vectorizer file " + path + ": " + e.what());
  }
}

std::pair<double, double> feature_breakdown(const Vectorizer& v,
                                            std::size_t top_k) {
  if (top_k < 1 || top_k > v.dimension()) {
    throw ArgumentError("top_k must be in [1, " +
                        std::to_string(v.dimension()) + "], got " +
                        std::to_string(top_k));
  }
  // Features are already ordered by descending score.
  std::size_t fc = 0;
  for (std::size_t i = 0; i < top_k; ++i) {
    if (v.features[i].feature.space() == FeatureId::Space::Cooccurrence) ++fc;
  }
  double fc_fraction = static_cast<double>(fc) / static_cast<double>(top_k);
  return {fc_fraction, 1.0 - fc_fraction};
}

}  // namespace cbgen
