#ifndef CBGEN_VECTORIZER_HPP
#define CBGEN_VECTORIZER_HPP

#include <string>
#include <utility>
#include <vector>

#include "cbgen/association_matrix.hpp"
#include "cbgen/corpus.hpp"
#include "cbgen/feature_select.hpp"

namespace cbgen {

// Dense task-specific document embedding. Entry i is e/t_i when the document
// evokes feature i with total weight e >= t_i, and 0 otherwise, so every
// value is either 0 or at least 1.
using CbVector = std::vector<double>;

// The build-once product of feature selection: an ordered feature list plus
// everything needed to embed documents the same way forever after.
struct Vectorizer {
  std::vector<ThresholdedFeature> features;
  ExtractionConfig extraction;
  std::string matrix_fingerprint;
  // When true, sub-threshold per-n-gram evocations still count toward the
  // pre-clip sum; default keeps them out entirely.
  bool sum_all_evocations = false;

  std::size_t dimension() const { return features.size(); }
};

Vectorizer make_vectorizer(std::vector<ThresholdedFeature> features,
                           const ExtractionConfig& extraction,
                           const AssociationMatrix& matrix,
                           bool sum_all_evocations = false);

// Embeds a document. Throws ConfigError if the matrix fingerprint does not
// match the one the vectorizer was built against.
CbVector embed(const Vectorizer& v, const std::string& doc_text,
               const AssociationMatrix& matrix);

// Versioned JSON round-trip.
void save_vectorizer(const Vectorizer& v, const std::string& path);
Vectorizer load_vectorizer(const std::string& path);

// Namespace split (co-occurrence fraction, syntactic fraction) among the
// top_k features by score. top_k must be in [1, dimension].
std::pair<double, double> feature_breakdown(const Vectorizer& v,
                                            std::size_t top_k);

}  // namespace cbgen

#endif  // CBGEN_VECTORIZER_HPP
