#ifndef CBGEN_CORPUS_HPP
#define CBGEN_CORPUS_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbgen/association_matrix.hpp"

namespace cbgen {

struct Document {
  std::string id;
  std::string text;
  std::string label;
};

// Labeled document collection. label_set lists class names in first
// appearance order and always matches the labels present in docs.
struct LabeledCorpus {
  std::vector<Document> docs;
  std::vector<std::string> label_set;

  std::size_t size() const { return docs.size(); }
  // Index of a label in label_set, -1 if absent.
  int label_index(const std::string& label) const;
  std::vector<long> label_counts() const;
};

// Multiset of matrix-present n-grams extracted from one document.
struct NgramBag {
  std::unordered_map<std::string, long> counts;
};

// How documents are turned into n-grams. Stored inside vectorizers so that
// embedding reuses the exact settings selection ran with.
struct ExtractionConfig {
  int max_ngram_order = 3;
  std::string tokenizer = "ws_lower_v1";
};

// Reads JSON Lines with string fields "id", "label", "text". Errors carry
// the offending line number; empty files are rejected.
LabeledCorpus load_corpus(const std::string& path);

void save_corpus(const LabeledCorpus& corpus, const std::string& path);

// Emits every contiguous n-gram of order 1..max_order that the matrix knows,
// with occurrence counts. Overlapping n-grams all count.
NgramBag extract_ngrams(const std::string& text, int max_order,
                        const AssociationMatrix& matrix);

// Uniform sample of `size` documents without replacement; deterministic for
// a given seed. The sample's label_set may be a subset of the parent's.
LabeledCorpus sample_training(const LabeledCorpus& corpus, std::size_t size,
                              std::uint64_t seed);

}  // namespace cbgen

#endif  // CBGEN_CORPUS_HPP
