#ifndef CBGEN_ASSOCIATION_MATRIX_HPP
#define CBGEN_ASSOCIATION_MATRIX_HPP

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cbgen {

// A matrix column. Feature names live in one of two namespaces, carried as a
// "C:" (co-occurrence) or "S:" (syntactic context) prefix in serialized form.
class FeatureId {
 public:
  enum class Space { Cooccurrence, Syntactic };

  FeatureId() = default;

  // Parses "C:name" / "S:name"; throws ParseError on anything else.
  static FeatureId parse(std::string_view s);

  Space space() const {
    return repr_[0] == 'C' ? Space::Cooccurrence : Space::Syntactic;
  }
  std::string_view name() const {
    return std::string_view(repr_).substr(2);
  }
  const std::string& str() const { return repr_; }

  auto operator<=>(const FeatureId&) const = default;

 private:
  explicit FeatureId(std::string repr) : repr_(std::move(repr)) {}
  std::string repr_ = "C:?";
};

struct FeatureIdHash {
  std::size_t operator()(const FeatureId& f) const {
    return std::hash<std::string>{}(f.str());
  }
};

// One (ngram, feature, weight) cell.
struct MatrixRecord {
  std::string ngram;
  FeatureId feature;
  double weight = 0.0;
};

// Sparse row: features sorted by id, weights strictly positive.
using FeatureWeights = std::vector<std::pair<FeatureId, double>>;

// Sparse map from n-gram (space-joined lowercase tokens) to feature weights.
// Immutable once built; safe for concurrent reads.
class AssociationMatrix {
 public:
  AssociationMatrix() = default;

  // Validates (positive weights, no duplicate cells, non-empty keys), sorts
  // rows, builds the first-token scan index and the content fingerprint.
  static AssociationMatrix from_records(std::vector<MatrixRecord> records);

  // Row lookup; returns an empty map for unknown n-grams.
  const FeatureWeights& evocations(std::string_view ngram) const;

  bool contains(std::string_view ngram) const {
    return rows_.find(std::string(ngram)) != rows_.end();
  }

  // Orders (token counts) of stored n-grams whose first token is `token`,
  // as a bitmask with bit n-1 set for order n. 0 if none.
  std::uint32_t orders_starting_with(std::string_view token) const;

  std::size_t row_count() const { return rows_.size(); }
  std::size_t cell_count() const { return cell_count_; }
  int max_ngram_order() const { return max_ngram_order_; }

  // FNV-1a over the canonically ordered records; stable for equal content.
  const std::string& fingerprint() const { return fingerprint_; }

  // Row keys in lexicographic order.
  std::vector<std::string> sorted_ngrams() const;

 private:
  std::unordered_map<std::string, FeatureWeights> rows_;
  std::unordered_map<std::string, std::uint32_t> first_token_orders_;
  std::size_t cell_count_ = 0;
  int max_ngram_order_ = 0;
  std::string fingerprint_;
};

// Loads the canonical TSV format: `ngram<TAB>feature<TAB>weight` per line,
// '#' lines are comments. Throws ParseError / DuplicateError.
AssociationMatrix load_matrix(const std::string& path);

// Writes rows sorted by (ngram, feature); weights round-trip exactly.
void save_matrix(const AssociationMatrix& m, const std::string& path);

// The transposed co-occurrence block: rows keyed by an F_C feature, entries
// mapping item n-grams to weights. Serialized as `feature<TAB>item<TAB>weight`.
struct FeatureToItemMatrix {
  std::unordered_map<FeatureId, std::vector<std::pair<std::string, double>>,
                     FeatureIdHash>
      rows;
  std::size_t cell_count = 0;
};

FeatureToItemMatrix load_feature_to_item(const std::string& path);

// Grafts the transpose of `fc` into `base`: every (feature g, item w, x)
// becomes the cell (w, g, x). Cells of `base` are kept unchanged; any
// colliding cell raises DuplicateError. `fc` must hold only F_C features.
AssociationMatrix merge_matrices(const AssociationMatrix& base,
                                 const FeatureToItemMatrix& fc);

}  // namespace cbgen

#endif  // CBGEN_ASSOCIATION_MATRIX_HPP
