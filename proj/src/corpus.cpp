#include "cbgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "cbgen/errors.hpp"
#include "cbgen/rng.hpp"
#include "cbgen/text.hpp"

namespace cbgen {

using nlohmann::json;

int LabeledCorpus::label_index(const std::string& label) const {
  for (std::size_t i = 0; i < label_set.size(); ++i)
    if (label_set[i] == label) return static_cast<int>(i);
  return -1;
}

std::vector<long> LabeledCorpus::label_counts() const {
  std::vector<long> counts(label_set.size(), 0);
  for (const auto& d : docs) {
    int idx = label_index(d.label);
    if (idx >= 0) ++counts[idx];
  }
  return counts;
}

static std::string get_string_field(const json& j, const char* field,
                                    long lineno) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw ParseError(std::string("missing field \"") + field + "\"", lineno);
  }
  if (!it->is_string()) {
    throw ParseError(std::string("field \"") + field + "\" must be a string",
                     lineno);
  }
  return it->get<std::string>();
}

LabeledCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  LabeledCorpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::unordered_set<std::string> seen_labels;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("line is not a JSON object", lineno);
    Document d;
    d.id = get_string_field(j, "id", lineno);
    d.label = get_string_field(j, "label", lineno);
    d.text = get_string_field(j, "text", lineno);
    if (d.label.empty()) throw ParseError("empty label", lineno);
    if (!seen_ids.insert(d.id).second) {
      throw ParseError("duplicate document id '" + d.id + "'", lineno);
    }
    if (seen_labels.insert(d.label).second) corpus.label_set.push_back(d.label);
    corpus.docs.push_back(std::move(d));
  }
  if (corpus.docs.empty()) throw ParseError("corpus file is empty: " + path);
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& d : corpus.docs) {
    json j;
    j["id"] = d.id;
    j["label"] = d.label;
    j["text"] = d.text;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

NgramBag extract_ngrams(const std::string& text, int max_order,
                        const AssociationMatrix& matrix) {
  if (max_order < 1) throw ArgumentError("max_order must be >= 1");
  NgramBag bag;
  const auto tokens = tokenize(text);
  const int n = static_cast<int>(tokens.size());
  std::string key;
  for (int i = 0; i < n; ++i) {
    // The first-token index prunes positions that start no stored n-gram.
    std::uint32_t orders = matrix.orders_starting_with(tokens[i]);
    if (orders == 0) continue;
    key.clear();
    for (int len = 1; len <= max_order && i + len <= n; ++len) {
      if (len > 1) key.push_back(' ');
      key.append(tokens[i + len - 1]);
      if ((orders >> (len - 1)) & 1u) {
        if (matrix.contains(key)) ++bag.counts[key];
      }
    }
  }
  return bag;
}

LabeledCorpus sample_training(const LabeledCorpus& corpus, std::size_t size,
                              std::uint64_t seed) {
  if (size < 1 || size > corpus.size()) {
    throw ArgumentError("sample size " + std::to_string(size) +
                        " out of range [1, " + std::to_string(corpus.size()) +
                        "]");
  }
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first `size` slots end up a uniform sample.
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t j = i + uniform_below(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  LabeledCorpus sample;
  std::unordered_set<std::string> seen_labels;
  for (std::size_t i = 0; i < size; ++i) {
    const Document& d = corpus.docs[idx[i]];
    if (seen_labels.insert(d.label).second)
      sample.label_set.push_back(d.label);
    sample.docs.push_back(d);
  }
  return sample;
}

}  // namespace cbgen
