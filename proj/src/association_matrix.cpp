#include "cbgen/association_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cbgen/errors.hpp"
#include "cbgen/text.hpp"

namespace cbgen {

FeatureId FeatureId::parse(std::string_view s) {
  if (s.size() < 3 || (s[0] != 'C' && s[0] != 'S') || s[1] != ':') {
    throw ParseError("feature id must be 'C:name' or 'S:name', got '" +
                     std::string(s) + "'");
  }
  return FeatureId(std::string(s));
}

static int token_count(std::string_view ngram) {
  if (ngram.empty()) return 0;
  int n = 1;
  for (char c : ngram)
    if (c == ' ') ++n;
  return n;
}

static std::string first_token(std::string_view ngram) {
  auto pos = ngram.find(' ');
  return std::string(pos == std::string_view::npos ? ngram
                                                   : ngram.substr(0, pos));
}

AssociationMatrix AssociationMatrix::from_records(
    std::vector<MatrixRecord> records) {
  AssociationMatrix m;
  for (auto& r : records) {
    if (r.ngram.empty()) throw ParseError("empty n-gram key");
    if (!(r.weight > 0.0)) {
      throw ParseError("non-positive weight for ('" + r.ngram + "', '" +
                       r.feature.str() + "')");
    }
    m.rows_[std::move(r.ngram)].emplace_back(std::move(r.feature), r.weight);
  }
  for (auto& [ngram, feats] : m.rows_) {
    std::sort(feats.begin(), feats.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < feats.size(); ++i) {
      if (feats[i].first == feats[i - 1].first) {
        throw DuplicateError("duplicate cell ('" + ngram + "', '" +
                             feats[i].first.str() + "')");
      }
    }
    m.cell_count_ += feats.size();
    int order = token_count(ngram);
    m.max_ngram_order_ = std::max(m.max_ngram_order_, order);
    if (order >= 1 && order <= 32)
      m.first_token_orders_[first_token(ngram)] |= 1u << (order - 1);
  }

  // FNV-1a 64 over records in canonical order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& key : m.sorted_ngrams()) {
    mix(key.data(), key.size());
    mix("\x1e", 1);
    for (const auto& [f, w] : m.rows_.at(key)) {
      mix(f.str().data(), f.str().size());
      mix("\x1f", 1);
      mix(&w, sizeof(w));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  m.fingerprint_ = buf;
  return m;
}

const FeatureWeights& AssociationMatrix::evocations(
    std::string_view ngram) const {
  static const FeatureWeights kEmpty;
  auto it = rows_.find(std::string(ngram));
  return it == rows_.end() ? kEmpty : it->second;
}

std::uint32_t AssociationMatrix::orders_starting_with(
    std::string_view token) const {
  auto it = first_token_orders_.find(std::string(token));
  return it == first_token_orders_.end() ? 0u : it->second;
}

std::vector<std::string> AssociationMatrix::sorted_ngrams() const {
  std::vector<std::string> keys;
  keys.reserve(rows_.size());
  for (const auto& [k, v] : rows_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

namespace {

struct TsvLine {
  std::string_view col0, col1, col2;
};

// Returns false for blank/comment lines.
bool read_tsv_line(std::string_view line, long lineno, TsvLine& out) {
  if (line.empty() || line[0] == '#') return false;
  auto fields = split(line, '\t');
  if (fields.size() != 3) {
    throw ParseError("expected 3 tab-separated fields, got " +
                         std::to_string(fields.size()),
                     lineno);
  }
  out = {fields[0], fields[1], fields[2]};
  return true;
}

double parse_weight(std::string_view s, long lineno) {
  double w = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, w);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(w)) {
    throw ParseError("bad weight '" + std::string(s) + "'", lineno);
  }
  if (!(w > 0.0)) {
    throw ParseError("weight must be > 0, got '" + std::string(s) + "'",
                     lineno);
  }
  return w;
}

}  // namespace

AssociationMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file: " + path);
  std::vector<MatrixRecord> records;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    TsvLine t;
    if (!read_tsv_line(line, lineno, t)) continue;
    if (t.col0.empty()) throw ParseError("empty n-gram field", lineno);
    FeatureId f;
    try {
      f = FeatureId::parse(t.col1);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    records.push_back({std::string(t.col0), f, parse_weight(t.col2, lineno)});
  }
  return AssociationMatrix::from_records(std::move(records));
}

void save_matrix(const AssociationMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& key : m.sorted_ngrams()) {
    for (const auto& [f, w] : m.evocations(key)) {
      out << key << '\t' << f.str() << '\t' << format_double(w) << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path);
}

FeatureToItemMatrix load_feature_to_item(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file: " + path);
  FeatureToItemMatrix m;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    TsvLine t;
    if (!read_tsv_line(line, lineno, t)) continue;
    FeatureId f;
    try {
      f = FeatureId::parse(t.col0);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (f.space() != FeatureId::Space::Cooccurrence) {
      throw ParseError("feature-to-item rows must be C: features", lineno);
    }
    if (t.col1.empty()) throw ParseError("empty item field", lineno);
    double w = parse_weight(t.col2, lineno);
    auto& row = m.rows[f];
    for (const auto& [item, _] : row) {
      if (item == t.col1) {
        throw DuplicateError("duplicate cell ('" + f.str() + "', '" +
                             std::string(t.col1) + "')");
      }
    }
    row.emplace_back(std::string(t.col1), w);
    ++m.cell_count;
  }
  return m;
}

AssociationMatrix merge_matrices(const AssociationMatrix& base,
                                 const FeatureToItemMatrix& fc) {
  std::vector<MatrixRecord> records;
  records.reserve(base.cell_count() + fc.cell_count);
  for (const auto& key : base.sorted_ngrams()) {
    for (const auto& [f, w] : base.evocations(key)) {
      records.push_back({key, f, w});
    }
  }
  for (const auto& [feature, items] : fc.rows) {
    if (feature.space() != FeatureId::Space::Cooccurrence) {
      throw ArgumentError("feature-to-item input holds non-C: feature '" +
                          feature.str() + "'");
    }
    for (const auto& [item, w] : items) {
      for (const auto& [f, bw] : base.evocations(item)) {
        if (f == feature) {
          throw DuplicateError("cell ('" + item + "', '" + feature.str() +
                               "') present in both inputs");
        }
      }
      records.push_back({item, feature, w});
    }
  }
  return AssociationMatrix::from_records(std::move(records));
}

}  // namespace cbgen
