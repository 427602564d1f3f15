#include "support/fixtures.hpp"

#include <filesystem>

namespace cbgen::testing {

namespace {

struct SaturnRow {
  const char* ngram;
  double weight;
  long pos;
  long neg;
};

// Training counts for the sci.space pivot, size-320 sample.
constexpr SaturnRow kSaturnRows[] = {
    {"apollo", 8.93, 1, 1},        {"launch pad", 8.52, 0, 0},
    {"rocket", 7.32, 3, 1},        {"rockets", 7.27, 2, 0},
    {"liftoff", 6.92, 1, 0},       {"space shuttle", 6.27, 0, 0},
    {"space station", 6.19, 0, 0}, {"payload", 4.23, 0, 0},
    {"shuttle", 2.57, 2, 0},       {"kennedy", 2.30, 1, 0},
    {"capacity", 1.95, 0, 1},
};

}  // namespace

SupportTable saturn_support_table() {
  SupportTable table;
  table.feature = FeatureId::parse("C:saturn_v");
  table.pivot_class = "sci.space";
  for (const auto& r : kSaturnRows)
    table.rows.push_back({r.ngram, r.weight, r.pos, r.neg});
  return table;
}

AssociationMatrix saturn_matrix() {
  std::vector<MatrixRecord> records;
  FeatureId f = FeatureId::parse("C:saturn_v");
  for (const auto& r : kSaturnRows) records.push_back({r.ngram, f, r.weight});
  return AssociationMatrix::from_records(std::move(records));
}

LabeledCorpus saturn_corpus() {
  LabeledCorpus c;
  auto add = [&c](const char* id, const char* label, const char* text) {
    c.docs.push_back({id, text, label});
  };
  // sci.space: apollo x1, rocket x3, rockets x2, liftoff x1, shuttle x2,
  // kennedy x1. Elsewhere: apollo x1, rocket x1, capacity x1.
  add("s1", "sci.space",
      "the apollo rocket fired, then the rocket rose and a third rocket "
      "followed");
  add("s2", "sci.space", "two rockets and more rockets lifted at liftoff");
  add("s3", "sci.space",
      "the shuttle docked; later the shuttle returned near kennedy");
  add("o1", "talk.misc", "apollo statues stood in the museum hall");
  add("o2", "talk.misc", "a rocket sled and spare capacity were listed");
  c.label_set = {"sci.space", "talk.misc"};
  return c;
}

std::string write_temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("cbgen_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace cbgen::testing
