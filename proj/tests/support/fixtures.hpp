#ifndef CBGEN_TESTS_FIXTURES_HPP
#define CBGEN_TESTS_FIXTURES_HPP

#include <string>

#include "cbgen/association_matrix.hpp"
#include "cbgen/corpus.hpp"
#include "cbgen/feature_select.hpp"

namespace cbgen::testing {

// The saturn-v worked example: eleven n-grams evoking one co-occurrence
// feature, with their training counts inside/outside the pivot class.
SupportTable saturn_support_table();

// Matrix holding exactly the eleven evoking n-grams of the worked example.
AssociationMatrix saturn_matrix();

// A five-document corpus whose token counts reproduce the worked example's
// training columns (n-grams with zero training count do not occur).
LabeledCorpus saturn_corpus();

// Writes the saturn matrix/corpus as files for CLI-level tests.
std::string write_temp_dir(const std::string& tag);

}  // namespace cbgen::testing

#endif  // CBGEN_TESTS_FIXTURES_HPP
