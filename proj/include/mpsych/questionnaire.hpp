#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpsych/random.hpp"
#include "mpsych/stats.hpp"

namespace mpsych::questionnaire {

enum class Phrasing { original, rephrased };

std::string_view to_string(Phrasing p);
Phrasing parse_phrasing(std::string_view name);

// Canonical Likert options; the score of option i is i + 1.
inline constexpr std::array<std::string_view, 4> kCanonicalOptions = {
    "almost never", "occasionally", "often", "almost always"};

struct QuestionnaireItem {
  int id = 0;
  std::string original_text;
  std::string rephrased_text;

  const std::string& text(Phrasing p) const {
    return p == Phrasing::original ? original_text : rephrased_text;
  }
};

// Ids must run 1..n without gaps and both texts must be non-empty.
void validate_items(std::span<const QuestionnaireItem> items);
std::vector<QuestionnaireItem> load_items(const std::filesystem::path& path);

// order[k] = canonical index of the option shown in position k.
struct OptionPermutation {
  std::array<int, 4> order{0, 1, 2, 3};

  void validate() const;
  bool operator==(const OptionPermutation&) const = default;
};

// All 24 orders, lexicographic in canonical indices; index 0 is canonical.
const std::vector<OptionPermutation>& all_permutations();

// [pre-prompt block, blank line] instruction, "Q:" statement, options in
// presented order, trailing "A:".
std::string render_item(const QuestionnaireItem& item, Phrasing phrasing,
                        const OptionPermutation& perm,
                        std::optional<std::string_view> pre_prompt_block = std::nullopt);

// Canonical score 1..4, or nullopt when the text matches no option or more
// than one. The presentation order does not affect the mapping.
std::optional<int> parse_response(std::string_view raw);
std::optional<int> parse_response(std::string_view raw, const OptionPermutation& perm);

struct ItemResponse {
  int item_id = 0;
  Phrasing phrasing = Phrasing::original;
  int permutation_index = 0;
  std::optional<std::string> pre_prompt_id;
  std::string raw_text;
  std::optional<int> score;  // nullopt = parse failure
};

struct ScoreSummary {
  double mean = 0.0;
  std::size_t n_parsed = 0;
  std::size_t n_excluded = 0;
};

// Mean of parsed scores; parse failures are excluded and counted.
// Throws EmptyInputError when nothing parsed.
ScoreSummary score_questionnaire(std::span<const ItemResponse> responses);

struct SplitHalfResult {
  double mean_r = 0.0;
  double p_value = 1.0;  // of mean_r on n_items - 2 df
  std::size_t n_items = 0;
  std::vector<double> split_r;
};

// Repeatedly splits the permutation indices into two random halves and
// correlates per-item mean scores between halves. Throws
// DegenerateVarianceError when the item means have no spread in a half and
// InputError with fewer than two permutations.
SplitHalfResult split_half_permutation_correlation(std::span<const ItemResponse> responses,
                                                   RandomSource& rng, int n_splits = 100);

struct PhrasingComparison {
  stats::TestResult item_correlation;  // per-item means, original vs rephrased
  stats::TestResult mean_difference;   // Welch t over all parsed scores
  double mean_original = 0.0;
  double mean_rephrased = 0.0;
};

PhrasingComparison compare_phrasings(std::span<const ItemResponse> responses);

}  // namespace mpsych::questionnaire
