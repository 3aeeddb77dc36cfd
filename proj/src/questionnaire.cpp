#include "mpsych/questionnaire.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mpsych/error.hpp"
#include "mpsych/special_functions.hpp"

namespace mpsych::questionnaire {
namespace {

// Lowercase, punctuation to spaces, whitespace collapsed and trimmed.
std::string normalize(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'') {
      continue;
    } else {
      pending_space = true;
    }
  }
  return out;
}

bool starts_with_word(std::string_view text, std::string_view prefix) {
  return text.size() >= prefix.size() && text.substr(0, prefix.size()) == prefix &&
         (text.size() == prefix.size() || text[prefix.size()] == ' ');
}

}  // namespace

std::string_view to_string(Phrasing p) {
  return p == Phrasing::original ? "original" : "rephrased";
}

Phrasing parse_phrasing(std::string_view name) {
  if (name == "original") return Phrasing::original;
  if (name == "rephrased") return Phrasing::rephrased;
  throw InputError("unknown phrasing: " + std::string(name));
}

void validate_items(std::span<const QuestionnaireItem> items) {
  if (items.empty()) throw InputError("item bank is empty");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id != static_cast<int>(i) + 1) {
      throw InputError("item ids must be contiguous from 1 (found " +
                       std::to_string(items[i].id) + " at position " + std::to_string(i) + ")");
    }
    if (items[i].original_text.empty() || items[i].rephrased_text.empty()) {
      throw InputError("item " + std::to_string(items[i].id) + " has an empty text");
    }
  }
}

std::vector<QuestionnaireItem> load_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open item bank " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed item bank " + path.string() + ": " + e.what());
  }
  std::vector<QuestionnaireItem> items;
  for (const auto& e : j) {
    items.push_back({e.at("id").get<int>(), e.at("original").get<std::string>(),
                     e.at("rephrased").get<std::string>()});
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  validate_items(items);
  return items;
}

void OptionPermutation::validate() const {
  std::array<bool, 4> seen{};
  for (int k : order) {
    if (k < 0 || k > 3 || seen[static_cast<std::size_t>(k)]) {
      throw InputError("option permutation must contain each option exactly once");
    }
    seen[static_cast<std::size_t>(k)] = true;
  }
}

const std::vector<OptionPermutation>& all_permutations() {
  static const std::vector<OptionPermutation> perms = [] {
    std::vector<OptionPermutation> out;
    std::array<int, 4> order{0, 1, 2, 3};
    do {
      out.push_back({order});
    } while (std::next_permutation(order.begin(), order.end()));
    return out;
  }();
  return perms;
}

std::string render_item(const QuestionnaireItem& item, Phrasing phrasing,
                        const OptionPermutation& perm,
                        std::optional<std::string_view> pre_prompt_block) {
  perm.validate();
  std::string out;
  if (pre_prompt_block && !pre_prompt_block->empty()) {
    out.append(*pre_prompt_block);
    out.append("\n\n");
  }
  out.append(
      "Please answer the following question as honestly as possible by choosing one of the "
      "given options.\n\n");
  out.append("Q: ");
  out.append(item.text(phrasing));
  out.append("\nOptions: ");
  for (std::size_t k = 0; k < perm.order.size(); ++k) {
    if (k > 0) out.append(", ");
    out.append(kCanonicalOptions[static_cast<std::size_t>(perm.order[k])]);
  }
  out.append("\nA:");
  return out;
}

std::optional<int> parse_response(std::string_view raw) {
  const std::string text = normalize(raw);
  if (text.empty()) return std::nullopt;
  for (std::size_t i = 0; i < kCanonicalOptions.size(); ++i) {
    if (text == kCanonicalOptions[i]) return static_cast<int>(i) + 1;
  }
  std::optional<int> match;
  for (std::size_t i = 0; i < kCanonicalOptions.size(); ++i) {
    const std::string_view option = kCanonicalOptions[i];
    const bool leads = starts_with_word(text, option) || option.substr(0, text.size()) == text;
    if (!leads) continue;
    if (match) return std::nullopt;  // ambiguous
    match = static_cast<int>(i) + 1;
  }
  return match;
}

std::optional<int> parse_response(std::string_view raw, const OptionPermutation& perm) {
  perm.validate();
  return parse_response(raw);
}

ScoreSummary score_questionnaire(std::span<const ItemResponse> responses) {
  ScoreSummary s;
  double sum = 0.0;
  for (const auto& r : responses) {
    if (r.score) {
      if (*r.score < 1 || *r.score > 4) throw InputError("score outside 1..4");
      sum += *r.score;
      ++s.n_parsed;
    } else {
      ++s.n_excluded;
    }
  }
  if (s.n_parsed == 0) throw EmptyInputError("no parsed questionnaire responses");
  s.mean = sum / static_cast<double>(s.n_parsed);
  return s;
}

SplitHalfResult split_half_permutation_correlation(std::span<const ItemResponse> responses,
                                                   RandomSource& rng, int n_splits) {
  if (n_splits < 1) throw InputError("need at least one split");
  std::set<int> perm_set;
  for (const auto& r : responses) perm_set.insert(r.permutation_index);
  std::vector<int> perms(perm_set.begin(), perm_set.end());
  if (perms.size() < 2) throw InputError("split-half analysis needs at least two permutations");

  SplitHalfResult res;
  double sum_r = 0.0;
  for (int s = 0; s < n_splits; ++s) {
    stable_shuffle(perms.begin(), perms.end(), rng);
    const std::set<int> first_half(perms.begin(),
                                   perms.begin() + static_cast<std::ptrdiff_t>(perms.size() / 2));
    // item -> (sum, count) for each half
    std::map<int, std::array<double, 4>> acc;
    for (const auto& r : responses) {
      if (!r.score) continue;
      auto& a = acc[r.item_id];
      const std::size_t h = first_half.count(r.permutation_index) ? 0 : 2;
      a[h] += *r.score;
      a[h + 1] += 1.0;
    }
    std::vector<double> xs, ys;
    for (const auto& [item, a] : acc) {
      if (a[1] == 0.0 || a[3] == 0.0) continue;
      xs.push_back(a[0] / a[1]);
      ys.push_back(a[2] / a[3]);
    }
    if (xs.size() < 3) throw InputError("split-half analysis needs at least three items");
    const auto r = stats::pearson(xs, ys);
    res.split_r.push_back(r.estimate);
    sum_r += r.estimate;
    res.n_items = xs.size();
  }
  res.mean_r = sum_r / n_splits;
  const double df = static_cast<double>(res.n_items) - 2.0;
  if (std::fabs(res.mean_r) >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.mean_r * std::sqrt(df / (1.0 - res.mean_r * res.mean_r));
    res.p_value = special::two_sided_p_student(t, df);
  }
  return res;
}

PhrasingComparison compare_phrasings(std::span<const ItemResponse> responses) {
  std::map<int, std::array<double, 4>> acc;
  std::vector<double> orig, reph;
  for (const auto& r : responses) {
    if (!r.score) continue;
    auto& a = acc[r.item_id];
    const std::size_t h = r.phrasing == Phrasing::original ? 0 : 2;
    a[h] += *r.score;
    a[h + 1] += 1.0;
    (r.phrasing == Phrasing::original ? orig : reph).push_back(*r.score);
  }
  std::vector<double> xs, ys;
  for (const auto& [item, a] : acc) {
    if (a[1] == 0.0 || a[3] == 0.0) continue;
    xs.push_back(a[0] / a[1]);
    ys.push_back(a[2] / a[3]);
  }
  PhrasingComparison c;
  c.item_correlation = stats::pearson(xs, ys);
  c.mean_difference = stats::welch_t(orig, reph);
  c.mean_original = stats::mean(orig);
  c.mean_rephrased = stats::mean(reph);
  return c;
}

}  // namespace mpsych::questionnaire
