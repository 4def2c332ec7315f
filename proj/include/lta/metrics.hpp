#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lta/taxonomy.hpp"

namespace lta {

// Optimal string alignment distance: insertions, deletions, substitutions and
// adjacent transpositions, with no substring edited more than once.
template <typename Symbol>
std::size_t damerau_levenshtein(std::span<const Symbol> a, std::span<const Symbol> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      std::size_t best = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        best = std::min(best, prev2[j - 2] + 1);
      cur[j] = best;
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
  }
  return prev[m];
}

template <typename Symbol>
std::size_t damerau_levenshtein(const std::vector<Symbol>& a, const std::vector<Symbol>& b) {
  return damerau_levenshtein(std::span<const Symbol>(a), std::span<const Symbol>(b));
}

// Symbol stream of a label sequence under a mode (action = verb/noun pair).
std::vector<long> project(const ActionSequence& seq, LabelMode mode);

struct EDComponent {
  double value = 0.0;
  std::size_t best_k = 0;
};

struct EDResult {
  EDComponent verb, noun, action;
};

// min_k DL(candidate_k, truth) / Z for one mode.
EDComponent ed_at_z(std::span<const ActionSequence> candidates,
                    const ActionSequence& truth, LabelMode mode);

EDResult ed_at_z(std::span<const ActionSequence> candidates, const ActionSequence& truth);

// curve[t] = min_k DL(prefix_t(candidate_k), prefix_t(truth)) / (t + 1).
std::vector<double> per_horizon_ed(std::span<const ActionSequence> candidates,
                                   const ActionSequence& truth, LabelMode mode);

struct OocRates {
  double verb = 0.0;
  double noun = 0.0;
  std::size_t tokens = 0;
};

// `predictions[i]` are scored against the bag of `intentions[i]`.
OocRates out_of_context_rates(std::span<const ActionSequence> predictions,
                              std::span<const int> intentions, const ContextBags& bags);

// Per-example H3M classification output used for the accuracy split.
struct ClassifiedExample {
  std::vector<std::vector<int>> verb_ranked;  // per clip, best first
  std::vector<std::vector<int>> noun_ranked;
  int predicted_intention = 0;
  ActionSequence truth;
  int true_intention = 0;
};

struct AccuracySplit {
  std::size_t examples = 0;
  double verb_top1 = 0.0, verb_top5 = 0.0;
  double noun_top1 = 0.0, noun_top5 = 0.0;
};

struct AccuracyTable {
  std::optional<AccuracySplit> intention_correct;
  std::optional<AccuracySplit> intention_error;
  double intention_top1 = 0.0;
  std::size_t examples = 0;
};

AccuracyTable accuracy_by_intention_correctness(std::span<const ClassifiedExample> examples);

nlohmann::json to_json(const AccuracyTable& table);

struct MetricsReport {
  std::size_t z = 0;
  double ed_verb = 0.0, ed_noun = 0.0, ed_action = 0.0;
  std::vector<double> curve_verb, curve_noun, curve_action;
  OocRates ooc;
  std::optional<AccuracyTable> accuracy;
  std::size_t n_examples = 0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Aggregates ED@Z, curves and out-of-context rates over examples. OOC rates
// use the per-example ground-truth intention.
MetricsReport evaluate_candidates(std::span<const std::vector<ActionSequence>> candidates,
                                  std::span<const ActionSequence> truths,
                                  std::span<const int> true_intentions,
                                  const ContextBags& bags);

}  // namespace lta
