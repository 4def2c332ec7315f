#include "lta/metrics.hpp"

#include <algorithm>
#include <limits>

#include "lta/error.hpp"

namespace lta {

using nlohmann::json;

std::vector<long> project(const ActionSequence& seq, LabelMode mode) {
  std::vector<long> out;
  out.reserve(seq.size());
  for (const auto& a : seq) {
    switch (mode) {
      case LabelMode::kVerb: out.push_back(a.verb); break;
      case LabelMode::kNoun: out.push_back(a.noun); break;
      case LabelMode::kAction:
        out.push_back((static_cast<long>(a.verb) << 32) | static_cast<unsigned>(a.noun));
        break;
    }
  }
  return out;
}

namespace {

void check_candidates(std::span<const ActionSequence> candidates,
                      const ActionSequence& truth) {
  require(!candidates.empty(), ErrorCode::kInvalidArgument, "K must be >= 1");
  require(!truth.empty(), ErrorCode::kInvalidArgument, "Z must be >= 1");
  for (const auto& c : candidates) {
    require(c.size() == truth.size(), ErrorCode::kShapeMismatch,
            "candidate length " + std::to_string(c.size()) + " != truth length " +
                std::to_string(truth.size()));
  }
}

}  // namespace

EDComponent ed_at_z(std::span<const ActionSequence> candidates,
                    const ActionSequence& truth, LabelMode mode) {
  check_candidates(candidates, truth);
  const auto t = project(truth, mode);
  EDComponent best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double d = static_cast<double>(damerau_levenshtein(project(candidates[k], mode), t)) /
                     static_cast<double>(truth.size());
    if (d < best.value) best = {d, k};
  }
  return best;
}

EDResult ed_at_z(std::span<const ActionSequence> candidates, const ActionSequence& truth) {
  return {ed_at_z(candidates, truth, LabelMode::kVerb),
          ed_at_z(candidates, truth, LabelMode::kNoun),
          ed_at_z(candidates, truth, LabelMode::kAction)};
}

std::vector<double> per_horizon_ed(std::span<const ActionSequence> candidates,
                                   const ActionSequence& truth, LabelMode mode) {
  check_candidates(candidates, truth);
  const auto t = project(truth, mode);
  std::vector<std::vector<long>> cands;
  for (const auto& c : candidates) cands.push_back(project(c, mode));
  std::vector<double> curve(truth.size());
  for (std::size_t h = 0; h < truth.size(); ++h) {
    const std::span<const long> tp(t.data(), h + 1);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& c : cands)
      best = std::min(best, damerau_levenshtein(std::span<const long>(c.data(), h + 1), tp));
    curve[h] = static_cast<double>(best) / static_cast<double>(h + 1);
  }
  return curve;
}

OocRates out_of_context_rates(std::span<const ActionSequence> predictions,
                              std::span<const int> intentions, const ContextBags& bags) {
  require(predictions.size() == intentions.size(), ErrorCode::kShapeMismatch,
          "one intention per prediction required");
  std::size_t verb_out = 0, noun_out = 0, total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(intentions[i] >= 0 &&
                static_cast<std::size_t>(intentions[i]) < bags.num_intentions(),
            ErrorCode::kInvalidArgument,
            "no context bag for intention " + std::to_string(intentions[i]));
    for (const auto& a : predictions[i]) {
      verb_out += is_out_of_context(a, intentions[i], bags, LabelMode::kVerb) ? 1 : 0;
      noun_out += is_out_of_context(a, intentions[i], bags, LabelMode::kNoun) ? 1 : 0;
      ++total;
    }
  }
  OocRates r;
  r.tokens = total;
  if (total > 0) {
    r.verb = static_cast<double>(verb_out) / static_cast<double>(total);
    r.noun = static_cast<double>(noun_out) / static_cast<double>(total);
  }
  return r;
}

AccuracyTable accuracy_by_intention_correctness(std::span<const ClassifiedExample> examples) {
  struct Tally {
    std::size_t examples = 0, clips = 0;
    std::size_t v1 = 0, v5 = 0, n1 = 0, n5 = 0;
  } right, wrong;
  std::size_t intention_hits = 0;

  for (const auto& ex : examples) {
    require(ex.verb_ranked.size() == ex.truth.size() &&
                ex.noun_ranked.size() == ex.truth.size(),
            ErrorCode::kShapeMismatch, "prediction/truth length mismatch");
    const bool hit = ex.predicted_intention == ex.true_intention;
    intention_hits += hit ? 1 : 0;
    Tally& t = hit ? right : wrong;
    ++t.examples;
    for (std::size_t c = 0; c < ex.truth.size(); ++c) {
      const auto& vr = ex.verb_ranked[c];
      const auto& nr = ex.noun_ranked[c];
      const auto in_top = [](const std::vector<int>& ranked, int target, std::size_t k) {
        const auto end = ranked.begin() + static_cast<long>(std::min(k, ranked.size()));
        return std::find(ranked.begin(), end, target) != end;
      };
      t.v1 += in_top(vr, ex.truth[c].verb, 1) ? 1 : 0;
      t.v5 += in_top(vr, ex.truth[c].verb, 5) ? 1 : 0;
      t.n1 += in_top(nr, ex.truth[c].noun, 1) ? 1 : 0;
      t.n5 += in_top(nr, ex.truth[c].noun, 5) ? 1 : 0;
      ++t.clips;
    }
  }

  auto finish = [](const Tally& t) -> std::optional<AccuracySplit> {
    if (t.examples == 0) return std::nullopt;
    const double c = t.clips > 0 ? static_cast<double>(t.clips) : 1.0;
    return AccuracySplit{t.examples, t.v1 / c, t.v5 / c, t.n1 / c, t.n5 / c};
  };
  AccuracyTable table;
  table.intention_correct = finish(right);
  table.intention_error = finish(wrong);
  table.examples = examples.size();
  if (!examples.empty())
    table.intention_top1 = static_cast<double>(intention_hits) / examples.size();
  return table;
}

json to_json(const AccuracyTable& table) {
  auto split = [](const AccuracySplit& s) {
    return json{{"n", s.examples},
                {"verb_top1", s.verb_top1},
                {"verb_top5", s.verb_top5},
                {"noun_top1", s.noun_top1},
                {"noun_top5", s.noun_top5}};
  };
  json j = {{"intention_top1", table.intention_top1}, {"n", table.examples}};
  if (table.intention_correct) j["intention_correct"] = split(*table.intention_correct);
  if (table.intention_error) j["intention_error"] = split(*table.intention_error);
  return j;
}

json MetricsReport::to_json() const {
  return {{"ed20", {{"verb", ed_verb}, {"noun", ed_noun}, {"action", ed_action}}},
          {"curves", {{"verb", curve_verb}, {"noun", curve_noun}, {"action", curve_action}}},
          {"ooc", {{"verb", ooc.verb}, {"noun", ooc.noun}}},
          {"accuracy", accuracy ? lta::to_json(*accuracy) : json::object()},
          {"n_examples", n_examples},
          {"config", config}};
}

MetricsReport evaluate_candidates(std::span<const std::vector<ActionSequence>> candidates,
                                  std::span<const ActionSequence> truths,
                                  std::span<const int> true_intentions,
                                  const ContextBags& bags) {
  require(candidates.size() == truths.size() && truths.size() == true_intentions.size(),
          ErrorCode::kShapeMismatch, "candidates, truths and intentions must align");
  require(!truths.empty(), ErrorCode::kEmptyEvaluation, "empty evaluation set");
  MetricsReport r;
  r.z = truths[0].size();
  r.n_examples = truths.size();
  r.curve_verb.assign(r.z, 0.0);
  r.curve_noun.assign(r.z, 0.0);
  r.curve_action.assign(r.z, 0.0);

  std::vector<ActionSequence> flat;
  std::vector<int> flat_intentions;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    require(truths[i].size() == r.z, ErrorCode::kShapeMismatch,
            "all truths must share one horizon Z");
    const EDResult ed = ed_at_z(candidates[i], truths[i]);
    r.ed_verb += ed.verb.value;
    r.ed_noun += ed.noun.value;
    r.ed_action += ed.action.value;
    const auto add_curve = [&](std::vector<double>& acc, LabelMode mode) {
      const auto c = per_horizon_ed(candidates[i], truths[i], mode);
      for (std::size_t t = 0; t < r.z; ++t) acc[t] += c[t];
    };
    add_curve(r.curve_verb, LabelMode::kVerb);
    add_curve(r.curve_noun, LabelMode::kNoun);
    add_curve(r.curve_action, LabelMode::kAction);
    for (const auto& c : candidates[i]) {
      flat.push_back(c);
      flat_intentions.push_back(true_intentions[i]);
    }
  }
  const double n = static_cast<double>(truths.size());
  r.ed_verb /= n;
  r.ed_noun /= n;
  r.ed_action /= n;
  for (auto* curve : {&r.curve_verb, &r.curve_noun, &r.curve_action})
    for (double& v : *curve) v /= n;
  r.ooc = out_of_context_rates(flat, flat_intentions, bags);
  return r;
}

}  // namespace lta
