#include "lta/taxonomy.hpp"

#include <algorithm>

#include "lta/datagen.hpp"
#include "lta/error.hpp"

namespace lta {

namespace {

std::unordered_map<std::string, int> index_names(
    const std::vector<std::string>& names, const char* what) {
  std::unordered_map<std::string, int> ids;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!ids.emplace(names[i], static_cast<int>(i)).second) {
      fail(ErrorCode::kInvalidArgument,
           std::string("duplicate ") + what + " name '" + names[i] + "'");
    }
  }
  return ids;
}

int lookup(const std::unordered_map<std::string, int>& ids,
           const std::string& name, const char* what) {
  auto it = ids.find(name);
  if (it == ids.end()) {
    fail(ErrorCode::kUnknownLabel,
         std::string("unknown ") + what + " '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> sorted_distinct(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> verbs,
                       std::vector<std::string> nouns,
                       std::vector<std::string> intentions)
    : verbs_(std::move(verbs)),
      nouns_(std::move(nouns)),
      intentions_(std::move(intentions)) {
  require(!verbs_.empty() && !nouns_.empty() && !intentions_.empty(),
          ErrorCode::kInvalidArgument, "vocabulary lists must be non-empty");
  index();
}

void Vocabulary::index() {
  verb_ids_ = index_names(verbs_, "verb");
  noun_ids_ = index_names(nouns_, "noun");
  intention_ids_ = index_names(intentions_, "intention");
}

int Vocabulary::verb_id(const std::string& name) const {
  return lookup(verb_ids_, name, "verb");
}
int Vocabulary::noun_id(const std::string& name) const {
  return lookup(noun_ids_, name, "noun");
}
int Vocabulary::intention_id(const std::string& name) const {
  return lookup(intention_ids_, name, "intention");
}

nlohmann::json Vocabulary::to_json() const {
  return {{"verbs", verbs_}, {"nouns", nouns_}, {"intentions", intentions_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  try {
    return Vocabulary(j.at("verbs").get<std::vector<std::string>>(),
                      j.at("nouns").get<std::vector<std::string>>(),
                      j.at("intentions").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("vocabulary: ") + e.what());
  }
}

bool is_valid(const ActionLabel& label, const Vocabulary& vocab) {
  return label.verb >= 0 && label.noun >= 0 &&
         static_cast<std::size_t>(label.verb) < vocab.num_verbs() &&
         static_cast<std::size_t>(label.noun) < vocab.num_nouns();
}

const char* to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::kVerb: return "verb";
    case LabelMode::kNoun: return "noun";
    case LabelMode::kAction: return "action";
  }
  return "?";
}

ContextBags::ContextBags(std::size_t num_intentions, std::size_t num_verbs,
                         std::size_t num_nouns)
    : num_verbs_(num_verbs),
      num_nouns_(num_nouns),
      verb_bags_(num_intentions),
      noun_bags_(num_intentions) {}

void ContextBags::check_intention(int intention) const {
  if (intention < 0 || static_cast<std::size_t>(intention) >= verb_bags_.size())
    fail(ErrorCode::kInvalidArgument,
         "unknown intention id " + std::to_string(intention));
}

void ContextBags::add(int intention, const ActionLabel& label) {
  check_intention(intention);
  require(label.verb >= 0 && static_cast<std::size_t>(label.verb) < num_verbs_ &&
              label.noun >= 0 &&
              static_cast<std::size_t>(label.noun) < num_nouns_,
          ErrorCode::kInvalidArgument, "label out of vocabulary range");
  verb_bags_[intention].insert(label.verb);
  noun_bags_[intention].insert(label.noun);
}

const std::set<int>& ContextBags::verbs(int intention) const {
  check_intention(intention);
  return verb_bags_[intention];
}

const std::set<int>& ContextBags::nouns(int intention) const {
  check_intention(intention);
  return noun_bags_[intention];
}

Vocabulary build_vocabulary(const std::vector<ClipRecord>& records) {
  require(!records.empty(), ErrorCode::kEmptyDataset, "empty dataset");
  std::vector<std::string> verbs, nouns, intentions;
  for (const auto& r : records) {
    verbs.push_back(r.verb_name);
    nouns.push_back(r.noun_name);
    intentions.push_back(r.intention_name);
  }
  return Vocabulary(sorted_distinct(std::move(verbs)),
                    sorted_distinct(std::move(nouns)),
                    sorted_distinct(std::move(intentions)));
}

ContextBags build_context_bags(const std::vector<ClipRecord>& records,
                               const Vocabulary& vocab) {
  ContextBags bags(vocab.num_intentions(), vocab.num_verbs(),
                   vocab.num_nouns());
  for (const auto& r : records) bags.add(r.intention_id, r.label);
  return bags;
}

bool is_out_of_context(const ActionLabel& label, int intention,
                       const ContextBags& bags, LabelMode mode) {
  switch (mode) {
    case LabelMode::kVerb: return !bags.verbs(intention).contains(label.verb);
    case LabelMode::kNoun: return !bags.nouns(intention).contains(label.noun);
    case LabelMode::kAction: break;
  }
  fail(ErrorCode::kInvalidArgument, "out-of-context mode must be verb or noun");
}

}  // namespace lta
