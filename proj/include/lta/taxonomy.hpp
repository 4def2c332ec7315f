#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace lta {

struct ClipRecord;

// Ordered name tables for verbs, nouns and intentions. Ids are positions.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> verbs, std::vector<std::string> nouns,
             std::vector<std::string> intentions);

  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::vector<std::string>& nouns() const { return nouns_; }
  const std::vector<std::string>& intentions() const { return intentions_; }

  std::size_t num_verbs() const { return verbs_.size(); }
  std::size_t num_nouns() const { return nouns_.size(); }
  std::size_t num_intentions() const { return intentions_.size(); }

  // Throws ErrorCode::kUnknownLabel for names not in the table.
  int verb_id(const std::string& name) const;
  int noun_id(const std::string& name) const;
  int intention_id(const std::string& name) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.verbs_ == b.verbs_ && a.nouns_ == b.nouns_ &&
           a.intentions_ == b.intentions_;
  }

 private:
  void index();

  std::vector<std::string> verbs_, nouns_, intentions_;
  std::unordered_map<std::string, int> verb_ids_, noun_ids_, intention_ids_;
};

struct ActionLabel {
  int verb = 0;
  int noun = 0;

  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
  friend auto operator<=>(const ActionLabel&, const ActionLabel&) = default;
};

using ActionSequence = std::vector<ActionLabel>;

bool is_valid(const ActionLabel& label, const Vocabulary& vocab);

enum class LabelMode { kVerb, kNoun, kAction };

const char* to_string(LabelMode mode);

// Per-intention sets of verb and noun ids seen in a dataset.
class ContextBags {
 public:
  ContextBags() = default;
  ContextBags(std::size_t num_intentions, std::size_t num_verbs,
              std::size_t num_nouns);

  void add(int intention, const ActionLabel& label);

  const std::set<int>& verbs(int intention) const;
  const std::set<int>& nouns(int intention) const;
  std::size_t num_intentions() const { return verb_bags_.size(); }

 private:
  void check_intention(int intention) const;

  std::size_t num_verbs_ = 0, num_nouns_ = 0;
  std::vector<std::set<int>> verb_bags_, noun_bags_;
};

// Distinct names in the records, each list sorted lexicographically.
// The record names are those carried by ClipRecord::verb_name etc.
Vocabulary build_vocabulary(const std::vector<ClipRecord>& records);

ContextBags build_context_bags(const std::vector<ClipRecord>& records,
                               const Vocabulary& vocab);

// LabelMode::kAction is not meaningful here and throws.
bool is_out_of_context(const ActionLabel& label, int intention,
                       const ContextBags& bags, LabelMode mode);

}  // namespace lta
