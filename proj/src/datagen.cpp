#include "lta/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lta/error.hpp"

namespace lta {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kMissingFile, "cannot write " + path.string());
  out << text;
}

std::string padded(const std::string& prefix, int value, int count) {
  const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
  std::string digits = std::to_string(value);
  return prefix + std::string(width - std::min<int>(width, digits.size()), '0') +
         digits;
}

}  // namespace

std::string AnticipationExample::id() const {
  return video_id + "#" + std::to_string(start + static_cast<int>(observed_clips.size()));
}

std::vector<ClipRecord> load_annotations(const fs::path& path,
                                         const Vocabulary* vocab,
                                         Vocabulary* built) {
  const json doc = read_json_file(path);
  if (!doc.is_array()) fail(ErrorCode::kMalformed, "annotations must be a JSON array");

  std::vector<ClipRecord> records;
  records.reserve(doc.size());
  try {
    for (const auto& entry : doc) {
      ClipRecord r;
      r.video_id = entry.at("video_id").get<std::string>();
      r.clip_index = entry.at("clip_index").get<int>();
      r.verb_name = entry.at("verb").get<std::string>();
      r.noun_name = entry.at("noun").get<std::string>();
      r.intention_name = entry.at("intention").get<std::string>();
      r.feature_file = entry.at("feature_file").get<std::string>();
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
  require(!records.empty(), ErrorCode::kEmptyDataset, "empty dataset");

  Vocabulary local;
  if (vocab == nullptr) {
    local = build_vocabulary(records);
    vocab = &local;
  }
  for (auto& r : records) {
    r.label.verb = vocab->verb_id(r.verb_name);
    r.label.noun = vocab->noun_id(r.noun_name);
    r.intention_id = vocab->intention_id(r.intention_name);
  }

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.video_id, a.clip_index) < std::tie(b.video_id, b.clip_index);
  });
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& prev = records[i - 1];
    const auto& cur = records[i];
    if (prev.video_id != cur.video_id) continue;
    if (cur.clip_index != prev.clip_index + 1) {
      fail(ErrorCode::kNonContiguous,
           "video " + cur.video_id + ": clip index " +
               std::to_string(cur.clip_index) + " follows " +
               std::to_string(prev.clip_index));
    }
    if (cur.intention_id != prev.intention_id) {
      fail(ErrorCode::kMalformed,
           "video " + cur.video_id + " changes intention mid-video");
    }
  }
  if (built != nullptr) *built = *vocab;
  return records;
}

FeatureManifest load_manifest(const fs::path& path) {
  const json doc = read_json_file(path);
  FeatureManifest m;
  try {
    m.T = doc.at("T").get<int>();
    m.D = doc.at("D").get<int>();
    m.valid_rows = doc.at("valid_rows").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
  require(m.T > 0 && m.D > 0, ErrorCode::kMalformed, "manifest T and D must be positive");
  return m;
}

ClipFeature load_feature(const fs::path& file, int T, int D, int valid_rows) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open " + file.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  const std::size_t expected = static_cast<std::size_t>(T) * D * sizeof(float);
  if (bytes != expected) {
    fail(ErrorCode::kFeatureShape,
         file.string() + ": expected " + std::to_string(expected) +
             " bytes, found " + std::to_string(bytes));
  }
  require(valid_rows >= 0 && valid_rows <= T, ErrorCode::kFeatureShape,
          file.string() + ": valid_rows outside [0, T]");

  ClipFeature f;
  f.matrix.resize(T, D);
  f.valid_rows = valid_rows;
  in.seekg(0);
  in.read(reinterpret_cast<char*>(f.matrix.data()), static_cast<std::streamsize>(expected));
  if constexpr (std::endian::native == std::endian::big) {
    for (Eigen::Index i = 0; i < f.matrix.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, f.matrix.data() + i, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(f.matrix.data() + i, &bits, 4);
    }
  }
  if (valid_rows < T) f.matrix.bottomRows(T - valid_rows).setZero();
  return f;
}

void save_feature(const fs::path& file, const ClipFeature& feature) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::kMissingFile, "cannot write " + file.string());
  FeatureMatrix m = feature.matrix;
  if constexpr (std::endian::native == std::endian::big) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, m.data() + i, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(m.data() + i, &bits, 4);
    }
  }
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(float)));
}

Dataset load_dataset(const fs::path& dir, const Vocabulary* vocab) {
  Dataset ds;
  if (vocab != nullptr) {
    ds.vocab = *vocab;
  } else if (fs::exists(dir / "vocab.json")) {
    ds.vocab = Vocabulary::from_json(read_json_file(dir / "vocab.json"));
  } else if (fs::exists(dir.parent_path() / "vocab.json")) {
    ds.vocab = Vocabulary::from_json(read_json_file(dir.parent_path() / "vocab.json"));
  }
  const bool have_vocab = ds.vocab.num_verbs() > 0;
  ds.records = load_annotations(dir / "annotations.json",
                                have_vocab ? &ds.vocab : nullptr,
                                have_vocab ? nullptr : &ds.vocab);

  const FeatureManifest manifest = load_manifest(dir / "manifest.json");
  ds.T = manifest.T;
  ds.D = manifest.D;
  ds.features.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    auto it = manifest.valid_rows.find(r.feature_file);
    if (it == manifest.valid_rows.end()) {
      fail(ErrorCode::kMalformed, "manifest has no entry for " + r.feature_file);
    }
    ds.features.push_back(
        load_feature(dir / "features" / r.feature_file, ds.T, ds.D, it->second));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "features");
  json annotations = json::array();
  json valid_rows = json::object();
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    annotations.push_back({{"video_id", r.video_id},
                           {"clip_index", r.clip_index},
                           {"verb", r.verb_name},
                           {"noun", r.noun_name},
                           {"intention", r.intention_name},
                           {"feature_file", r.feature_file}});
    valid_rows[r.feature_file] = dataset.features[i].valid_rows;
    save_feature(dir / "features" / r.feature_file, dataset.features[i]);
  }
  write_text(dir / "annotations.json", annotations.dump(1) + "\n");
  const json manifest = {{"T", dataset.T}, {"D", dataset.D}, {"valid_rows", valid_rows}};
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

std::vector<AnticipationExample> make_windows(const Dataset& dataset, int N,
                                              int Z, int stride) {
  require(N >= 1 && Z >= 1, ErrorCode::kInvalidArgument, "N and Z must be >= 1");
  require(stride >= 1, ErrorCode::kInvalidArgument, "stride must be >= 1");
  std::vector<AnticipationExample> out;
  const auto& recs = dataset.records;
  std::size_t begin = 0;
  while (begin < recs.size()) {
    std::size_t end = begin;
    while (end < recs.size() && recs[end].video_id == recs[begin].video_id) ++end;
    const int len = static_cast<int>(end - begin);
    for (int i = 0; i + N + Z <= len; i += stride) {
      AnticipationExample ex;
      ex.video_id = recs[begin].video_id;
      ex.start = recs[begin].clip_index + i;
      ex.intention = recs[begin].intention_id;
      for (int t = 0; t < N; ++t) {
        const std::size_t idx = begin + i + t;
        ex.observed_clips.push_back(idx);
        ex.observed_actions.push_back(recs[idx].label);
      }
      for (int t = 0; t < Z; ++t) {
        ex.future_actions.push_back(recs[begin + i + N + t].label);
      }
      out.push_back(std::move(ex));
    }
    begin = end;
  }
  return out;
}

ContextBags build_context_bags(const std::vector<AnticipationExample>& examples,
                               const Vocabulary& vocab) {
  ContextBags bags(vocab.num_intentions(), vocab.num_verbs(), vocab.num_nouns());
  for (const auto& ex : examples) {
    for (const auto& a : ex.observed_actions) bags.add(ex.intention, a);
    for (const auto& a : ex.future_actions) bags.add(ex.intention, a);
  }
  return bags;
}

Eigen::MatrixXd to_double(const ClipFeature& feature) {
  return feature.matrix.cast<double>();
}

// --- synthetic grammar --------------------------------------------------------

void GrammarConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kInvalidArgument, "grammar: " + what);
  };
  check(num_intentions >= 1 && num_verbs >= 1 && num_nouns >= 1,
        "vocabulary sizes must be positive");
  check(noun_bag_size >= 1 && noun_bag_size <= num_nouns, "noun_bag_size out of range");
  check(motifs_per_intention >= 1, "motifs_per_intention must be >= 1");
  check(motif_min_length >= 3 && motif_max_length <= 6 &&
            motif_min_length <= motif_max_length,
        "motif lengths must lie in [3, 6]");
  check(noun_persistence >= 1.0, "noun_persistence must be >= 1");
  check(video_length_min >= 1 && video_length_min <= video_length_max,
        "video length range invalid");
  check(T >= 1 && feature_dim >= 1, "feature shape must be positive");
  check(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  check(train_windows >= 0 && eval_windows >= 0 && window_length >= 1,
        "window targets invalid");
  check(train_windows == 0 || video_length_max >= window_length,
        "videos too short for any window");
  if (!motifs.empty()) {
    check(static_cast<int>(motifs.size()) == num_intentions, "motifs per intention");
    for (const auto& per : motifs) {
      check(!per.empty(), "each intention needs a motif");
      for (const auto& m : per) {
        check(m.size() >= 3 && m.size() <= 6, "motif lengths must lie in [3, 6]");
        for (int v : m) check(v >= 0 && v < num_verbs, "motif verb out of range");
      }
    }
  }
  if (!noun_bags.empty()) {
    check(static_cast<int>(noun_bags.size()) == num_intentions, "noun bag per intention");
    for (const auto& bag : noun_bags) {
      check(!bag.empty(), "noun bags must be non-empty");
      for (int n : bag) check(n >= 0 && n < num_nouns, "bag noun out of range");
    }
  }
}

json GrammarConfig::to_json() const {
  return {{"num_intentions", num_intentions},
          {"num_verbs", num_verbs},
          {"num_nouns", num_nouns},
          {"noun_bag_size", noun_bag_size},
          {"motifs_per_intention", motifs_per_intention},
          {"motif_min_length", motif_min_length},
          {"motif_max_length", motif_max_length},
          {"noun_persistence", noun_persistence},
          {"video_length_min", video_length_min},
          {"video_length_max", video_length_max},
          {"T", T},
          {"feature_dim", feature_dim},
          {"noise_sigma", noise_sigma},
          {"train_windows", train_windows},
          {"eval_windows", eval_windows},
          {"window_length", window_length},
          {"seed", seed},
          {"motifs", motifs},
          {"noun_bags", noun_bags}};
}

GrammarConfig GrammarConfig::from_json(const json& j) {
  GrammarConfig c;
  if (!j.is_object()) fail(ErrorCode::kMalformed, "grammar config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_intentions") c.num_intentions = value.get<int>();
      else if (key == "num_verbs") c.num_verbs = value.get<int>();
      else if (key == "num_nouns") c.num_nouns = value.get<int>();
      else if (key == "noun_bag_size") c.noun_bag_size = value.get<int>();
      else if (key == "motifs_per_intention") c.motifs_per_intention = value.get<int>();
      else if (key == "motif_min_length") c.motif_min_length = value.get<int>();
      else if (key == "motif_max_length") c.motif_max_length = value.get<int>();
      else if (key == "noun_persistence") c.noun_persistence = value.get<double>();
      else if (key == "video_length_min") c.video_length_min = value.get<int>();
      else if (key == "video_length_max") c.video_length_max = value.get<int>();
      else if (key == "T") c.T = value.get<int>();
      else if (key == "feature_dim") c.feature_dim = value.get<int>();
      else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
      else if (key == "train_windows") c.train_windows = value.get<int>();
      else if (key == "eval_windows") c.eval_windows = value.get<int>();
      else if (key == "window_length") c.window_length = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "motifs") c.motifs = value.get<decltype(c.motifs)>();
      else if (key == "noun_bags") c.noun_bags = value.get<decltype(c.noun_bags)>();
      else fail(ErrorCode::kInvalidArgument, "grammar: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("grammar: ") + e.what());
  }
  c.validate();
  return c;
}

Grammar resolve_grammar(const GrammarConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "grammar"));
  Grammar g;

  if (!config.motifs.empty()) {
    g.motifs = config.motifs;
  } else {
    const int max_len = std::min(config.motif_max_length, config.num_verbs);
    const int min_len = std::min(config.motif_min_length, max_len);
    g.motifs.resize(config.num_intentions);
    for (auto& per : g.motifs) {
      for (int m = 0; m < config.motifs_per_intention; ++m) {
        const int len = static_cast<int>(rng.uniform_int(min_len, max_len));
        std::vector<int> verbs(config.num_verbs);
        std::iota(verbs.begin(), verbs.end(), 0);
        // Partial Fisher-Yates: distinct verbs within one motif.
        for (int i = 0; i < len; ++i) {
          const auto j = rng.uniform_int(i, config.num_verbs - 1);
          std::swap(verbs[i], verbs[j]);
        }
        per.emplace_back(verbs.begin(), verbs.begin() + len);
      }
    }
  }

  if (!config.noun_bags.empty()) {
    g.noun_bags = config.noun_bags;
  } else {
    // Deal a shuffled noun list round-robin so every noun lands in some bag
    // when capacity allows, then top each bag up with random extra nouns.
    std::vector<int> nouns(config.num_nouns);
    std::iota(nouns.begin(), nouns.end(), 0);
    for (int i = config.num_nouns - 1; i > 0; --i) {
      std::swap(nouns[i], nouns[rng.uniform_int(0, i)]);
    }
    g.noun_bags.assign(config.num_intentions, {});
    const int dealt = std::min(config.num_nouns,
                               config.num_intentions * config.noun_bag_size);
    for (int k = 0; k < dealt; ++k) {
      g.noun_bags[k % config.num_intentions].push_back(nouns[k]);
    }
    for (auto& bag : g.noun_bags) {
      while (static_cast<int>(bag.size()) < config.noun_bag_size) {
        const int n = static_cast<int>(rng.uniform_int(0, config.num_nouns - 1));
        if (std::find(bag.begin(), bag.end(), n) == bag.end()) bag.push_back(n);
      }
      std::sort(bag.begin(), bag.end());
    }
  }
  return g;
}

Eigen::RowVectorXd PrototypeTable::prototype(const ActionLabel& action) const {
  if (action.verb < 0 || action.verb >= verb_part.rows() || action.noun < 0 ||
      action.noun >= noun_part.rows()) {
    fail(ErrorCode::kInvalidArgument, "no prototype for action (" +
                                          std::to_string(action.verb) + "," +
                                          std::to_string(action.noun) + ")");
  }
  return (verb_part.row(action.verb) + noun_part.row(action.noun)) / std::sqrt(2.0);
}

ClipFeature synth_features(const ActionLabel& action,
                           const PrototypeTable& prototypes, int T,
                           double noise_sigma, Rng& rng) {
  const Eigen::RowVectorXd proto = prototypes.prototype(action);
  ClipFeature f;
  f.matrix = FeatureMatrix::Zero(T, prototypes.dim());
  f.valid_rows = static_cast<int>(rng.uniform_int((T + 1) / 2, T));
  for (int t = 0; t < f.valid_rows; ++t) {
    for (int c = 0; c < prototypes.dim(); ++c) {
      const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
      f.matrix(t, c) = static_cast<float>(proto(c) + noise);
    }
  }
  return f;
}

namespace {

// Emits one video's label sequence by walking the grammar.
std::vector<ActionLabel> walk_video(const GrammarConfig& config, const Grammar& g,
                                    int intention, int length, Rng& rng) {
  std::vector<ActionLabel> labels;
  labels.reserve(length);
  const double p_switch = 1.0 / config.noun_persistence;
  const auto& bag = g.noun_bags[intention];
  const auto& motifs = g.motifs[intention];
  while (static_cast<int>(labels.size()) < length) {
    const int noun = bag[rng.uniform_int(0, static_cast<int>(bag.size()) - 1)];
    const std::int64_t hold = rng.geometric(p_switch);
    const auto& motif = motifs[rng.uniform_int(0, static_cast<int>(motifs.size()) - 1)];
    for (std::int64_t k = 0; k < hold && static_cast<int>(labels.size()) < length; ++k) {
      labels.push_back({motif[k % motif.size()], noun});
    }
  }
  return labels;
}

Dataset generate_split(const GrammarConfig& config, const SyntheticData& data,
                       const std::string& prefix, int target_windows, int stride,
                       std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.vocab = data.vocab;
  ds.T = config.T;
  ds.D = config.feature_dim;

  struct Video {
    int intention;
    std::vector<ActionLabel> labels;
  };
  std::vector<Video> videos;
  int windows = 0;
  while (windows < target_windows) {
    Video v;
    v.intention = static_cast<int>(rng.uniform_int(0, config.num_intentions - 1));
    const int len = static_cast<int>(
        rng.uniform_int(config.video_length_min, config.video_length_max));
    v.labels = walk_video(config, data.grammar, v.intention, len, rng);
    if (len >= config.window_length) {
      windows += (len - config.window_length) / stride + 1;
    }
    videos.push_back(std::move(v));
  }
  if (target_windows == 0) {
    Video v;
    v.intention = static_cast<int>(rng.uniform_int(0, config.num_intentions - 1));
    const int len = static_cast<int>(
        rng.uniform_int(config.video_length_min, config.video_length_max));
    v.labels = walk_video(config, data.grammar, v.intention, len, rng);
    videos.push_back(std::move(v));
  }

  const auto& vocab = data.vocab;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const std::string video_id =
        padded(prefix + "_", static_cast<int>(vi), static_cast<int>(videos.size()));
    for (std::size_t t = 0; t < videos[vi].labels.size(); ++t) {
      ClipRecord r;
      r.video_id = video_id;
      r.clip_index = static_cast<int>(t);
      r.label = videos[vi].labels[t];
      r.intention_id = videos[vi].intention;
      r.verb_name = vocab.verbs()[r.label.verb];
      r.noun_name = vocab.nouns()[r.label.noun];
      r.intention_name = vocab.intentions()[r.intention_id];
      r.feature_file = padded(video_id + "_", r.clip_index, 1000) + ".bin";
      ds.features.push_back(synth_features(r.label, data.prototypes, config.T,
                                           config.noise_sigma, rng));
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace

SyntheticData synth_generate(const GrammarConfig& config) {
  config.validate();
  SyntheticData data;
  std::vector<std::string> verbs, nouns, intentions;
  for (int i = 0; i < config.num_verbs; ++i) verbs.push_back(padded("v", i, config.num_verbs));
  for (int i = 0; i < config.num_nouns; ++i) nouns.push_back(padded("n", i, config.num_nouns));
  for (int i = 0; i < config.num_intentions; ++i)
    intentions.push_back(padded("i", i, config.num_intentions));
  data.vocab = Vocabulary(verbs, nouns, intentions);
  data.grammar = resolve_grammar(config);

  Rng proto_rng(derive_seed(config.seed, "prototypes"));
  data.prototypes.verb_part.resize(config.num_verbs, config.feature_dim);
  data.prototypes.noun_part.resize(config.num_nouns, config.feature_dim);
  for (Eigen::Index i = 0; i < data.prototypes.verb_part.size(); ++i)
    data.prototypes.verb_part.data()[i] = proto_rng.normal();
  for (Eigen::Index i = 0; i < data.prototypes.noun_part.size(); ++i)
    data.prototypes.noun_part.data()[i] = proto_rng.normal();

  data.train = generate_split(config, data, "train", config.train_windows, 1,
                              derive_seed(config.seed, "train"));
  data.eval = generate_split(config, data, "eval", config.eval_windows,
                             config.window_length, derive_seed(config.seed, "eval"));
  return data;
}

void write_synthetic(const SyntheticData& data, const GrammarConfig& config,
                     const fs::path& root) {
  fs::create_directories(root);
  write_text(root / "vocab.json", data.vocab.to_json().dump(1) + "\n");
  json grammar = config.to_json();
  grammar["motifs"] = data.grammar.motifs;
  grammar["noun_bags"] = data.grammar.noun_bags;
  write_text(root / "grammar.json", grammar.dump(1) + "\n");
  write_dataset(data.train, root / "train");
  write_dataset(data.eval, root / "eval");
}

}  // namespace lta
