#include "icred/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "icred/errors.hpp"
#include "icred/rng.hpp"

using nlohmann::json;

namespace icred {

std::vector<std::string> ContextInstance::interlocutors() const {
  std::vector<std::string> out;
  auto push = [&](const std::string& id) {
    if (!id.empty() && std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  for (const auto& t : turns) {
    push(t.speaker);
    push(t.addressee);
  }
  // valid instances already cover these two; covering them here as well lets
  // the model evaluate flagged instances whose participants only observe
  push(responding_speaker);
  push(target_addressee);
  return out;
}

void validate_instance(const ContextInstance& inst, std::size_t window) {
  if (inst.turns.empty()) throw ContractError("instance has no context turns");
  if (inst.turns.size() > window) {
    throw ContractError("context longer than window: " + std::to_string(inst.turns.size()));
  }
  for (const auto& t : inst.turns) {
    if (t.speaker.empty()) throw ContractError("turn with empty speaker");
    if (t.tokens.empty()) throw ContractError("turn with no tokens");
    if (t.has_addressee() && t.addressee == t.speaker) {
      throw ContractError("turn where speaker addresses themselves: " + t.speaker);
    }
  }
  if (inst.response.empty()) throw ContractError("instance with empty response");
  if (inst.responding_speaker == inst.target_addressee) {
    throw ContractError("responding speaker equals target addressee: " +
                        inst.responding_speaker);
  }
  auto appears = [&](const std::string& id) {
    for (const auto& t : inst.turns) {
      if (t.speaker == id || t.addressee == id) return true;
    }
    return false;
  };
  if (!appears(inst.responding_speaker)) {
    throw ContractError("responding speaker " + inst.responding_speaker + " not in context");
  }
  if (!appears(inst.target_addressee)) {
    throw ContractError("target addressee " + inst.target_addressee + " not in context");
  }
}

int Vocabulary::id(const std::string& w) const {
  auto it = index.find(w);
  return it == index.end() ? kUnk : it->second;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& plain_words) {
  Vocabulary v;
  v.words = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (const auto& w : plain_words) v.words.push_back(w);
  for (std::size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);
  if (v.index.size() != v.words.size()) throw ContractError("duplicate word in vocabulary");
  return v;
}

Vocabulary Vocabulary::build(const std::vector<ContextInstance>& instances,
                             std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  for (const auto& inst : instances) {
    for (const auto& t : inst.turns) {
      for (const auto& w : t.tokens) ++freq[w];
    }
    for (const auto& w : inst.response) ++freq[w];
  }
  std::vector<std::pair<std::string, std::size_t>> order(freq.begin(), freq.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_words > 0 && order.size() > max_words) order.resize(max_words);
  std::vector<std::string> plain;
  plain.reserve(order.size());
  for (const auto& [w, _] : order) plain.push_back(w);
  return from_words(plain);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary: " + path);
  for (std::size_t i = 4; i < words.size(); ++i) out << words[i] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary: " + path);
  std::vector<std::string> plain;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) plain.push_back(line);
  }
  return from_words(plain);
}

CorpusStats corpus_stats(const std::vector<ContextInstance>& instances) {
  if (instances.empty()) throw DomainError("corpus_stats: empty instance list");
  CorpusStats s;
  s.contexts = instances.size();
  std::set<std::string> speakers, addressees, vocab;
  std::size_t ctx_tokens = 0, res_tokens = 0;
  for (const auto& inst : instances) {
    speakers.insert(inst.responding_speaker);
    addressees.insert(inst.target_addressee);
    bool tgt_spoke = false;
    for (const auto& t : inst.turns) {
      speakers.insert(t.speaker);
      if (t.has_addressee()) addressees.insert(t.addressee);
      ctx_tokens += t.tokens.size();
      for (const auto& w : t.tokens) vocab.insert(w);
      if (t.speaker == inst.target_addressee) tgt_spoke = true;
    }
    res_tokens += inst.response.size();
    for (const auto& w : inst.response) vocab.insert(w);
    if (!tgt_spoke) ++s.addressee_never_spoke;
  }
  s.speakers = speakers.size();
  s.addressees = addressees.size();
  s.vocab = vocab.size();
  s.tokens = ctx_tokens + res_tokens;
  s.avg_tokens_per_context = static_cast<double>(ctx_tokens) / static_cast<double>(s.contexts);
  s.avg_tokens_per_response = static_cast<double>(res_tokens) / static_cast<double>(s.contexts);
  return s;
}

// ---------------------------------------------------------------------------

ParsedLog parse_raw_log(std::istream& in) {
  ParsedLog out;
  std::vector<RawTurn> current;
  std::string line;
  auto flush = [&] {
    if (!current.empty()) {
      out.conversations.push_back(std::move(current));
      current.clear();
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      out.rejects.push_back(line);
      continue;
    }
    std::string speaker = line.substr(t1 + 1, t2 - t1 - 1);
    std::string text = line.substr(t2 + 1);
    if (speaker.empty() || text.empty()) {
      out.rejects.push_back(line);
      continue;
    }
    std::transform(speaker.begin(), speaker.end(), speaker.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    current.push_back({std::move(speaker), std::move(text)});
  }
  flush();
  return out;
}

namespace {
bool word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c == '-' || c == '_';
}
}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
    } else if (word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::pair<std::string, std::vector<std::string>> extract_addressee(
    const std::string& text, const std::set<std::string>& known_interlocutors) {
  std::size_t start = text.find_first_not_of(" \t");
  if (start == std::string::npos) return {"", {}};
  std::size_t end = text.find_first_of(" \t", start);
  std::string chunk = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
  std::string candidate = chunk;
  if (!candidate.empty() && (candidate.back() == ':' || candidate.back() == ',')) {
    candidate.pop_back();
  }
  std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (!candidate.empty() && known_interlocutors.count(candidate)) {
    std::string rest = end == std::string::npos ? "" : text.substr(end);
    return {candidate, tokenize(rest)};
  }
  return {"", tokenize(text)};
}

std::vector<std::string> load_generic_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read generic-response rules: " + path);
  std::vector<std::string> rules;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::transform(line.begin(), line.end(), line.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    rules.push_back(line);
  }
  return rules;
}

bool filter_generic(const std::vector<std::string>& response_tokens,
                    const std::vector<std::string>& rules) {
  std::string joined;
  for (const auto& t : response_tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  for (const auto& rule : rules) {
    if (!rule.empty() && joined.find(rule) != std::string::npos) return true;
  }
  return false;
}

std::vector<DialogueTurn> conversation_turns(const std::vector<RawTurn>& raw,
                                             const BuildOptions& opts,
                                             BuildCounters& counters) {
  std::set<std::string> speakers;
  for (const auto& t : raw) speakers.insert(t.speaker);

  std::vector<DialogueTurn> turns;
  for (const auto& t : raw) {
    std::set<std::string> known = speakers;
    known.erase(t.speaker);  // a speaker cannot address themselves
    auto [addressee, tokens] = extract_addressee(t.text, known);
    if (tokens.size() > opts.max_utterance_tokens) tokens.resize(opts.max_utterance_tokens);
    if (tokens.empty()) {
      ++counters.dropped_empty_turns;
      continue;
    }
    turns.push_back({t.speaker, addressee, std::move(tokens)});
  }
  return turns;
}

std::vector<ContextInstance> build_contexts(const std::vector<DialogueTurn>& turns,
                                            const BuildOptions& opts,
                                            BuildCounters& counters) {
  std::vector<ContextInstance> out;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const DialogueTurn& response_turn = turns[t];
    if (!response_turn.has_addressee()) continue;
    if (t == 0) {
      ++counters.skipped_no_context;
      continue;
    }
    std::size_t begin = t > opts.window ? t - opts.window : 0;
    std::vector<DialogueTurn> context(turns.begin() + static_cast<std::ptrdiff_t>(begin),
                                      turns.begin() + static_cast<std::ptrdiff_t>(t));

    // both response participants must have appeared (as speaker or addressee)
    auto appears = [&](const std::string& id) {
      for (const auto& turn : context) {
        if (turn.speaker == id || turn.addressee == id) return true;
      }
      return false;
    };
    if (!appears(response_turn.speaker) || !appears(response_turn.addressee)) {
      ++counters.skipped_missing_participant;
      continue;
    }

    std::vector<std::string> response = response_turn.tokens;
    if (response.size() > opts.max_response_tokens) response.resize(opts.max_response_tokens);
    if (filter_generic(response, opts.generic_rules)) {
      ++counters.skipped_generic;
      continue;
    }

    ContextInstance inst;
    inst.turns = std::move(context);
    inst.responding_speaker = response_turn.speaker;
    inst.target_addressee = response_turn.addressee;
    inst.response = std::move(response);
    validate_instance(inst, opts.window);
    ++counters.emitted;
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<ContextInstance> ingest_log(std::istream& in, const BuildOptions& opts,
                                        BuildCounters& counters,
                                        std::vector<std::string>* rejects) {
  ParsedLog parsed = parse_raw_log(in);
  if (rejects) *rejects = parsed.rejects;
  std::vector<ContextInstance> out;
  for (const auto& convo : parsed.conversations) {
    auto turns = conversation_turns(convo, opts, counters);
    auto instances = build_contexts(turns, opts, counters);
    out.insert(out.end(), std::make_move_iterator(instances.begin()),
               std::make_move_iterator(instances.end()));
  }
  return out;
}

SplitResult split_dataset(const std::vector<ContextInstance>& instances, std::uint64_t seed) {
  if (instances.size() < 10) {
    throw DomainError("split_dataset: need at least 10 instances, got " +
                      std::to_string(instances.size()));
  }
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  // dev and test take floor(n/10) each; train gets the remainder
  std::size_t n = instances.size();
  std::size_t n_dev = n / 10;
  std::size_t n_test = n / 10;
  std::size_t n_train = n - n_dev - n_test;

  SplitResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const ContextInstance& inst = instances[order[i]];
    if (i < n_train) {
      r.train.push_back(inst);
    } else if (i < n_train + n_dev) {
      r.dev.push_back(inst);
    } else {
      r.test.push_back(inst);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {
json turn_to_json(const DialogueTurn& t) {
  json j;
  j["speaker"] = t.speaker;
  j["addressee"] = t.has_addressee() ? json(t.addressee) : json(nullptr);
  j["tokens"] = t.tokens;
  return j;
}

DialogueTurn turn_from_json(const json& j) {
  DialogueTurn t;
  t.speaker = j.at("speaker").get<std::string>();
  if (!j.at("addressee").is_null()) t.addressee = j.at("addressee").get<std::string>();
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  return t;
}
}  // namespace

std::string instance_to_json(const ContextInstance& inst) {
  json j;
  json turns = json::array();
  for (const auto& t : inst.turns) turns.push_back(turn_to_json(t));
  j["turns"] = turns;
  j["responding_speaker"] = inst.responding_speaker;
  j["target_addressee"] = inst.target_addressee;
  j["response"] = inst.response;
  return j.dump();
}

ContextInstance instance_from_json(const std::string& line) {
  json j = json::parse(line);
  ContextInstance inst;
  for (const auto& t : j.at("turns")) inst.turns.push_back(turn_from_json(t));
  inst.responding_speaker = j.at("responding_speaker").get<std::string>();
  inst.target_addressee = j.at("target_addressee").get<std::string>();
  inst.response = j.at("response").get<std::vector<std::string>>();
  return inst;
}

void write_jsonl(const std::string& path, const std::vector<ContextInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus: " + path);
  for (const auto& inst : instances) out << instance_to_json(inst) << "\n";
}

std::vector<ContextInstance> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus: " + path);
  std::vector<ContextInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(instance_from_json(line));
  }
  return out;
}

}  // namespace icred
