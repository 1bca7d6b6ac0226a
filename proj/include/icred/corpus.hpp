#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace icred {

/// One (speaker, optional addressee, tokens) triple. An empty addressee
/// string means "no explicit addressee" (everyone else observes).
struct DialogueTurn {
  std::string speaker;
  std::string addressee;  // empty = absent
  std::vector<std::string> tokens;

  bool has_addressee() const { return !addressee.empty(); }
  bool operator==(const DialogueTurn&) const = default;
};

/// A context window plus the response triple it must explain.
struct ContextInstance {
  std::vector<DialogueTurn> turns;
  std::string responding_speaker;
  std::string target_addressee;
  std::vector<std::string> response;

  bool operator==(const ContextInstance&) const = default;

  /// All interlocutors appearing in the context (speakers and addressees),
  /// in first-appearance order.
  std::vector<std::string> interlocutors() const;
};

/// Throws ContractError if any type invariant is violated.
void validate_instance(const ContextInstance& inst, std::size_t window);

/// Word <-> index with reserved entries at fixed slots 0..3.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  std::vector<std::string> words;  // includes the four reserved entries
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(words.size()); }
  int id(const std::string& w) const;
  const std::string& word(int id) const { return words.at(static_cast<std::size_t>(id)); }

  /// Frequency-then-lexicographic order; max_words = 0 keeps everything.
  static Vocabulary build(const std::vector<ContextInstance>& instances,
                          std::size_t max_words = 0);
  static Vocabulary from_words(const std::vector<std::string>& plain_words);

  /// One word per line, line i holding index i + 4.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

struct CorpusStats {
  std::size_t contexts = 0;
  std::size_t speakers = 0;
  std::size_t addressees = 0;
  std::size_t vocab = 0;
  std::size_t tokens = 0;
  double avg_tokens_per_context = 0.0;
  double avg_tokens_per_response = 0.0;
  // kept instances whose target addressee never speaks in the context
  std::size_t addressee_never_spoke = 0;
};

CorpusStats corpus_stats(const std::vector<ContextInstance>& instances);

// ---------------------------------------------------------------------------
// Raw-log ingestion

struct RawTurn {
  std::string speaker;
  std::string text;
};

struct ParsedLog {
  std::vector<std::vector<RawTurn>> conversations;
  std::vector<std::string> rejects;  // malformed lines, verbatim
};

/// Tab-separated Time/Speaker/Utterance lines; blank line ends a
/// conversation. Timestamps order the file and are then dropped.
ParsedLog parse_raw_log(std::istream& in);

/// Lowercase; splits on whitespace; punctuation becomes its own token.
/// Apostrophes, hyphens and underscores stay inside words.
std::vector<std::string> tokenize(const std::string& text);

/// Leading-token addressee mention: first whitespace chunk, with one optional
/// trailing ':' or ',', matching a known interlocutor. Returns the addressee
/// (or empty) and the remaining tokens.
std::pair<std::string, std::vector<std::string>> extract_addressee(
    const std::string& text, const std::set<std::string>& known_interlocutors);

/// Lowercase substring patterns, one per line; '#' comments allowed.
std::vector<std::string> load_generic_rules(const std::string& path);

/// true = drop: the joined lowercased response contains some pattern.
bool filter_generic(const std::vector<std::string>& response_tokens,
                    const std::vector<std::string>& rules);

struct BuildOptions {
  std::size_t window = 5;
  std::size_t max_utterance_tokens = 20;  // truncation keeps the first tokens
  std::size_t max_response_tokens = 20;
  std::vector<std::string> generic_rules;
};

struct BuildCounters {
  std::size_t emitted = 0;
  std::size_t skipped_missing_participant = 0;
  std::size_t skipped_generic = 0;
  std::size_t skipped_no_context = 0;
  std::size_t dropped_empty_turns = 0;
};

/// Turns one conversation into DialogueTurns: tokenization, addressee
/// extraction against the conversation's speaker set, empty-turn dropping.
std::vector<DialogueTurn> conversation_turns(const std::vector<RawTurn>& raw,
                                             const BuildOptions& opts,
                                             BuildCounters& counters);

/// Emits every instance whose response turn has an addressee, whose speaker
/// and addressee both appear in the preceding window, and whose response
/// passes the generic filter.
std::vector<ContextInstance> build_contexts(const std::vector<DialogueTurn>& turns,
                                            const BuildOptions& opts,
                                            BuildCounters& counters);

/// Whole-log pipeline: parse + per-conversation build.
std::vector<ContextInstance> ingest_log(std::istream& in, const BuildOptions& opts,
                                        BuildCounters& counters,
                                        std::vector<std::string>* rejects = nullptr);

// ---------------------------------------------------------------------------
// Splits and serialization

struct SplitResult {
  std::vector<ContextInstance> train, dev, test;
};

/// Seeded shuffle then 8:1:1; dev and test take floor(n/10) each.
/// Throws DomainError for fewer than 10 instances.
SplitResult split_dataset(const std::vector<ContextInstance>& instances, std::uint64_t seed);

std::string instance_to_json(const ContextInstance& inst);
ContextInstance instance_from_json(const std::string& line);

void write_jsonl(const std::string& path, const std::vector<ContextInstance>& instances);
std::vector<ContextInstance> read_jsonl(const std::string& path);

}  // namespace icred
