#pragma once

#include <set>
#include <string>
#include <vector>

namespace icred {

using TokenSeq = std::vector<std::string>;

/// Corpus-level BLEU as a percentage: geometric mean of modified n-gram
/// precisions up to max_n times the brevity penalty. Orders with zero
/// matches use an epsilon numerator (1e-9); orders with no candidate
/// n-grams at all are excluded from the mean.
double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            int max_n = 4);

/// Mean per-instance ROUGE-L F score (beta = 1.2) as a percentage.
double rouge_l(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references);

/// Mean token count per candidate.
double avg_length(const std::vector<TokenSeq>& candidates);

/// Lowercase word list, one per line; '#' comments allowed.
std::set<std::string> load_noun_lexicon(const std::string& path);

/// Mean number of candidate tokens found in the lexicon.
double noun_count(const std::vector<TokenSeq>& candidates, const std::set<std::string>& lexicon);

// ---------------------------------------------------------------------------

struct InstanceRecord {
  TokenSeq candidate;
  TokenSeq reference;
  bool empty_memory = false;
  // -1: not applicable (no joint prediction); 0/1 otherwise
  int speaker_correct = -1;
  int addressee_correct = -1;
};

struct EvalReport {
  std::string label;
  std::size_t count = 0;
  double bleu = 0.0;
  double rouge_l = 0.0;
  double avg_length = 0.0;
  double avg_nouns = 0.0;
  double token_accuracy = 0.0;    // position-wise match against the reference
  double payload_accuracy = 0.0;  // last reference token predicted at its slot
  std::size_t empty_memory_flags = 0;
  std::vector<InstanceRecord> records;
};

/// Aggregates records into a report; metrics as above.
EvalReport evaluate_records(std::string label, std::vector<InstanceRecord> records,
                            const std::set<std::string>& lexicon);

struct AblationReport {
  std::vector<EvalReport> rows;
};

/// Joint-prediction bucket rows in Table-6 layout: * / *, True/True,
/// True/*, */True, False/False. Atomic buckets partition the records.
std::vector<EvalReport> prediction_buckets(const EvalReport& joint_report,
                                           const std::set<std::string>& lexicon);

std::string report_table(const std::vector<EvalReport>& rows);
std::string report_json(const std::vector<EvalReport>& rows, bool with_records = false);

}  // namespace icred
