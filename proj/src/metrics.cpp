#include "icred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "icred/errors.hpp"

using nlohmann::json;

namespace icred {

namespace {
constexpr double kBleuEpsilon = 1e-9;

void require_aligned(const std::vector<TokenSeq>& candidates,
                     const std::vector<TokenSeq>& references) {
  if (candidates.empty()) throw DomainError("metric: empty candidate list");
  if (candidates.size() != references.size()) {
    throw ContractError("metric: " + std::to_string(candidates.size()) + " candidates vs " +
                        std::to_string(references.size()) + " references");
  }
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const TokenSeq& seq, int n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    std::vector<std::string> gram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                  seq.begin() + static_cast<std::ptrdiff_t>(i) + n);
    ++counts[gram];
  }
  return counts;
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}
}  // namespace

double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            int max_n) {
  require_aligned(candidates, references);
  if (max_n < 1) throw ContractError("bleu: max_n must be >= 1");

  std::vector<std::size_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(max_n), 0);
  std::size_t cand_len = 0, ref_len = 0;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
    for (int n = 1; n <= max_n; ++n) {
      auto cand = ngram_counts(candidates[i], n);
      auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        total[static_cast<std::size_t>(n - 1)] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) {
          matched[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
        }
      }
    }
  }

  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    std::size_t t = total[static_cast<std::size_t>(n - 1)];
    if (t == 0) continue;  // no candidate n-grams of this order
    std::size_t m = matched[static_cast<std::size_t>(n - 1)];
    double p = m > 0 ? static_cast<double>(m) / static_cast<double>(t)
                     : kBleuEpsilon / static_cast<double>(t);
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0 || cand_len == 0) return 0.0;

  double brevity = 1.0;
  if (cand_len < ref_len) {
    brevity = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  }
  return 100.0 * brevity * std::exp(log_sum / orders);
}

double rouge_l(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references) {
  require_aligned(candidates, references);
  constexpr double beta = 1.2;
  double sum_f = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const TokenSeq& cand = candidates[i];
    const TokenSeq& ref = references[i];
    if (cand.empty() || ref.empty()) continue;
    double lcs = static_cast<double>(lcs_length(cand, ref));
    if (lcs == 0.0) continue;
    double precision = lcs / static_cast<double>(cand.size());
    double recall = lcs / static_cast<double>(ref.size());
    double f = (1.0 + beta * beta) * precision * recall / (recall + beta * beta * precision);
    sum_f += f;
  }
  return 100.0 * sum_f / static_cast<double>(candidates.size());
}

double avg_length(const std::vector<TokenSeq>& candidates) {
  if (candidates.empty()) throw DomainError("avg_length: empty candidate list");
  std::size_t total = 0;
  for (const auto& c : candidates) total += c.size();
  return static_cast<double>(total) / static_cast<double>(candidates.size());
}

std::set<std::string> load_noun_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read noun lexicon: " + path);
  std::set<std::string> lexicon;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::transform(line.begin(), line.end(), line.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    lexicon.insert(line);
  }
  return lexicon;
}

double noun_count(const std::vector<TokenSeq>& candidates, const std::set<std::string>& lexicon) {
  if (candidates.empty()) throw DomainError("noun_count: empty candidate list");
  std::size_t total = 0;
  for (const auto& c : candidates) {
    for (const auto& tok : c) {
      if (lexicon.count(tok)) ++total;
    }
  }
  return static_cast<double>(total) / static_cast<double>(candidates.size());
}

EvalReport evaluate_records(std::string label, std::vector<InstanceRecord> records,
                            const std::set<std::string>& lexicon) {
  if (records.empty()) throw DomainError("evaluate_records: no records");
  EvalReport r;
  r.label = std::move(label);
  r.count = records.size();

  std::vector<TokenSeq> cands, refs;
  cands.reserve(records.size());
  refs.reserve(records.size());
  std::size_t positions = 0, position_hits = 0, payload_hits = 0;
  for (const auto& rec : records) {
    cands.push_back(rec.candidate);
    refs.push_back(rec.reference);
    if (rec.empty_memory) ++r.empty_memory_flags;
    for (std::size_t i = 0; i < rec.reference.size(); ++i) {
      ++positions;
      if (i < rec.candidate.size() && rec.candidate[i] == rec.reference[i]) ++position_hits;
    }
    if (!rec.reference.empty()) {
      std::size_t last = rec.reference.size() - 1;
      if (last < rec.candidate.size() && rec.candidate[last] == rec.reference[last]) {
        ++payload_hits;
      }
    }
  }
  r.bleu = bleu(cands, refs);
  r.rouge_l = rouge_l(cands, refs);
  r.avg_length = avg_length(cands);
  r.avg_nouns = noun_count(cands, lexicon);
  r.token_accuracy =
      positions == 0 ? 0.0 : static_cast<double>(position_hits) / static_cast<double>(positions);
  r.payload_accuracy = static_cast<double>(payload_hits) / static_cast<double>(records.size());
  r.records = std::move(records);
  return r;
}

std::vector<EvalReport> prediction_buckets(const EvalReport& joint_report,
                                           const std::set<std::string>& lexicon) {
  auto filter = [&](const std::string& label, auto pred) -> std::vector<EvalReport> {
    std::vector<InstanceRecord> subset;
    for (const auto& rec : joint_report.records) {
      if (rec.speaker_correct < 0 || rec.addressee_correct < 0) {
        throw ContractError("prediction_buckets: record without prediction outcome");
      }
      if (pred(rec.speaker_correct == 1, rec.addressee_correct == 1)) subset.push_back(rec);
    }
    if (subset.empty()) return {};
    return {evaluate_records(label, std::move(subset), lexicon)};
  };

  std::vector<EvalReport> rows;
  auto append = [&](std::vector<EvalReport> r) {
    for (auto& x : r) rows.push_back(std::move(x));
  };
  append(filter(joint_report.label + " */*", [](bool, bool) { return true; }));
  append(filter(joint_report.label + " True/True", [](bool s, bool a) { return s && a; }));
  append(filter(joint_report.label + " True/*", [](bool s, bool) { return s; }));
  append(filter(joint_report.label + " */True", [](bool, bool a) { return a; }));
  append(filter(joint_report.label + " False/False", [](bool s, bool a) { return !s && !a; }));
  return rows;
}

std::string report_table(const std::vector<EvalReport>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(34) << "Variant" << std::right << std::setw(8) << "N"
     << std::setw(10) << "BLEU" << std::setw(10) << "ROUGE" << std::setw(10) << "Length"
     << std::setw(9) << "#Noun" << std::setw(10) << "TokAcc" << std::setw(10) << "PayAcc"
     << std::setw(7) << "Empty" << "\n";
  os << std::string(108, '-') << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(34) << r.label << std::right << std::setw(8) << r.count
       << std::setw(10) << r.bleu << std::setw(10) << r.rouge_l << std::setw(10) << r.avg_length
       << std::setw(9) << r.avg_nouns << std::setw(10) << 100.0 * r.token_accuracy
       << std::setw(10) << 100.0 * r.payload_accuracy << std::setw(7) << r.empty_memory_flags
       << "\n";
  }
  return os.str();
}

std::string report_json(const std::vector<EvalReport>& rows, bool with_records) {
  json out = json::array();
  for (const auto& r : rows) {
    json j;
    j["variant"] = r.label;
    j["count"] = r.count;
    j["bleu"] = r.bleu;
    j["rouge_l"] = r.rouge_l;
    j["avg_length"] = r.avg_length;
    j["avg_nouns"] = r.avg_nouns;
    j["token_accuracy"] = r.token_accuracy;
    j["payload_accuracy"] = r.payload_accuracy;
    j["empty_memory_flags"] = r.empty_memory_flags;
    if (with_records) {
      json recs = json::array();
      for (const auto& rec : r.records) {
        json e;
        e["candidate"] = rec.candidate;
        e["reference"] = rec.reference;
        e["empty_memory"] = rec.empty_memory;
        if (rec.speaker_correct >= 0) e["speaker_correct"] = rec.speaker_correct == 1;
        if (rec.addressee_correct >= 0) e["addressee_correct"] = rec.addressee_correct == 1;
        recs.push_back(e);
      }
      j["records"] = recs;
    }
    out.push_back(j);
  }
  return out.dump(2);
}

}  // namespace icred
