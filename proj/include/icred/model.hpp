#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icred/config_io.hpp"
#include "icred/corpus.hpp"
#include "icred/gru.hpp"
#include "icred/tape.hpp"

namespace icred {

enum class MemoryType { kAddressee, kAllUtterance, kLatest, kSpeaker, kNone };

MemoryType memory_type_from_string(const std::string& s);
std::string to_string(MemoryType t);

struct ModelConfig {
  std::size_t word_dim = 300;
  std::size_t utterance_hidden_dim = 512;  // concatenation of two directions
  std::size_t interlocutor_dim = 1024;
  std::size_t vocab_size = 0;
  std::size_t max_utterance_tokens = 20;  // L_u
  std::size_t max_response_tokens = 20;   // L_r
  MemoryType memory_type = MemoryType::kAddressee;
  bool use_speaker_vector = true;
  bool use_addressee_vector = true;
  bool joint_prediction = false;
  double l2_weight = 1e-4;
  double joint_loss_weight = 1.0;
  // target addressee never spoke: false = zero memory, true = latest utterance
  bool empty_memory_latest_fallback = false;

  // decoder hidden size; tied to the utterance encoding so decoder states and
  // memory columns share a dimension
  std::size_t decoder_dim() const { return utterance_hidden_dim; }
  std::size_t direction_dim() const { return utterance_hidden_dim / 2; }

  void validate() const;

  KvMap to_kv() const;
  static ModelConfig from_kv(const KvMap& kv);

  /// Variant name for ablation reports: full, no_adr_mem, no_ctx_spk_vec,
  /// no_ctx_adr_vec, mem_all, mem_latest, mem_speaker, joint and combinations.
  std::string variant_label() const;
};

/// The ICRED network: bi-GRU utterance encoder, role-differentiated speaker
/// interaction layer, addressee memory with bilinear attention, GRU decoder
/// with tied output embeddings and an optional interlocutor-prediction head.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);
  Model(ModelConfig cfg, ParamMap params);  // validates names and shapes

  const ModelConfig& config() const { return cfg_; }
  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }

  /// Contextual word states and utterance summary of one utterance.
  struct Encoded {
    std::vector<Value> columns;  // one per actual token
    Value summary;               // last column's construction
  };
  Encoded encode_utterance(Binder& bind, const std::vector<int>& token_ids) const;

  /// Final interlocutor matrix, one column per interlocutor in the instance,
  /// plus the per-turn encodings produced along the way.
  struct Interaction {
    std::vector<std::string> interlocutors;  // first-appearance order
    std::vector<Value> columns;
    std::vector<Encoded> encodings;

    Value column_of(const std::string& id) const;
    std::optional<std::size_t> index_of(const std::string& id) const;
  };
  Interaction run_interaction(Binder& bind, const ContextInstance& inst,
                              const Vocabulary& vocab) const;

  struct Memory {
    std::vector<Value> columns;
    int source_turn = -1;          // -1 when empty or concatenated
    bool fell_back_empty = false;  // requested utterance does not exist
    bool empty() const { return columns.empty(); }
  };
  Memory select_addressee_memory(const ContextInstance& inst,
                                 const std::vector<Encoded>& encodings, MemoryType type,
                                 const std::string& target_addressee,
                                 const std::string& responding_speaker) const;

  /// Bilinear attention over memory columns: scores s^T W m, softmax, convex
  /// combination. Memory must be nonempty.
  struct Attention {
    Value context;  // c_j
    Value weights;  // alpha_j
  };
  Attention attend(Binder& bind, Value s_prev, const std::vector<Value>& memory_columns) const;

  /// Everything that stays fixed across decode steps.
  struct DecoderSetup {
    Value a_res, a_tgt;  // zero constants when ablated
    Memory memory;
    Value s0;
  };
  DecoderSetup prepare_decoder(Binder& bind, const ContextInstance& inst,
                               const Vocabulary& vocab, const Interaction& interaction,
                               const std::string& res_id, const std::string& tgt_id) const;

  struct StepResult {
    Value logits;
    Value state;
    Value context;  // attentional addressee vector (zero when no memory)
  };
  StepResult decode_step(Binder& bind, const DecoderSetup& setup, Value s_prev,
                         Value x_prev) const;

  Value embed_token(Binder& bind, int token_id) const;

  /// Teacher-forced mean per-token negative log-likelihood (EOS included).
  Value nll_loss(Binder& bind, const ContextInstance& inst, const Vocabulary& vocab) const;
  /// nll_loss + l2_weight * sum of squared parameters.
  Value forward_loss(Binder& bind, const ContextInstance& inst, const Vocabulary& vocab) const;
  /// forward_loss + joint_loss_weight * (speaker NLL + addressee NLL).
  Value joint_loss(Binder& bind, const ContextInstance& inst, const Vocabulary& vocab) const;
  /// Training loss per config (joint_loss when joint_prediction is on).
  Value training_loss(Binder& bind, const ContextInstance& inst, const Vocabulary& vocab) const;

  Value l2_term(Binder& bind) const;

  /// Convenience: NLL value without building gradients at the call site.
  double instance_nll(const ContextInstance& inst, const Vocabulary& vocab) const;

  enum class SearchMode { kGreedy, kBeam };
  struct GenOptions {
    SearchMode mode = SearchMode::kGreedy;
    std::size_t beam_width = 1;
  };
  struct Generated {
    std::vector<std::string> tokens;
    double score = 0.0;            // length-normalized sum of token log-probs
    bool empty_memory = false;     // addressee memory was unavailable
    std::string used_speaker, used_addressee;  // after joint replacement
    bool degenerate_prediction = false;
  };
  Generated generate(const ContextInstance& inst, const Vocabulary& vocab,
                     const GenOptions& opts) const;
  Generated generate(const ContextInstance& inst, const Vocabulary& vocab) const {
    return generate(inst, vocab, GenOptions());
  }

  /// Length-normalized sum of log-probs the model assigns to a response.
  double sequence_score(const ContextInstance& inst, const Vocabulary& vocab,
                        const std::vector<std::string>& response) const;

  struct Prediction {
    std::vector<std::string> candidates;
    std::vector<double> speaker_probs;
    std::vector<double> addressee_probs;
    std::string speaker;   // argmax
    std::string addressee; // argmax
    bool degenerate = false;  // fewer than 2 candidates
  };
  Prediction predict_interlocutors(const ContextInstance& inst, const Vocabulary& vocab) const;

  /// Expected parameter shapes for this config, by name.
  static std::map<std::string, std::vector<std::size_t>> expected_shapes(const ModelConfig& cfg);

 private:
  struct PredictionScores {
    std::vector<std::string> candidates;
    Value speaker_scores;
    Value addressee_scores;
  };
  PredictionScores prediction_scores(Binder& bind, const Interaction& interaction) const;

  std::vector<int> response_ids(const ContextInstance& inst, const Vocabulary& vocab) const;

  ModelConfig cfg_;
  ParamMap params_;
};

}  // namespace icred
