#include "icred/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "icred/errors.hpp"
#include "icred/log.hpp"

namespace icred {

MemoryType memory_type_from_string(const std::string& s) {
  if (s == "addressee") return MemoryType::kAddressee;
  if (s == "all" || s == "all-utterance") return MemoryType::kAllUtterance;
  if (s == "latest") return MemoryType::kLatest;
  if (s == "speaker") return MemoryType::kSpeaker;
  if (s == "none") return MemoryType::kNone;
  throw ConfigError("unknown memory type: " + s);
}

std::string to_string(MemoryType t) {
  switch (t) {
    case MemoryType::kAddressee: return "addressee";
    case MemoryType::kAllUtterance: return "all-utterance";
    case MemoryType::kLatest: return "latest";
    case MemoryType::kSpeaker: return "speaker";
    case MemoryType::kNone: return "none";
  }
  return "?";
}

namespace {
std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": expected bool, got \"" + v + "\"");
}

std::vector<double> log_probs(const std::vector<double>& logits) {
  double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::size_t argmax_first(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}
}  // namespace

void ModelConfig::validate() const {
  if (word_dim == 0 || utterance_hidden_dim == 0 || interlocutor_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (utterance_hidden_dim % 2 != 0) {
    throw ConfigError("utterance_hidden_dim must be even (two directions)");
  }
  if (vocab_size < 5) throw ConfigError("vocab_size must cover reserved tokens plus words");
  if (max_utterance_tokens == 0 || max_response_tokens == 0) {
    throw ConfigError("token caps must be positive");
  }
  if (l2_weight < 0 || joint_loss_weight < 0) {
    throw ConfigError("loss weights must be nonnegative");
  }
}

KvMap ModelConfig::to_kv() const {
  KvMap kv;
  kv["word_dim"] = std::to_string(word_dim);
  kv["utterance_hidden_dim"] = std::to_string(utterance_hidden_dim);
  kv["interlocutor_dim"] = std::to_string(interlocutor_dim);
  kv["vocab_size"] = std::to_string(vocab_size);
  kv["max_utterance_tokens"] = std::to_string(max_utterance_tokens);
  kv["max_response_tokens"] = std::to_string(max_response_tokens);
  kv["memory_type"] = to_string(memory_type);
  kv["use_speaker_vector"] = use_speaker_vector ? "true" : "false";
  kv["use_addressee_vector"] = use_addressee_vector ? "true" : "false";
  kv["joint_prediction"] = joint_prediction ? "true" : "false";
  kv["l2_weight"] = fmt_double(l2_weight);
  kv["joint_loss_weight"] = fmt_double(joint_loss_weight);
  kv["empty_memory_latest_fallback"] = empty_memory_latest_fallback ? "true" : "false";
  return kv;
}

ModelConfig ModelConfig::from_kv(const KvMap& kv) {
  ModelConfig cfg;
  KvMap expected = cfg.to_kv();
  for (const auto& [k, v] : kv) {
    if (!expected.count(k)) throw ConfigError("unknown model config key: " + k);
  }
  for (const auto& [k, _] : expected) {
    if (!kv.count(k)) throw ConfigError("missing model config key: " + k);
  }
  cfg.word_dim = std::stoul(kv.at("word_dim"));
  cfg.utterance_hidden_dim = std::stoul(kv.at("utterance_hidden_dim"));
  cfg.interlocutor_dim = std::stoul(kv.at("interlocutor_dim"));
  cfg.vocab_size = std::stoul(kv.at("vocab_size"));
  cfg.max_utterance_tokens = std::stoul(kv.at("max_utterance_tokens"));
  cfg.max_response_tokens = std::stoul(kv.at("max_response_tokens"));
  cfg.memory_type = memory_type_from_string(kv.at("memory_type"));
  cfg.use_speaker_vector = parse_bool("use_speaker_vector", kv.at("use_speaker_vector"));
  cfg.use_addressee_vector = parse_bool("use_addressee_vector", kv.at("use_addressee_vector"));
  cfg.joint_prediction = parse_bool("joint_prediction", kv.at("joint_prediction"));
  cfg.l2_weight = std::stod(kv.at("l2_weight"));
  cfg.joint_loss_weight = std::stod(kv.at("joint_loss_weight"));
  cfg.empty_memory_latest_fallback =
      parse_bool("empty_memory_latest_fallback", kv.at("empty_memory_latest_fallback"));
  cfg.validate();
  return cfg;
}

std::string ModelConfig::variant_label() const {
  std::vector<std::string> mods;
  switch (memory_type) {
    case MemoryType::kAddressee: break;
    case MemoryType::kNone: mods.push_back("no_adr_mem"); break;
    case MemoryType::kAllUtterance: mods.push_back("mem_all"); break;
    case MemoryType::kLatest: mods.push_back("mem_latest"); break;
    case MemoryType::kSpeaker: mods.push_back("mem_speaker"); break;
  }
  if (!use_speaker_vector) mods.push_back("no_ctx_spk_vec");
  if (!use_addressee_vector) mods.push_back("no_ctx_adr_vec");
  if (joint_prediction) mods.push_back("joint");
  if (mods.empty()) return "full";
  std::string label = mods[0];
  for (std::size_t i = 1; i < mods.size(); ++i) label += "+" + mods[i];
  return label;
}

std::map<std::string, std::vector<std::size_t>> Model::expected_shapes(const ModelConfig& cfg) {
  std::size_t w = cfg.word_dim;
  std::size_t u = cfg.utterance_hidden_dim;
  std::size_t d = cfg.direction_dim();
  std::size_t p = cfg.interlocutor_dim;
  std::size_t s = cfg.decoder_dim();
  std::size_t v = cfg.vocab_size;

  std::map<std::string, std::vector<std::size_t>> shapes;
  shapes["embed.E"] = {v, w};

  auto gru = [&](const std::string& prefix, std::size_t hidden, std::size_t input) {
    shapes[prefix + ".Wz"] = {hidden, input};
    shapes[prefix + ".Wr"] = {hidden, input};
    shapes[prefix + ".Wh"] = {hidden, input};
    shapes[prefix + ".Uz"] = {hidden, hidden};
    shapes[prefix + ".Ur"] = {hidden, hidden};
    shapes[prefix + ".Uh"] = {hidden, hidden};
    shapes[prefix + ".bz"] = {hidden};
    shapes[prefix + ".br"] = {hidden};
    shapes[prefix + ".bh"] = {hidden};
  };
  gru("enc.fwd", d, w);
  gru("enc.bwd", d, w);
  gru("inter.spk", p, u);
  gru("inter.adr", p, u);
  gru("inter.obs", p, u);
  gru("dec.gru", s, u + 2 * p + w);

  shapes["dec.init.W"] = {s, 2 * p};
  shapes["attn.W"] = {s, u};
  shapes["out.W"] = {w, s + u + 2 * p};
  shapes["out.b"] = {w};
  shapes["pred.spk.W"] = {p + u, p};
  shapes["pred.adr.W"] = {p + u, p};
  return shapes;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  for (const auto& [name, shape] : expected_shapes(cfg_)) {
    if (shape.size() == 1) {
      params_[name] = Tensor::zeros(shape);
    } else {
      double bound = 1.0 / std::sqrt(static_cast<double>(shape[1]));
      params_[name] = Tensor::uniform(shape, -bound, bound, rng);
    }
  }
}

Model::Model(ModelConfig cfg, ParamMap params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  auto shapes = expected_shapes(cfg_);
  for (const auto& [name, shape] : shapes) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("checkpoint missing parameter: " + name);
    if (it->second.shape() != shape) {
      throw DimError("checkpoint parameter " + name + " has shape " + it->second.shape_str() +
                     ", expected " + Tensor::zeros(shape).shape_str());
    }
  }
  for (const auto& [name, _] : params_) {
    if (!shapes.count(name)) throw ConfigError("checkpoint has unexpected parameter: " + name);
  }
}

Value Model::embed_token(Binder& bind, int token_id) const {
  if (token_id < 0 || static_cast<std::size_t>(token_id) >= cfg_.vocab_size) {
    throw ContractError("token id out of vocabulary range: " + std::to_string(token_id));
  }
  return embed_row(bind("embed.E"), static_cast<std::size_t>(token_id));
}

Model::Encoded Model::encode_utterance(Binder& bind, const std::vector<int>& token_ids) const {
  if (token_ids.empty()) throw DomainError("encode_utterance: empty utterance");
  std::vector<int> ids = token_ids;
  if (ids.size() > cfg_.max_utterance_tokens) ids.resize(cfg_.max_utterance_tokens);

  Tape& tape = *bind("embed.E").tape();
  GruRef fwd = bind_gru(bind, "enc.fwd");
  GruRef bwd = bind_gru(bind, "enc.bwd");
  std::size_t len = ids.size();

  std::vector<Value> embeds(len);
  for (std::size_t i = 0; i < len; ++i) embeds[i] = embed_token(bind, ids[i]);

  std::vector<Value> fwd_states(len), bwd_states(len);
  Value h = tape.zeros_const(cfg_.direction_dim());
  for (std::size_t i = 0; i < len; ++i) {
    h = gru_step(fwd, h, embeds[i]);
    fwd_states[i] = h;
  }
  h = tape.zeros_const(cfg_.direction_dim());
  for (std::size_t i = len; i-- > 0;) {
    h = gru_step(bwd, h, embeds[i]);
    bwd_states[i] = h;  // state after consuming positions len-1 .. i
  }

  Encoded enc;
  enc.columns.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    std::array<Value, 2> parts{fwd_states[i], bwd_states[i]};
    enc.columns[i] = concat(parts);
  }
  enc.summary = enc.columns.back();
  return enc;
}

Value Model::Interaction::column_of(const std::string& id) const {
  auto idx = index_of(id);
  if (!idx) throw ContractError("interlocutor not in instance: " + id);
  return columns[*idx];
}

std::optional<std::size_t> Model::Interaction::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < interlocutors.size(); ++i) {
    if (interlocutors[i] == id) return i;
  }
  return std::nullopt;
}

Model::Interaction Model::run_interaction(Binder& bind, const ContextInstance& inst,
                                          const Vocabulary& vocab) const {
  if (inst.turns.empty()) throw DomainError("run_interaction: no context turns");
  Tape& tape = *bind("embed.E").tape();
  GruRef spk = bind_gru(bind, "inter.spk");
  GruRef adr = bind_gru(bind, "inter.adr");
  GruRef obs = bind_gru(bind, "inter.obs");

  Interaction result;
  result.interlocutors = inst.interlocutors();
  result.columns.assign(result.interlocutors.size(),
                        tape.zeros_const(cfg_.interlocutor_dim));  // zero matrix A

  for (const auto& turn : inst.turns) {
    std::vector<int> ids(turn.tokens.size());
    for (std::size_t i = 0; i < turn.tokens.size(); ++i) ids[i] = vocab.id(turn.tokens[i]);
    Encoded enc = encode_utterance(bind, ids);
    Value h = enc.summary;

    for (std::size_t i = 0; i < result.interlocutors.size(); ++i) {
      const std::string& who = result.interlocutors[i];
      if (who == turn.speaker) {
        result.columns[i] = gru_step(spk, result.columns[i], h);
      } else if (turn.has_addressee() && who == turn.addressee) {
        result.columns[i] = gru_step(adr, result.columns[i], h);
      } else {
        // absent addressee: everyone except the speaker observes
        result.columns[i] = gru_step(obs, result.columns[i], h);
      }
    }
    result.encodings.push_back(std::move(enc));
  }
  return result;
}

Model::Memory Model::select_addressee_memory(const ContextInstance& inst,
                                             const std::vector<Encoded>& encodings,
                                             MemoryType type,
                                             const std::string& target_addressee,
                                             const std::string& responding_speaker) const {
  Memory mem;
  auto last_said_by = [&](const std::string& who) -> int {
    for (std::size_t t = inst.turns.size(); t-- > 0;) {
      if (inst.turns[t].speaker == who) return static_cast<int>(t);
    }
    return -1;
  };

  switch (type) {
    case MemoryType::kNone:
      return mem;
    case MemoryType::kLatest:
      mem.source_turn = static_cast<int>(inst.turns.size()) - 1;
      mem.columns = encodings.back().columns;
      return mem;
    case MemoryType::kAllUtterance: {
      for (const auto& enc : encodings) {
        mem.columns.insert(mem.columns.end(), enc.columns.begin(), enc.columns.end());
      }
      return mem;
    }
    case MemoryType::kAddressee:
    case MemoryType::kSpeaker: {
      const std::string& who =
          type == MemoryType::kAddressee ? target_addressee : responding_speaker;
      int t = last_said_by(who);
      if (t >= 0) {
        mem.source_turn = t;
        mem.columns = encodings[static_cast<std::size_t>(t)].columns;
        return mem;
      }
      if (cfg_.empty_memory_latest_fallback) {
        mem.source_turn = static_cast<int>(inst.turns.size()) - 1;
        mem.columns = encodings.back().columns;
        mem.fell_back_empty = true;
        return mem;
      }
      mem.fell_back_empty = true;  // empty memory, decoder sees c_j = 0
      return mem;
    }
  }
  return mem;
}

Model::Attention Model::attend(Binder& bind, Value s_prev,
                               const std::vector<Value>& memory_columns) const {
  if (memory_columns.empty()) throw DomainError("attend: empty memory");
  Value mat = cols_to_mat(memory_columns);
  Value query = matvec_t(bind("attn.W"), s_prev);  // W^T s
  Value scores = matvec_t(mat, query);             // one bilinear score per column
  Value alpha = softmax(scores);
  Value context = matvec(mat, alpha);
  return {context, alpha};
}

Model::DecoderSetup Model::prepare_decoder(Binder& bind, const ContextInstance& inst,
                                           const Vocabulary& vocab,
                                           const Interaction& interaction,
                                           const std::string& res_id,
                                           const std::string& tgt_id) const {
  (void)vocab;
  Tape& tape = *bind("embed.E").tape();
  DecoderSetup setup;
  setup.a_res = cfg_.use_speaker_vector ? interaction.column_of(res_id)
                                        : tape.zeros_const(cfg_.interlocutor_dim);
  setup.a_tgt = cfg_.use_addressee_vector ? interaction.column_of(tgt_id)
                                          : tape.zeros_const(cfg_.interlocutor_dim);
  setup.memory =
      select_addressee_memory(inst, interaction.encodings, cfg_.memory_type, tgt_id, res_id);

  std::array<Value, 2> init_in{setup.a_res, setup.a_tgt};
  setup.s0 = tanh_v(matvec(bind("dec.init.W"), concat(init_in)));
  return setup;
}

Model::StepResult Model::decode_step(Binder& bind, const DecoderSetup& setup, Value s_prev,
                                     Value x_prev) const {
  Tape& tape = *bind("embed.E").tape();
  Value context = setup.memory.empty() ? tape.zeros_const(cfg_.utterance_hidden_dim)
                                       : attend(bind, s_prev, setup.memory.columns).context;

  std::array<Value, 4> gru_in{context, setup.a_res, setup.a_tgt, x_prev};
  Value s = gru_step(bind_gru(bind, "dec.gru"), s_prev, concat(gru_in));

  std::array<Value, 4> feat{s, context, setup.a_res, setup.a_tgt};
  Value proj = add(matvec(bind("out.W"), concat(feat)), bind("out.b"));
  Value logits = matvec(bind("embed.E"), proj);  // tied output embeddings
  return {logits, s, context};
}

std::vector<int> Model::response_ids(const ContextInstance& inst, const Vocabulary& vocab) const {
  if (inst.response.empty()) throw DomainError("instance has empty response");
  std::vector<int> ids(inst.response.size());
  for (std::size_t i = 0; i < inst.response.size(); ++i) ids[i] = vocab.id(inst.response[i]);
  if (ids.size() > cfg_.max_response_tokens) {
    log_info("response truncated from ", ids.size(), " to ", cfg_.max_response_tokens, " tokens");
    ids.resize(cfg_.max_response_tokens);
  }
  return ids;
}

Value Model::nll_loss(Binder& bind, const ContextInstance& inst, const Vocabulary& vocab) const {
  Interaction interaction = run_interaction(bind, inst, vocab);
  DecoderSetup setup = prepare_decoder(bind, inst, vocab, interaction, inst.responding_speaker,
                                       inst.target_addressee);

  std::vector<int> targets = response_ids(inst, vocab);
  targets.push_back(Vocabulary::kEos);

  Value s = setup.s0;
  Value x = embed_token(bind, Vocabulary::kBos);
  Value total;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    StepResult step = decode_step(bind, setup, s, x);
    Value nll_j = cross_entropy_logits(step.logits, static_cast<std::size_t>(targets[j]));
    total = total.valid() ? add(total, nll_j) : nll_j;
    s = step.state;
    if (j + 1 < targets.size()) x = embed_token(bind, targets[j]);  // teacher forcing
  }
  return scale(total, 1.0 / static_cast<double>(targets.size()));
}

Value Model::l2_term(Binder& bind) const {
  Value total;
  for (const auto& [name, _] : params_) {
    Value sq = sum_squares(bind(name));
    total = total.valid() ? add(total, sq) : sq;
  }
  return total;
}

Value Model::forward_loss(Binder& bind, const ContextInstance& inst,
                          const Vocabulary& vocab) const {
  return add(nll_loss(bind, inst, vocab), scale(l2_term(bind), cfg_.l2_weight));
}

Model::PredictionScores Model::prediction_scores(Binder& bind,
                                                 const Interaction& interaction) const {
  PredictionScores ps;
  ps.candidates = interaction.interlocutors;
  Value pooled = col_max(interaction.columns);  // h_C
  std::array<Value, 2> qparts{pooled, interaction.encodings.back().summary};
  Value query = concat(qparts);

  std::vector<Value> spk_scores, adr_scores;
  for (const Value& column : interaction.columns) {
    spk_scores.push_back(dot(query, matvec(bind("pred.spk.W"), column)));
    adr_scores.push_back(dot(query, matvec(bind("pred.adr.W"), column)));
  }
  ps.speaker_scores = concat(spk_scores);
  ps.addressee_scores = concat(adr_scores);
  return ps;
}

Value Model::joint_loss(Binder& bind, const ContextInstance& inst,
                        const Vocabulary& vocab) const {
  Interaction interaction = run_interaction(bind, inst, vocab);
  DecoderSetup setup = prepare_decoder(bind, inst, vocab, interaction, inst.responding_speaker,
                                       inst.target_addressee);

  std::vector<int> targets = response_ids(inst, vocab);
  targets.push_back(Vocabulary::kEos);
  Value s = setup.s0;
  Value x = embed_token(bind, Vocabulary::kBos);
  Value total;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    StepResult step = decode_step(bind, setup, s, x);
    Value nll_j = cross_entropy_logits(step.logits, static_cast<std::size_t>(targets[j]));
    total = total.valid() ? add(total, nll_j) : nll_j;
    s = step.state;
    if (j + 1 < targets.size()) x = embed_token(bind, targets[j]);
  }
  Value generation = add(scale(total, 1.0 / static_cast<double>(targets.size())),
                         scale(l2_term(bind), cfg_.l2_weight));

  PredictionScores ps = prediction_scores(bind, interaction);
  auto spk_idx = interaction.index_of(inst.responding_speaker);
  auto adr_idx = interaction.index_of(inst.target_addressee);
  if (!spk_idx || !adr_idx) {
    throw ContractError("gold interlocutors outside the candidate set");
  }
  Value pred = add(cross_entropy_logits(ps.speaker_scores, *spk_idx),
                   cross_entropy_logits(ps.addressee_scores, *adr_idx));
  return add(generation, scale(pred, cfg_.joint_loss_weight));
}

Value Model::training_loss(Binder& bind, const ContextInstance& inst,
                           const Vocabulary& vocab) const {
  return cfg_.joint_prediction ? joint_loss(bind, inst, vocab)
                               : forward_loss(bind, inst, vocab);
}

double Model::instance_nll(const ContextInstance& inst, const Vocabulary& vocab) const {
  Tape tape;
  ParamMap& mutable_params = const_cast<ParamMap&>(params_);
  Binder bind(tape, mutable_params);
  return nll_loss(bind, inst, vocab).scalar_value();
}

Model::Prediction Model::predict_interlocutors(const ContextInstance& inst,
                                               const Vocabulary& vocab) const {
  Tape tape;
  ParamMap& mutable_params = const_cast<ParamMap&>(params_);
  Binder bind(tape, mutable_params);
  Interaction interaction = run_interaction(bind, inst, vocab);
  PredictionScores ps = prediction_scores(bind, interaction);

  Prediction out;
  out.candidates = ps.candidates;
  out.speaker_probs = softmax(ps.speaker_scores.val().data());
  out.addressee_probs = softmax(ps.addressee_scores.val().data());
  out.speaker = out.candidates[argmax_first(out.speaker_probs)];
  out.addressee = out.candidates[argmax_first(out.addressee_probs)];
  out.degenerate = out.candidates.size() < 2;
  return out;
}

Model::Generated Model::generate(const ContextInstance& inst, const Vocabulary& vocab,
                                 const GenOptions& opts) const {
  if (opts.beam_width < 1) throw ConfigError("beam width must be >= 1");
  Tape tape;
  ParamMap& mutable_params = const_cast<ParamMap&>(params_);
  Binder bind(tape, mutable_params);

  Interaction interaction = run_interaction(bind, inst, vocab);

  Generated out;
  std::string res_id = inst.responding_speaker;
  std::string tgt_id = inst.target_addressee;
  if (cfg_.joint_prediction) {
    // predicted interlocutors replace the gold ones for memory and vectors
    PredictionScores ps = prediction_scores(bind, interaction);
    auto spk_probs = softmax(ps.speaker_scores.val().data());
    auto adr_probs = softmax(ps.addressee_scores.val().data());
    res_id = ps.candidates[argmax_first(spk_probs)];
    tgt_id = ps.candidates[argmax_first(adr_probs)];
    out.degenerate_prediction = ps.candidates.size() < 2;
  }
  out.used_speaker = res_id;
  out.used_addressee = tgt_id;

  DecoderSetup setup = prepare_decoder(bind, inst, vocab, interaction, res_id, tgt_id);
  out.empty_memory = setup.memory.fell_back_empty;

  if (opts.mode == SearchMode::kGreedy) {
    Value s = setup.s0;
    Value x = embed_token(bind, Vocabulary::kBos);
    double total = 0.0;
    std::size_t steps_taken = 0;
    while (out.tokens.size() < cfg_.max_response_tokens) {
      StepResult step = decode_step(bind, setup, s, x);
      std::vector<double> lp = log_probs(step.logits.val().data());
      std::size_t k = argmax_first(lp);
      total += lp[k];
      ++steps_taken;
      if (k == Vocabulary::kEos) break;
      out.tokens.push_back(vocab.word(static_cast<int>(k)));
      s = step.state;
      x = embed_token(bind, static_cast<int>(k));
    }
    out.score = steps_taken ? total / static_cast<double>(steps_taken) : 0.0;
    return out;
  }

  struct Hyp {
    std::vector<int> tokens;
    double sum_logp = 0.0;
    std::size_t steps = 0;
    Value state;
    Value x;

    double final_score() const {
      return steps == 0 ? 0.0 : sum_logp / static_cast<double>(steps);
    }
  };

  Value bos = embed_token(bind, Vocabulary::kBos);
  std::vector<Hyp> live{{{}, 0.0, 0, setup.s0, bos}};
  std::vector<Hyp> finished;
  std::size_t width = opts.beam_width;

  for (std::size_t j = 0; j < cfg_.max_response_tokens && !live.empty(); ++j) {
    struct Cand {
      std::size_t hyp;
      int token;
      double sum_logp;
    };
    std::vector<Cand> cands;
    std::vector<StepResult> steps(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      steps[h] = decode_step(bind, setup, live[h].state, live[h].x);
      std::vector<double> lp = log_probs(steps[h].logits.val().data());
      // per-hypothesis shortlist; the global top-w is a subset of these
      std::vector<int> idx(lp.size());
      for (std::size_t k = 0; k < lp.size(); ++k) idx[k] = static_cast<int>(k);
      std::size_t keep = std::min<std::size_t>(width, idx.size());
      auto better = [&](int a, int b) {
        double la = lp[static_cast<std::size_t>(a)];
        double lb = lp[static_cast<std::size_t>(b)];
        if (la != lb) return la > lb;
        return a < b;
      };
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                        better);
      for (std::size_t k = 0; k < keep; ++k) {
        cands.push_back({h, idx[k], live[h].sum_logp + lp[static_cast<std::size_t>(idx[k])]});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.sum_logp != b.sum_logp) return a.sum_logp > b.sum_logp;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });

    // take the width best; EOS ends a hypothesis, the rest stay live
    std::vector<Hyp> next;
    std::size_t taken = 0;
    for (const Cand& c : cands) {
      if (taken >= width) break;
      ++taken;
      Hyp h = live[c.hyp];
      h.sum_logp = c.sum_logp;
      h.steps += 1;
      if (c.token == Vocabulary::kEos) {
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        h.state = steps[c.hyp].state;
        h.x = embed_token(bind, c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (Hyp& h : live) finished.push_back(std::move(h));  // ran out of length

  const Hyp* best = nullptr;
  for (const Hyp& h : finished) {
    if (!best || h.final_score() > best->final_score()) best = &h;
  }
  if (best) {
    out.score = best->final_score();
    for (int id : best->tokens) out.tokens.push_back(vocab.word(id));
  }
  return out;
}

double Model::sequence_score(const ContextInstance& inst, const Vocabulary& vocab,
                             const std::vector<std::string>& response) const {
  Tape tape;
  ParamMap& mutable_params = const_cast<ParamMap&>(params_);
  Binder bind(tape, mutable_params);
  Interaction interaction = run_interaction(bind, inst, vocab);
  DecoderSetup setup = prepare_decoder(bind, inst, vocab, interaction, inst.responding_speaker,
                                       inst.target_addressee);
  std::vector<int> targets;
  for (const auto& w : response) targets.push_back(vocab.id(w));
  targets.push_back(Vocabulary::kEos);

  Value s = setup.s0;
  Value x = embed_token(bind, Vocabulary::kBos);
  double total = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    StepResult step = decode_step(bind, setup, s, x);
    std::vector<double> lp = log_probs(step.logits.val().data());
    total += lp[static_cast<std::size_t>(targets[j])];
    s = step.state;
    if (j + 1 < targets.size()) x = embed_token(bind, targets[j]);
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace icred
