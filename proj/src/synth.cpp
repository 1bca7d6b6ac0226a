#include "icred/synth.hpp"

#include <algorithm>
#include <set>

#include "icred/errors.hpp"
#include "icred/rng.hpp"

namespace icred {

const std::vector<std::string>& default_content_vocab() {
  static const std::vector<std::string> vocab = {
      "kernel", "repo",   "driver", "module", "server", "packet", "script",
      "buffer", "cable",  "router", "laptop", "monitor", "socket", "daemon",
      "mirror", "bridge", "shell",  "disk",   "patch",  "cache"};
  return vocab;
}

namespace {
const std::vector<std::string>& marker_pool() {
  static const std::vector<std::string> markers = {"well", "right", "okay", "so",
                                                   "look", "now",   "hm",   "yes",
                                                   "ah",   "oh",    "fine", "sure"};
  return markers;
}

const std::vector<std::string> kFrame = {"the", "topic", "is"};
}  // namespace

std::string synth_style_token(std::size_t interlocutor_index) {
  const auto& pool = marker_pool();
  if (interlocutor_index < pool.size()) return pool[interlocutor_index];
  return "marker" + std::to_string(interlocutor_index);
}

std::size_t synth_payload_position(const ContextInstance& inst) {
  if (inst.response.empty()) throw ContractError("synthetic instance with empty response");
  return inst.response.size() - 1;
}

std::vector<ContextInstance> synth_generate(const SynthConfig& cfg) {
  const std::vector<std::string>& vocab =
      cfg.content_vocab.empty() ? default_content_vocab() : cfg.content_vocab;
  if (vocab.size() < cfg.interlocutors) {
    throw ConfigError("synth: content vocabulary (" + std::to_string(vocab.size()) +
                      ") smaller than interlocutor count (" +
                      std::to_string(cfg.interlocutors) + ")");
  }
  if (cfg.interlocutors < 2) throw ConfigError("synth: need at least 2 interlocutors");
  if (cfg.turns < 3) throw ConfigError("synth: need at least 3 context turns");

  std::set<std::string> reserved(kFrame.begin(), kFrame.end());
  reserved.insert("about");
  for (std::size_t i = 0; i < cfg.interlocutors; ++i) reserved.insert(synth_style_token(i));
  for (const auto& w : vocab) {
    if (reserved.count(w)) {
      throw ConfigError("synth: content word collides with frame/style token: " + w);
    }
  }

  std::vector<std::string> names;
  for (std::size_t i = 0; i < cfg.interlocutors; ++i) names.push_back("a" + std::to_string(i + 1));

  Rng rng(cfg.seed);
  std::vector<ContextInstance> out;
  out.reserve(cfg.instances);

  for (std::size_t k = 0; k < cfg.instances; ++k) {
    std::size_t m = cfg.interlocutors;
    std::size_t n = cfg.turns;

    std::size_t tgt = rng.next_below(m);
    // target speaks twice: a decoy turn and a final say strictly before the
    // last context turn (so later observer updates dilute its column)
    std::size_t lo = n >= 3 ? n - 3 : 1;
    if (lo < 1) lo = 1;
    std::size_t hi = n - 2;
    std::size_t tgt_last = lo + rng.next_below(hi - lo + 1);
    std::size_t tgt_decoy = rng.next_below(tgt_last);

    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < m; ++i) {
      if (i != tgt) others.push_back(i);
    }
    rng.shuffle(others);

    std::vector<std::size_t> speaker_of(n);
    std::size_t fill = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t == tgt_last || t == tgt_decoy) {
        speaker_of[t] = tgt;
      } else {
        speaker_of[t] = others[fill % others.size()];
        ++fill;
      }
    }

    ContextInstance inst;
    std::vector<std::string> payload_of(n);
    for (std::size_t t = 0; t < n; ++t) {
      DialogueTurn turn;
      turn.speaker = names[speaker_of[t]];
      if (rng.next_double() >= cfg.absent_addressee_prob) {
        std::size_t adr = rng.next_below(m - 1);
        if (adr >= speaker_of[t]) ++adr;
        turn.addressee = names[adr];
      }
      payload_of[t] = vocab[rng.next_below(vocab.size())];
      turn.tokens.push_back(synth_style_token(speaker_of[t]));
      std::size_t slot = rng.next_below(kFrame.size() + 1);
      for (std::size_t f = 0; f <= kFrame.size(); ++f) {
        if (f == slot) turn.tokens.push_back(payload_of[t]);
        if (f < kFrame.size()) turn.tokens.push_back(kFrame[f]);
      }
      inst.turns.push_back(std::move(turn));
    }

    // responding speaker: anyone but the target that shows up in the context
    std::set<std::size_t> appearing;
    for (const auto& turn : inst.turns) {
      for (std::size_t i = 0; i < m; ++i) {
        if (turn.speaker == names[i] || turn.addressee == names[i]) appearing.insert(i);
      }
    }
    appearing.erase(tgt);
    std::vector<std::size_t> res_pool(appearing.begin(), appearing.end());
    std::size_t res = res_pool[rng.next_below(res_pool.size())];

    inst.responding_speaker = names[res];
    inst.target_addressee = names[tgt];
    inst.response = {synth_style_token(res), "about", payload_of[tgt_last]};
    validate_instance(inst, cfg.turns);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace icred
