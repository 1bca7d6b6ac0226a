#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icred/corpus.hpp"

namespace icred {

/// Grammar for the role-sensitive synthetic corpus. Every utterance is a
/// speaker style token plus frame words with one payload noun at a random
/// slot; the gold response is
///   [style(responding speaker), "about", payload of the target addressee's
///    last utterance]
/// so the response payload can only be read off that utterance.
struct SynthConfig {
  std::size_t interlocutors = 4;
  std::size_t turns = 5;       // context turns per instance
  std::size_t instances = 200;
  std::vector<std::string> content_vocab;  // payload nouns; empty = default 20
  std::uint64_t seed = 1;

  /// Probability that a context turn has no explicit addressee.
  double absent_addressee_prob = 0.25;
};

/// The 20 payload nouns used when SynthConfig.content_vocab is empty.
const std::vector<std::string>& default_content_vocab();

/// Speaker style token ("fella_<i>") baked into every utterance of
/// interlocutor i and into responses they give.
std::string synth_style_token(std::size_t interlocutor_index);

std::vector<ContextInstance> synth_generate(const SynthConfig& cfg);

/// Index of the payload inside a gold synthetic response (the last token).
std::size_t synth_payload_position(const ContextInstance& inst);

}  // namespace icred
