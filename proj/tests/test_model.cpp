#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "icred/errors.hpp"
#include "icred/grad_check.hpp"
#include "icred/trainer.hpp"
#include "oracle.hpp"

using namespace icred;

namespace {

ModelConfig micro_config(std::size_t vocab) {
  ModelConfig cfg;
  cfg.word_dim = 4;
  cfg.utterance_hidden_dim = 4;  // 2 per direction
  cfg.interlocutor_dim = 6;
  cfg.vocab_size = vocab;
  cfg.l2_weight = 1e-3;
  return cfg;
}

/// vocab of 12 plain words, ids 4..15
Vocabulary test_vocab() {
  std::vector<std::string> words;
  for (int i = 0; i < 12; ++i) words.push_back("w" + std::to_string(i));
  return Vocabulary::from_words(words);
}

ContextInstance micro_instance() {
  ContextInstance inst;
  inst.turns.push_back({"a1", "a2", {"w0", "w1", "w2"}});
  inst.turns.push_back({"a3", "", {"w3", "w4"}});
  inst.turns.push_back({"a2", "a1", {"w5", "w6", "w7"}});
  inst.responding_speaker = "a1";
  inst.target_addressee = "a2";
  inst.response = {"w8", "w9"};
  return inst;
}

Model zero_model(const ModelConfig& cfg) {
  Model m(cfg, 1);
  for (auto& [name, t] : m.params()) t = Tensor::zeros(t.shape());
  return m;
}

}  // namespace

TEST_CASE("encode_utterance matches the scalar-loop oracle column by column") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 3);
  Vocabulary vocab = test_vocab();

  std::vector<int> ids{vocab.id("w0"), vocab.id("w5"), vocab.id("w9")};
  Tape tape;
  Binder bind(tape, model.params());
  auto enc = model.encode_utterance(bind, ids);
  auto expect = oracle::encode(model.params(), cfg, ids);

  REQUIRE(enc.columns.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(enc.columns[i].val().numel() == expect.columns[i].size());
    for (std::size_t j = 0; j < expect.columns[i].size(); ++j) {
      CHECK(enc.columns[i].val()[j] == doctest::Approx(expect.columns[i][j]).epsilon(1e-13));
    }
  }
  for (std::size_t j = 0; j < expect.summary.size(); ++j) {
    CHECK(enc.summary.val()[j] == doctest::Approx(expect.summary[j]).epsilon(1e-13));
  }
}

TEST_CASE("encode_utterance: zero params give zero states, single token is symmetric") {
  ModelConfig cfg = micro_config(16);
  Model zero = zero_model(cfg);
  Vocabulary vocab = test_vocab();

  Tape tape;
  Binder bind(tape, zero.params());
  auto enc = zero.encode_utterance(bind, {4, 5, 6, 7});
  for (const auto& col : enc.columns) {
    for (double v : col.val().data()) CHECK(v == 0.0);
  }

  // with shared direction weights, both directions agree on a single token
  Model model(cfg, 5);
  for (const char* part : {".Wz", ".Wr", ".Wh", ".Uz", ".Ur", ".Uh", ".bz", ".br", ".bh"}) {
    model.params().at(std::string("enc.bwd") + part) =
        model.params().at(std::string("enc.fwd") + part);
  }
  Tape tape2;
  Binder bind2(tape2, model.params());
  auto single = model.encode_utterance(bind2, {vocab.id("w3")});
  REQUIRE(single.columns.size() == 1);
  std::size_t d = cfg.direction_dim();
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(single.columns[0].val()[i] == single.columns[0].val()[d + i]);
  }

  CHECK_THROWS_AS(model.encode_utterance(bind2, {}), DomainError);
}

TEST_CASE("run_interaction routes roles through the right GRUs") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 7);
  Vocabulary vocab = test_vocab();

  // turn 1: a1 speaks to a2; turn 2: a3 speaks to a1
  ContextInstance inst;
  inst.turns.push_back({"a1", "a2", {"w0", "w1"}});
  inst.turns.push_back({"a3", "a1", {"w2", "w3", "w4"}});
  inst.responding_speaker = "a3";
  inst.target_addressee = "a1";
  inst.response = {"w5"};

  Tape tape;
  Binder bind(tape, model.params());
  auto result = model.run_interaction(bind, inst, vocab);
  REQUIRE(result.interlocutors == std::vector<std::string>{"a1", "a2", "a3"});

  const ParamMap& p = model.params();
  auto h1 = oracle::encode(p, cfg, oracle::ids_of(vocab, inst.turns[0].tokens)).summary;
  auto h2 = oracle::encode(p, cfg, oracle::ids_of(vocab, inst.turns[1].tokens)).summary;
  auto spk = oracle::GruW::from(p, "inter.spk");
  auto adr = oracle::GruW::from(p, "inter.adr");
  auto obs = oracle::GruW::from(p, "inter.obs");
  oracle::Vec zero(cfg.interlocutor_dim, 0.0);

  // a1: speaker then addressee; a2: addressee then observer; a3: observer then speaker
  auto a1 = oracle::gru(adr, oracle::gru(spk, zero, h1), h2);
  auto a2 = oracle::gru(obs, oracle::gru(adr, zero, h1), h2);
  auto a3 = oracle::gru(spk, oracle::gru(obs, zero, h1), h2);
  for (std::size_t i = 0; i < cfg.interlocutor_dim; ++i) {
    CHECK(result.column_of("a1").val()[i] == doctest::Approx(a1[i]).epsilon(1e-13));
    CHECK(result.column_of("a2").val()[i] == doctest::Approx(a2[i]).epsilon(1e-13));
    CHECK(result.column_of("a3").val()[i] == doctest::Approx(a3[i]).epsilon(1e-13));
  }

  CHECK_THROWS_AS(result.column_of("nobody"), ContractError);
}

TEST_CASE("absent addressee: everyone but the speaker observes, equal peers stay equal") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 9);
  Vocabulary vocab = test_vocab();

  ContextInstance inst;
  inst.turns.push_back({"a1", "", {"w0", "w1", "w2"}});
  inst.responding_speaker = "a2";  // pure observers, equal role history
  inst.target_addressee = "a3";
  inst.response = {"w5"};

  Tape tape;
  Binder bind(tape, model.params());
  auto result = model.run_interaction(bind, inst, vocab);
  REQUIRE(result.interlocutors == std::vector<std::string>{"a1", "a2", "a3"});
  CHECK(result.column_of("a2").val().data() == result.column_of("a3").val().data());

  const ParamMap& p = model.params();
  auto h1 = oracle::encode(p, cfg, oracle::ids_of(vocab, inst.turns[0].tokens)).summary;
  auto obs = oracle::GruW::from(p, "inter.obs");
  oracle::Vec zero(cfg.interlocutor_dim, 0.0);
  auto want = oracle::gru(obs, zero, h1);
  for (std::size_t i = 0; i < cfg.interlocutor_dim; ++i) {
    CHECK(result.column_of("a2").val()[i] == doctest::Approx(want[i]).epsilon(1e-13));
  }
}

TEST_CASE("observer symmetry: identical role histories give bit-identical columns") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 21);
  Vocabulary vocab = test_vocab();
  Rng rng(1234);

  for (int trial = 0; trial < 200; ++trial) {
    // random turns among 3 active interlocutors plus 2 pure observers
    ContextInstance inst;
    std::size_t n_turns = 1 + rng.next_below(4);
    for (std::size_t t = 0; t < n_turns; ++t) {
      DialogueTurn turn;
      std::size_t s = rng.next_below(3);
      turn.speaker = "a" + std::to_string(s + 1);
      if (rng.next_below(2) == 0) {
        std::size_t a = rng.next_below(2);
        if (a >= s) ++a;
        turn.addressee = "a" + std::to_string(a + 1);
      }
      std::size_t len = 1 + rng.next_below(3);
      for (std::size_t i = 0; i < len; ++i) {
        turn.tokens.push_back("w" + std::to_string(rng.next_below(12)));
      }
      inst.turns.push_back(turn);
    }
    inst.responding_speaker = "obs1";
    inst.target_addressee = "obs2";
    inst.response = {"w0"};

    Tape tape;
    Binder bind(tape, model.params());
    auto result = model.run_interaction(bind, inst, vocab);
    CHECK(result.column_of("obs1").val().data() == result.column_of("obs2").val().data());
  }
}

TEST_CASE("select_addressee_memory covers all five types") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 11);
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();  // a2 last speaks at turn 3 (index 2)

  Tape tape;
  Binder bind(tape, model.params());
  auto interaction = model.run_interaction(bind, inst, vocab);

  auto mem = model.select_addressee_memory(inst, interaction.encodings, MemoryType::kAddressee,
                                           "a2", "a1");
  CHECK(mem.source_turn == 2);
  CHECK(mem.columns.size() == 3);
  CHECK(!mem.fell_back_empty);

  // target a3 last spoke at the middle turn (Figure-2 shape: not the latest)
  auto mem3 = model.select_addressee_memory(inst, interaction.encodings, MemoryType::kAddressee,
                                            "a3", "a1");
  CHECK(mem3.source_turn == 1);
  CHECK(mem3.columns.size() == 2);

  auto latest =
      model.select_addressee_memory(inst, interaction.encodings, MemoryType::kLatest, "a2", "a1");
  CHECK(latest.source_turn == 2);

  auto all = model.select_addressee_memory(inst, interaction.encodings,
                                           MemoryType::kAllUtterance, "a2", "a1");
  CHECK(all.columns.size() == 3 + 2 + 3);

  auto spk =
      model.select_addressee_memory(inst, interaction.encodings, MemoryType::kSpeaker, "a2", "a1");
  CHECK(spk.source_turn == 0);  // a1 speaks only in the first turn

  auto none =
      model.select_addressee_memory(inst, interaction.encodings, MemoryType::kNone, "a2", "a1");
  CHECK(none.empty());
  CHECK(!none.fell_back_empty);

  // a target that never speaks: empty and flagged
  auto ghost = model.select_addressee_memory(inst, interaction.encodings, MemoryType::kAddressee,
                                             "a9", "a1");
  CHECK(ghost.empty());
  CHECK(ghost.fell_back_empty);

  ModelConfig fb = cfg;
  fb.empty_memory_latest_fallback = true;
  Model fallback_model(fb, 11);
  Tape tape2;
  Binder bind2(tape2, fallback_model.params());
  auto interaction2 = fallback_model.run_interaction(bind2, inst, vocab);
  auto fbmem = fallback_model.select_addressee_memory(inst, interaction2.encodings,
                                                      MemoryType::kAddressee, "a9", "a1");
  CHECK(!fbmem.empty());
  CHECK(fbmem.fell_back_empty);
  CHECK(fbmem.source_turn == 2);
}

TEST_CASE("attend: convexity, uniform case, naive-loop oracle") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 13);
  Rng rng(55);

  Tape tape;
  Binder bind(tape, model.params());
  Value s = tape.constant(Tensor::uniform({cfg.decoder_dim()}, -1, 1, rng));

  // all columns identical: the convex combination is that column
  Tensor v = Tensor::uniform({cfg.utterance_hidden_dim}, -1, 1, rng);
  std::vector<Value> same{tape.constant(v), tape.constant(v), tape.constant(v)};
  auto att = model.attend(bind, s, same);
  for (std::size_t i = 0; i < v.numel(); ++i) {
    CHECK(att.context.val()[i] == doctest::Approx(v[i]).epsilon(1e-12));
  }

  // zero bilinear matrix: uniform weights, context = column mean
  Model zw(cfg, 13);
  zw.params().at("attn.W") = Tensor::zeros({cfg.decoder_dim(), cfg.utterance_hidden_dim});
  Tape tape2;
  Binder bind2(tape2, zw.params());
  Value s2 = tape2.constant(Tensor::uniform({cfg.decoder_dim()}, -1, 1, rng));
  std::vector<Value> cols;
  std::vector<Tensor> cols_t;
  for (int k = 0; k < 4; ++k) {
    cols_t.push_back(Tensor::uniform({cfg.utterance_hidden_dim}, -1, 1, rng));
    cols.push_back(tape2.constant(cols_t.back()));
  }
  auto att2 = zw.attend(bind2, s2, cols);
  for (double a : att2.weights.val().data()) CHECK(a == doctest::Approx(0.25).epsilon(1e-13));
  for (std::size_t i = 0; i < cfg.utterance_hidden_dim; ++i) {
    double mean = 0.0;
    for (const auto& c : cols_t) mean += c[i];
    mean /= 4.0;
    CHECK(att2.context.val()[i] == doctest::Approx(mean).epsilon(1e-12));
  }

  // random 5-column memory against the naive scalar loop
  Tape tape3;
  Binder bind3(tape3, model.params());
  Tensor st = Tensor::uniform({cfg.decoder_dim()}, -1, 1, rng);
  Value s3 = tape3.constant(st);
  std::vector<Value> mem;
  std::vector<oracle::Vec> mem_o;
  for (int k = 0; k < 5; ++k) {
    Tensor c = Tensor::uniform({cfg.utterance_hidden_dim}, -1, 1, rng);
    mem.push_back(tape3.constant(c));
    mem_o.push_back(c.data());
  }
  auto att3 = model.attend(bind3, s3, mem);
  auto want = oracle::attend(model.params(), st.data(), mem_o);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(std::abs(att3.context.val()[i] - want[i]) < 1e-12);
  }

  CHECK_THROWS_AS(model.attend(bind3, s3, {}), DomainError);
}

TEST_CASE("forward_loss equals ln V on the zero-parameter model") {
  for (double lambda : {0.0, 1e-4}) {
    ModelConfig cfg = micro_config(16);
    cfg.l2_weight = lambda;
    Model model = zero_model(cfg);
    Vocabulary vocab = test_vocab();
    ContextInstance inst = micro_instance();

    Tape tape;
    Binder bind(tape, model.params());
    double loss = model.forward_loss(bind, inst, vocab).scalar_value();
    CHECK(std::abs(loss - std::log(16.0)) < 1e-10);
  }
}

TEST_CASE("teacher-forced probabilities sum to one at every step") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 17);
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();

  Tape tape;
  Binder bind(tape, model.params());
  auto inter = model.run_interaction(bind, inst, vocab);
  auto setup = model.prepare_decoder(bind, inst, vocab, inter, "a1", "a2");
  Value s = setup.s0;
  Value x = model.embed_token(bind, Vocabulary::kBos);
  for (int step = 0; step < 3; ++step) {
    auto res = model.decode_step(bind, setup, s, x);
    auto probs = softmax(res.logits.val().data());
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-10);
    s = res.state;
    x = model.embed_token(bind, 5);
  }
}

TEST_CASE("forward_loss matches the scalar oracle under every variant") {
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();

  int seed = 100;
  for (MemoryType mtype : {MemoryType::kAddressee, MemoryType::kAllUtterance,
                           MemoryType::kLatest, MemoryType::kSpeaker, MemoryType::kNone}) {
    for (int flags = 0; flags < 4; ++flags) {
      ModelConfig cfg = micro_config(16);
      cfg.memory_type = mtype;
      cfg.use_speaker_vector = (flags & 1) == 0;
      cfg.use_addressee_vector = (flags & 2) == 0;
      Model model(cfg, static_cast<std::uint64_t>(seed++));

      Tape tape;
      Binder bind(tape, model.params());
      double got = model.forward_loss(bind, inst, vocab).scalar_value();
      double want = oracle::forward_loss(model.params(), cfg, inst, vocab);
      CHECK(std::abs(got - want) < 1e-10);
    }
  }
}

TEST_CASE("joint_loss: weight zero equals forward_loss, zero params add 2 ln k") {
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();  // 3 candidates a1, a2, a3

  ModelConfig cfg = micro_config(16);
  cfg.joint_prediction = true;
  cfg.joint_loss_weight = 0.0;
  Model model(cfg, 31);
  {
    Tape tape;
    Binder bind(tape, model.params());
    double j = model.joint_loss(bind, inst, vocab).scalar_value();
    Tape tape2;
    Binder bind2(tape2, model.params());
    double f = model.forward_loss(bind2, inst, vocab).scalar_value();
    CHECK(j == f);
  }

  ModelConfig cfg2 = micro_config(16);
  cfg2.joint_prediction = true;
  cfg2.l2_weight = 0.0;
  Model zero = zero_model(cfg2);
  {
    Tape tape;
    Binder bind(tape, zero.params());
    double j = zero.joint_loss(bind, inst, vocab).scalar_value();
    CHECK(std::abs(j - (std::log(16.0) + 2.0 * std::log(3.0))) < 1e-10);
  }

  ModelConfig cfg3 = micro_config(16);
  cfg3.joint_prediction = true;
  cfg3.joint_loss_weight = 0.7;
  Model m3(cfg3, 41);
  {
    Tape tape;
    Binder bind(tape, m3.params());
    double got = m3.joint_loss(bind, inst, vocab).scalar_value();
    double want = oracle::joint_loss(m3.params(), cfg3, inst, vocab);
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("ablated vectors make the loss invariant to their interaction GRUs") {
  Vocabulary vocab = test_vocab();

  // every turn is spoken by the responder, so inter.spk only shapes A_res
  ContextInstance res_only;
  res_only.turns.push_back({"a1", "a2", {"w0", "w1"}});
  res_only.turns.push_back({"a1", "", {"w2"}});
  res_only.responding_speaker = "a1";
  res_only.target_addressee = "a2";
  res_only.response = {"w3", "w4"};

  ModelConfig cfg = micro_config(16);
  cfg.use_speaker_vector = false;
  cfg.memory_type = MemoryType::kNone;  // memory would otherwise expose content
  Model model(cfg, 61);
  auto loss_of = [&](Model& m) {
    Tape tape;
    Binder bind(tape, m.params());
    return m.nll_loss(bind, res_only, vocab).scalar_value();
  };
  double before = loss_of(model);
  Rng rng(99);
  model.params().at("inter.spk.Wz") =
      Tensor::uniform({cfg.interlocutor_dim, cfg.utterance_hidden_dim}, -3, 3, rng);
  model.params().at("inter.spk.bh") = Tensor::uniform({cfg.interlocutor_dim}, -3, 3, rng);
  CHECK(loss_of(model) == before);

  // only the target is ever addressed, so inter.adr only shapes A_tgt
  ContextInstance tgt_only;
  tgt_only.turns.push_back({"a1", "a2", {"w0", "w1"}});
  tgt_only.turns.push_back({"a3", "a2", {"w2", "w3"}});
  tgt_only.responding_speaker = "a1";
  tgt_only.target_addressee = "a2";
  tgt_only.response = {"w4"};

  ModelConfig cfg2 = micro_config(16);
  cfg2.use_addressee_vector = false;
  cfg2.memory_type = MemoryType::kAddressee;  // a2 never speaks: empty memory
  Model model2(cfg2, 62);
  auto loss2_of = [&](Model& m) {
    Tape tape;
    Binder bind(tape, m.params());
    return m.nll_loss(bind, tgt_only, vocab).scalar_value();
  };
  double before2 = loss2_of(model2);
  auto gen2 = model2.generate(tgt_only, vocab);
  model2.params().at("inter.adr.Uh") =
      Tensor::uniform({cfg2.interlocutor_dim, cfg2.interlocutor_dim}, -3, 3, rng);
  CHECK(loss2_of(model2) == before2);
  auto gen2b = model2.generate(tgt_only, vocab);
  CHECK(gen2.tokens == gen2b.tokens);

  // with no memory the attention parameters are inert
  ModelConfig cfg3 = micro_config(16);
  cfg3.memory_type = MemoryType::kNone;
  Model model3(cfg3, 63);
  ContextInstance inst = micro_instance();
  auto loss3_of = [&](Model& m) {
    Tape tape;
    Binder bind(tape, m.params());
    return m.nll_loss(bind, inst, vocab).scalar_value();
  };
  double before3 = loss3_of(model3);
  model3.params().at("attn.W") =
      Tensor::uniform({cfg3.decoder_dim(), cfg3.utterance_hidden_dim}, -3, 3, rng);
  CHECK(loss3_of(model3) == before3);
}

TEST_CASE("decode with zero parameters is uniform; generation is a forced chain") {
  ModelConfig cfg = micro_config(16);
  Model model = zero_model(cfg);
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();

  Tape tape;
  Binder bind(tape, model.params());
  auto inter = model.run_interaction(bind, inst, vocab);
  auto setup = model.prepare_decoder(bind, inst, vocab, inter, "a1", "a2");
  auto step = model.decode_step(bind, setup, setup.s0, model.embed_token(bind, Vocabulary::kBos));
  for (double v : step.logits.val().data()) CHECK(v == 0.0);

  // bias the output toward one word: greedy emits it until the length cap
  Model forced = zero_model(cfg);
  forced.params().at("embed.E") = [&] {
    Tensor e = Tensor::zeros({cfg.vocab_size, cfg.word_dim});
    e.at(static_cast<std::size_t>(vocab.id("w7")), 0) = 1.0;
    return e;
  }();
  forced.params().at("out.b") = [&] {
    Tensor b = Tensor::zeros({cfg.word_dim});
    b[0] = 5.0;
    return b;
  }();
  auto gen = forced.generate(inst, vocab);
  REQUIRE(gen.tokens.size() == cfg.max_response_tokens);
  for (const auto& t : gen.tokens) CHECK(t == "w7");
}

TEST_CASE("beam(1) equals greedy on 100 random micro-models") {
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();
  for (int seed = 0; seed < 100; ++seed) {
    ModelConfig cfg = micro_config(16);
    cfg.max_response_tokens = 6;
    Model model(cfg, static_cast<std::uint64_t>(1000 + seed));
    auto greedy = model.generate(inst, vocab);
    Model::GenOptions beam1;
    beam1.mode = Model::SearchMode::kBeam;
    beam1.beam_width = 1;
    auto beam = model.generate(inst, vocab, beam1);
    CHECK(greedy.tokens == beam.tokens);
    CHECK(greedy.score == doctest::Approx(beam.score).epsilon(1e-12));
  }
}

TEST_CASE("beam(3) never scores below greedy on the fixture set") {
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();
  for (int seed = 0; seed < 40; ++seed) {
    ModelConfig cfg = micro_config(16);
    cfg.max_response_tokens = 6;
    Model model(cfg, static_cast<std::uint64_t>(2000 + seed));
    auto greedy = model.generate(inst, vocab);
    Model::GenOptions opts;
    opts.mode = Model::SearchMode::kBeam;
    opts.beam_width = 3;
    auto beam = model.generate(inst, vocab, opts);
    CHECK(beam.score >= greedy.score - 1e-12);
  }

  Model::GenOptions bad;
  bad.beam_width = 0;
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 1);
  CHECK_THROWS_AS(model.generate(inst, vocab, bad), ConfigError);
}

TEST_CASE("predict_interlocutors: symmetry, uniformity, oracle agreement") {
  ModelConfig cfg = micro_config(16);
  Vocabulary vocab = test_vocab();

  // two pure observers share a column: their probabilities tie at 0.5
  ContextInstance pair;
  pair.turns.push_back({"a1", "", {"w0", "w1"}});
  pair.responding_speaker = "b1";
  pair.target_addressee = "b2";
  pair.response = {"w2"};
  Model model(cfg, 71);
  auto pred = model.predict_interlocutors(pair, vocab);
  REQUIRE(pred.candidates == std::vector<std::string>{"a1", "b1", "b2"});
  CHECK(pred.speaker_probs[1] == doctest::Approx(pred.speaker_probs[2]).epsilon(1e-12));
  CHECK(pred.addressee_probs[1] == doctest::Approx(pred.addressee_probs[2]).epsilon(1e-12));

  // zero projection matrices: uniform over candidates
  Model zw(cfg, 72);
  zw.params().at("pred.spk.W") =
      Tensor::zeros({cfg.interlocutor_dim + cfg.utterance_hidden_dim, cfg.interlocutor_dim});
  zw.params().at("pred.adr.W") =
      Tensor::zeros({cfg.interlocutor_dim + cfg.utterance_hidden_dim, cfg.interlocutor_dim});
  ContextInstance inst = micro_instance();
  auto uni = zw.predict_interlocutors(inst, vocab);
  for (double p : uni.speaker_probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // scores against the scalar oracle
  Model m(cfg, 73);
  auto got = m.predict_interlocutors(inst, vocab);
  auto st = oracle::interaction(m.params(), cfg, inst, vocab);
  oracle::Vec pooled(cfg.interlocutor_dim, -std::numeric_limits<double>::infinity());
  for (const auto& col : st.columns) {
    for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] = std::max(pooled[i], col[i]);
  }
  oracle::Vec query = oracle::vcat({pooled, st.encodings.back().summary});
  oracle::Vec scores(st.who.size());
  auto wspk = oracle::to_mat(m.params().at("pred.spk.W"));
  for (std::size_t i = 0; i < st.who.size(); ++i) {
    scores[i] = oracle::dotv(query, oracle::matv(wspk, st.columns[i]));
  }
  auto want = oracle::softmaxv(scores);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(std::abs(got.speaker_probs[i] - want[i]) < 1e-12);
  }

  // single candidate: degenerate, flagged
  ContextInstance lonely;
  lonely.turns.push_back({"solo", "", {"w0"}});
  lonely.responding_speaker = "solo";
  lonely.target_addressee = "solo";
  lonely.response = {"w1"};
  auto deg = m.predict_interlocutors(lonely, vocab);
  CHECK(deg.degenerate);
}

TEST_CASE("joint generation replaces gold interlocutors with predictions") {
  ModelConfig cfg = micro_config(16);
  cfg.joint_prediction = true;
  Model model(cfg, 81);
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();

  auto pred = model.predict_interlocutors(inst, vocab);
  auto gen = model.generate(inst, vocab);
  CHECK(gen.used_speaker == pred.speaker);
  CHECK(gen.used_addressee == pred.addressee);
}

TEST_CASE("model checkpoint round-trips; vocab mismatch is rejected by name") {
  ModelConfig cfg = micro_config(16);
  Model model(cfg, 91);
  save_model_checkpoint("test_model_ckpt.bin", model);
  Model loaded = load_model_checkpoint("test_model_ckpt.bin");
  CHECK(loaded.params().at("embed.E").data() == model.params().at("embed.E").data());
  CHECK(loaded.config().vocab_size == cfg.vocab_size);

  // doctor the sidecar's vocab_size: the embedding shape no longer matches
  KvMap kv = read_kv_file("test_model_ckpt.bin.cfg");
  kv["vocab_size"] = "99";
  write_kv_file("test_model_ckpt.bin.cfg", kv);
  try {
    load_model_checkpoint("test_model_ckpt.bin");
    FAIL("expected a load error");
  } catch (const DimError& e) {
    CHECK(std::string(e.what()).find("embed.E") != std::string::npos);
  }
  std::remove("test_model_ckpt.bin");
  std::remove("test_model_ckpt.bin.cfg");
}

TEST_CASE("micro gradient check across ablations and memory types") {
  Vocabulary vocab = test_vocab();
  ContextInstance inst = micro_instance();

  ModelConfig cfg = micro_config(16);
  cfg.l2_weight = 1e-3;
  Model model(cfg, 111);
  auto build = [&](Tape& tape, Binder& bind) {
    (void)tape;
    return model.forward_loss(bind, inst, vocab);
  };
  auto report = grad_check(model.params(), build, 1e-4);
  if (!report.ok()) {
    std::printf("worst: %s[%zu] rel %.3g\n", report.worst_param.c_str(), report.worst_coord,
                report.max_rel_err);
  }
  CHECK(report.ok());
}
