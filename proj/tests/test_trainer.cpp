#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "icred/synth.hpp"
#include "icred/trainer.hpp"

using namespace icred;

namespace {

SynthConfig small_synth(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.instances = n;
  cfg.seed = seed;
  return cfg;
}

ModelConfig small_model_config(const Vocabulary& vocab) {
  ModelConfig cfg;
  cfg.word_dim = 8;
  cfg.utterance_hidden_dim = 8;
  cfg.interlocutor_dim = 8;
  cfg.vocab_size = static_cast<std::size_t>(vocab.size());
  cfg.l2_weight = 1e-5;
  return cfg;
}

}  // namespace

TEST_CASE("lr = 0 leaves parameters bit-identical") {
  auto instances = synth_generate(small_synth(12, 3));
  Vocabulary vocab = Vocabulary::build(instances);
  Model model(small_model_config(vocab), 5);
  ParamMap before = model.params();

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 7;
  cfg.lr = 0.0;
  cfg.eval_every = 0;
  train(model, instances, {}, vocab, cfg);

  for (const auto& [name, t] : before) {
    CHECK(model.params().at(name).data() == t.data());
  }
}

TEST_CASE("single memorizable instance overfits well below ln V") {
  auto instances = synth_generate(small_synth(1, 11));
  Vocabulary vocab = Vocabulary::build(instances);
  ModelConfig mc = small_model_config(vocab);
  mc.word_dim = 16;
  mc.utterance_hidden_dim = 16;
  mc.interlocutor_dim = 16;
  mc.l2_weight = 0.0;
  Model model(mc, 19);

  double initial = evaluate_loss(model, instances, vocab);

  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.max_steps = 500;
  cfg.lr = 3e-3;
  cfg.eval_every = 0;
  auto result = train(model, instances, {}, vocab, cfg);

  double final_nll = evaluate_loss(model, instances, vocab);
  CHECK(final_nll < initial);
  CHECK(final_nll < 0.1);
  CHECK(result.steps_run == 500);
}

TEST_CASE("training is bit-deterministic given the seed") {
  auto instances = synth_generate(small_synth(20, 23));
  Vocabulary vocab = Vocabulary::build(instances);
  auto dev = synth_generate(small_synth(6, 24));

  auto run = [&] {
    Model model(small_model_config(vocab), 7);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_steps = 20;
    cfg.eval_every = 5;
    cfg.patience = 100;
    cfg.seed = 77;
    return train(model, instances, dev, vocab, cfg);
  };
  auto r1 = run();
  auto r2 = run();
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (std::size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].train_loss == r2.curve[i].train_loss);
    CHECK(r1.curve[i].has_dev == r2.curve[i].has_dev);
    if (r1.curve[i].has_dev) CHECK(r1.curve[i].dev_nll == r2.curve[i].dev_nll);
  }
}

TEST_CASE("consecutive backward passes without an update agree exactly") {
  auto instances = synth_generate(small_synth(4, 31));
  Vocabulary vocab = Vocabulary::build(instances);
  Model model(small_model_config(vocab), 9);

  auto grads_once = [&] {
    Tape tape;
    Binder bind(tape, model.params());
    Value loss = model.forward_loss(bind, instances[0], vocab);
    tape.backward(loss);
    return bind.grads();
  };
  auto g1 = grads_once();
  auto g2 = grads_once();
  for (const auto& [name, g] : g1) CHECK(g.data() == g2.at(name).data());
}

TEST_CASE("evaluate_loss: ln V at zero params, duplication-invariant, excludes L2") {
  auto instances = synth_generate(small_synth(8, 41));
  Vocabulary vocab = Vocabulary::build(instances);
  ModelConfig mc = small_model_config(vocab);
  mc.l2_weight = 0.5;  // sizable L2 to catch leakage into reporting
  Model model(mc, 13);
  for (auto& [name, t] : model.params()) t = Tensor::zeros(t.shape());

  double nll = evaluate_loss(model, instances, vocab);
  CHECK(std::abs(nll - std::log(static_cast<double>(vocab.size()))) < 1e-10);

  std::vector<ContextInstance> doubled(instances);
  doubled.insert(doubled.end(), instances.begin(), instances.end());
  CHECK(evaluate_loss(model, doubled, vocab) == nll);

  CHECK_THROWS_AS(evaluate_loss(model, {}, vocab), DomainError);
}

TEST_CASE("overfit training generalizes worse than it memorizes") {
  auto train_set = synth_generate(small_synth(6, 51));
  auto dev_set = synth_generate(small_synth(20, 52));
  Vocabulary vocab = Vocabulary::build(train_set);
  Model model(small_model_config(vocab), 15);

  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.max_steps = 400;
  cfg.lr = 3e-3;
  cfg.eval_every = 0;
  train(model, train_set, {}, vocab, cfg);

  CHECK(evaluate_loss(model, train_set, vocab) < evaluate_loss(model, dev_set, vocab));
}

TEST_CASE("resume reproduces the uninterrupted loss curve") {
  auto instances = synth_generate(small_synth(16, 61));
  auto dev = synth_generate(small_synth(5, 62));
  Vocabulary vocab = Vocabulary::build(instances);

  TrainConfig base;
  base.batch_size = 4;
  base.max_steps = 24;
  base.eval_every = 6;
  base.patience = 100;
  base.seed = 99;

  Model uninterrupted(small_model_config(vocab), 21);
  auto full = train(uninterrupted, instances, dev, vocab, base);

  namespace fs = std::filesystem;
  fs::create_directories("test_resume_dir");
  Model first(small_model_config(vocab), 21);
  TrainConfig half = base;
  half.max_steps = 12;
  auto r1 = train(first, instances, dev, vocab, half);
  save_train_state("test_resume_dir/model", first, r1.final_state);

  Model second = load_model_checkpoint("test_resume_dir/model.ckpt");
  TrainerState state = load_train_state("test_resume_dir/model", second);
  auto r2 = train(second, instances, dev, vocab, base, &state);

  REQUIRE(r1.curve.size() + r2.curve.size() == full.curve.size());
  for (std::size_t i = 0; i < r2.curve.size(); ++i) {
    const auto& a = full.curve[r1.curve.size() + i];
    const auto& b = r2.curve[i];
    CHECK(a.step == b.step);
    CHECK(a.train_loss == b.train_loss);
    if (a.has_dev) CHECK(a.dev_nll == b.dev_nll);
  }
  for (const auto& [name, t] : uninterrupted.params()) {
    CHECK(second.params().at(name).data() == t.data());
  }
  fs::remove_all("test_resume_dir");
}

TEST_CASE("early stopping respects patience and keeps the best checkpoint") {
  auto instances = synth_generate(small_synth(10, 71));
  auto dev = synth_generate(small_synth(4, 72));
  Vocabulary vocab = Vocabulary::build(instances);
  ModelConfig mc = small_model_config(vocab);
  Model model(mc, 25);

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_steps = 4000;
  cfg.lr = 5e-3;
  cfg.eval_every = 10;
  cfg.patience = 3;
  auto result = train(model, instances, dev, vocab, cfg);

  CHECK(result.early_stopped);
  CHECK(result.steps_run < cfg.max_steps);
  REQUIRE(!result.best_params.empty());
  Model best(mc, result.best_params);
  CHECK(std::abs(evaluate_loss(best, dev, vocab) - result.best_dev) < 1e-12);
}

TEST_CASE("non-finite losses abort with the offending instance named") {
  auto instances = synth_generate(small_synth(4, 81));
  Vocabulary vocab = Vocabulary::build(instances);
  Model model(small_model_config(vocab), 27);
  // a parameter this size overflows the first matvec
  model.params().at("out.W").data().assign(model.params().at("out.W").numel(), 1e308);

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_steps = 1;
  cfg.eval_every = 0;
  try {
    train(model, instances, {}, vocab, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("instance") != std::string::npos);
  }
}

TEST_CASE("pretrained vectors overwrite known rows only") {
  auto instances = synth_generate(small_synth(4, 91));
  Vocabulary vocab = Vocabulary::build(instances);
  ModelConfig mc = small_model_config(vocab);
  Model model(mc, 33);

  std::ofstream vec("test_vectors.txt");
  vec << "kernel";
  for (std::size_t i = 0; i < mc.word_dim; ++i) vec << " " << 0.25 * static_cast<double>(i);
  vec << "\nunknownword";
  for (std::size_t i = 0; i < mc.word_dim; ++i) vec << " 1.0";
  vec << "\n";
  vec.close();

  std::size_t loaded = load_pretrained_vectors(model, vocab, "test_vectors.txt");
  CHECK(loaded == 1);
  std::size_t row = static_cast<std::size_t>(vocab.id("kernel"));
  for (std::size_t i = 0; i < mc.word_dim; ++i) {
    CHECK(model.params().at("embed.E").data()[row * mc.word_dim + i] ==
          0.25 * static_cast<double>(i));
  }
  std::remove("test_vectors.txt");

  CHECK_THROWS_AS(load_pretrained_vectors(model, vocab, "missing_vectors.txt"), ConfigError);
}

TEST_CASE("loss curve CSV lists dev only on eval steps") {
  std::vector<LossPoint> curve{{1, 2.5, 0.0, false}, {2, 2.0, 1.5, true}};
  write_loss_curve("test_curve.csv", curve);
  std::ifstream in("test_curve.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,train_loss,dev_nll");
  std::getline(in, line);
  CHECK(line == "1,2.5,");
  std::getline(in, line);
  CHECK(line == "2,2,1.5");
  std::remove("test_curve.csv");
}
