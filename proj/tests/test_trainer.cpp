#include <cmath>
#include <cstring>

#include "octseg/dataio.hpp"
#include "octseg/samplekit.hpp"
#include "octseg/trainer.hpp"
#include "support.hpp"

using namespace octseg;

namespace {

UNetConfig tiny_config(std::uint64_t seed = 1) {
  UNetConfig cfg;
  cfg.base_channels = 2;
  cfg.depth = 2;
  cfg.aspp_rates = {1, 2};
  cfg.dropout = {0.1, 0.1, 0.2};
  cfg.seed = seed;
  return cfg;
}

std::uint32_t le32(const std::string& b, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

/// Walks the checkpoint layout independently of the decoder and returns the
/// tensor names in file order.
std::vector<std::string> checkpoint_names(const std::string& b) {
  std::size_t pos = 4;
  CHECK(le32(b, pos) == 1);
  pos += le32(b, pos);
  const std::uint32_t count = le32(b, pos);
  std::vector<std::string> names;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t len = static_cast<unsigned char>(b[pos]) | (static_cast<unsigned char>(b[pos + 1]) << 8);
    pos += 2;
    names.push_back(b.substr(pos, len));
    pos += len;
    const std::size_t rank = static_cast<unsigned char>(b[pos++]);
    std::size_t n = 1;
    for (std::size_t r = 0; r < rank; ++r) n *= le32(b, pos);
    pos += 4 * n;
  }
  CHECK(pos == b.size());
  return names;
}

struct PhantomSet {
  std::vector<TrainingExample> examples;
  std::vector<Sample> samples;
  std::vector<BinaryMask> masks;
};

PhantomSet phantom_set(std::size_t n, const ReferenceDims& ref, std::uint64_t seed) {
  PhantomSet set;
  for (std::size_t i = 0; i < n; ++i) {
    const Phantom ph = gen_phantom(random_phantom_spec(ref.rows, ref.cols, derive_seed(seed, i)));
    set.samples.push_back(prepare_sample(ph.image, ref, {}));
    set.masks.push_back(ph.mask);
    set.examples.push_back(make_example(set.samples.back(), ph.mask));
  }
  return set;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::InvalidConfig);
  cfg = TrainConfig{};
  cfg.adam.learning_rate = 0.0;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::InvalidConfig);
  cfg = TrainConfig{};
  cfg.clamp_eps = 0.5;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::InvalidConfig);
}

TEST_CASE("bce loss values") {
  Tensor<float> t({1, 2, 2}, {0, 1, 1, 0});
  CHECK(bce_loss(t, t) <= -std::log(1.0 - 1e-7) + 1e-12);
  CHECK(bce_loss(t, t) >= 0.0);
  CHECK(std::abs(bce_loss(Tensor<float>({1, 2, 2}, 0.5f), t) - std::log(2.0)) <= 1e-7);

  SplitMix64 rng(1);
  Tensor<float> p({1, 5, 7}), y({1, 5, 7});
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<float>(rng.uniform(0.001, 0.999));
    y[i] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
  }
  double oracle = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = p[i];
    oracle -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
  }
  oracle /= static_cast<double>(p.size());
  CHECK(std::abs(bce_loss(p, y) - oracle) <= 1e-9);
  CHECK_ERROR_KIND(bce_loss(p, Tensor<float>({1, 5, 6})), ErrorKind::ShapeMismatch);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  ParamStore<float> store;
  store.add("a", Tensor<float>({3}, {1.0f, -2.0f, 0.5f}));
  const Tensor<float> before = store.at("a").value;
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(store, state, {});
  CHECK(store.at("a").value == before);
  CHECK(state.step == 5);
}

TEST_CASE("adam first step has magnitude lr") {
  ParamStore<double> store;
  store.add("x", Tensor<double>({1}, {0.3})).grad[0] = 1.0;
  AdamState state;
  adam_step(store, state, {});
  CHECK(std::abs((store.at("x").value[0] - 0.3) - (-1e-3 / (1.0 + 1e-8))) <= 1e-9);
  CHECK(store.at("x").grad[0] == 1.0);
}

TEST_CASE("adam trajectory matches the recurrence") {
  ParamStore<double> store;
  Parameter<double>& p = store.add("x", Tensor<double>({1}, {1.5}));
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  double theta = 1.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * theta - std::sin(theta);
    p.grad[0] = g;
    adam_step(store, state, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    theta -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(p.value[0] - theta) <= 1e-12);
  }
}

TEST_CASE("adam rejects a state from another parameter set") {
  ParamStore<float> a, b;
  a.add("x", Tensor<float>({2}));
  b.add("x", Tensor<float>({3}));
  AdamState state;
  adam_step(a, state, {});
  CHECK_ERROR_KIND(adam_step(b, state, {}), ErrorKind::StateShapeMismatch);
  ParamStore<float> c;
  c.add("x", Tensor<float>({2}));
  c.add("y", Tensor<float>({2}));
  CHECK_ERROR_KIND(adam_step(c, state, {}), ErrorKind::StateShapeMismatch);
}

TEST_CASE("checkpoint round trip and layout") {
  testing::TempDir dir;
  Checkpoint cp{UNet<float>(tiny_config(5)), ReferenceDims{16, 24}};
  SplitMix64 rng(2);
  Tensor<float> x({2, 16, 24});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
  save_checkpoint(cp, dir / "m.unck");
  const std::string bytes = read_file(dir / "m.unck");
  CHECK(bytes.substr(0, 4) == "UNCK");
  CHECK(bytes == encode_checkpoint(cp));

  Checkpoint back = load_checkpoint(dir / "m.unck");
  CHECK(back.ref == cp.ref);
  CHECK(back.net.config() == cp.net.config());
  const Tensor<float> a = cp.net.forward(x), b = back.net.forward(x);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  CHECK(encode_checkpoint(back) == bytes);

  const auto names = checkpoint_names(bytes);
  CHECK(names.size() == cp.net.params().size());
  CHECK(std::is_sorted(names.begin(), names.end()));

  CHECK_ERROR_KIND(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ErrorKind::TruncatedData);
  CHECK_ERROR_KIND(decode_checkpoint(bytes.substr(0, 10)), ErrorKind::TruncatedData);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_ERROR_KIND(decode_checkpoint(bad), ErrorKind::BadMagic);

  std::string deeper = bytes;
  const auto at = deeper.find("depth=2");
  REQUIRE(at != std::string::npos);
  deeper[at + 6] = '3';
  CHECK_ERROR_KIND(decode_checkpoint(deeper), ErrorKind::ConfigMismatch);

  std::string unknown = bytes;
  const auto key = unknown.find("seed=");
  REQUIRE(key != std::string::npos);
  unknown.replace(key, 4, "sead");
  CHECK_ERROR_KIND(decode_checkpoint(unknown), ErrorKind::ConfigMismatch);
}

TEST_CASE("training reduces the loss and is reproducible") {
  const ReferenceDims ref{32, 48};
  const PhantomSet set = phantom_set(1, ref, 3);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.epochs = 100;
  tc.seed = 7;
  tc.adam.learning_rate = 3e-3;
  std::size_t calls = 0;
  const TrainResult a = train(set.examples, tiny_config(), tc, ref, [&](const EpochLoss&) { ++calls; });
  CHECK(calls == 100);
  REQUIRE(a.history.size() == 100);
  CHECK(a.history.back().loss < a.history.front().loss);
  CHECK(a.history.front().epoch == 1);

  TrainConfig short_tc = tc;
  short_tc.epochs = 3;
  const PhantomSet three = phantom_set(3, ref, 4);
  short_tc.batch_size = 2;
  const TrainResult x = train(three.examples, tiny_config(), short_tc, ref);
  const TrainResult y = train(three.examples, tiny_config(), short_tc, ref);
  CHECK(encode_checkpoint(x.checkpoint) == encode_checkpoint(y.checkpoint));
  short_tc.seed = 8;
  CHECK_FALSE(encode_checkpoint(train(three.examples, tiny_config(), short_tc, ref).checkpoint) ==
              encode_checkpoint(x.checkpoint));
}

TEST_CASE("training input validation") {
  const ReferenceDims ref{32, 48};
  CHECK_ERROR_KIND(train({}, tiny_config(), TrainConfig{}, ref), ErrorKind::EmptyDataset);
  const PhantomSet set = phantom_set(1, ref, 5);
  CHECK_ERROR_KIND(train(set.examples, tiny_config(), TrainConfig{}, ReferenceDims{32, 40}), ErrorKind::DimMismatch);
  CHECK_ERROR_KIND(make_example(set.samples[0], BinaryMask(4, 4)), ErrorKind::DimMismatch);
}

TEST_CASE("prediction thresholds, clamps and crops") {
  const ReferenceDims ref{32, 48};
  PhantomSpec spec;
  spec.rows = 30;
  spec.cols = 44;
  spec.ilm_row = 6;
  spec.ism_row = 20;
  spec.n_cysts = 1;
  spec.cyst_axis_min = 2.0;
  spec.cyst_axis_max = 3.0;
  spec.seed = 2;
  const Phantom ph = gen_phantom(spec);
  const Sample sample = prepare_sample(ph.image, ref, {});

  Checkpoint cp{UNet<float>(tiny_config()), ref};
  for (auto& [_, p] : cp.net.params()) p.value.fill(0.0f);
  const Prediction pred = predict(cp, sample);
  CHECK(pred.mask.rows() == 30);
  CHECK(pred.mask.cols() == 44);
  CHECK(pred.probability.rows() == 30);
  for (float v : pred.probability.values()) CHECK(v == 0.5f);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 44; ++c)
      CHECK(pred.mask.at(r, c) == (sample.values.at(1, r + sample.offset.row, c + sample.offset.col) == 1.0f));

  const Prediction open = predict(cp, sample, PredictOptions{0.5, false});
  CHECK(open.mask.count() == 30 * 44);
  const Prediction strict = predict(cp, sample, PredictOptions{0.51, false});
  CHECK(strict.mask.count() == 0);

  Checkpoint other{UNet<float>(tiny_config()), ReferenceDims{64, 48}};
  CHECK_ERROR_KIND(predict(other, sample), ErrorKind::DimMismatch);
}

TEST_CASE("prediction mask stays inside the roi") {
  const ReferenceDims ref{32, 48};
  const PhantomSet set = phantom_set(2, ref, 9);
  Checkpoint cp{UNet<float>(tiny_config(11)), ref};
  for (const auto& s : set.samples) {
    const Prediction p = predict(cp, s, PredictOptions{0.0, true});
    for (std::size_t r = 0; r < s.orig_dims.rows; ++r)
      for (std::size_t c = 0; c < s.orig_dims.cols; ++c)
        if (p.mask.at(r, c)) CHECK(s.values.at(1, r + s.offset.row, c + s.offset.col) == 1.0f);
  }
}
