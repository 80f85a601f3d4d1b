#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snnkit/convlstm.hpp"
#include "testutil.hpp"

using namespace snnkit;
using testutil::grad_check;

namespace {

Tensor random_binary(Shape s, Rng& rng, double density = 0.4) {
  Tensor t = Tensor::zeros(s);
  for (Eigen::Index i = 0; i < t.raw().size(); ++i) t.raw()[i] = rng.bernoulli(density) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("dead gates annihilate the state") {
  Rng rng(31);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  p.w.raw().setZero();
  p.b.raw().setZero();
  ConvLstmState st = zero_state(p, 2, 4, 4);
  Tensor x = random_binary({2, 2, 4, 4}, rng);
  auto [h, next] = convlstm_step(x, st, p, GateMask{}, nullptr);
  CHECK(h.data().abs().maxCoeff() == 0.0);
  CHECK(next.c.data().abs().maxCoeff() == 0.0);
}

TEST_CASE("all-false mask ignores a present attention module") {
  Rng rng(32);
  ConvLstmParams p = make_convlstm(2, 4, 3, rng);
  CbamParams cbam = make_cbam(4, 2, AttentionKind::kSpiking, rng);
  ConvLstmState st = zero_state(p, 1, 5, 5);
  Tensor x = random_binary({1, 2, 5, 5}, rng);
  auto [h_without, s1] = convlstm_step(x, st, p, GateMask{}, nullptr);
  auto [h_with, s2] = convlstm_step(x, st, p, GateMask{}, &cbam);
  CHECK((h_without.data() - h_with.data()).abs().maxCoeff() == 0.0);
  CHECK((s1.c.data() - s2.c.data()).abs().maxCoeff() == 0.0);
}

TEST_CASE("forced forget gate carries the cell state exactly") {
  Rng rng(33);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  p.w.raw().setZero();
  // bias blocks in gate order f,i,g,o: f fires, the others stay silent
  p.b.raw().setZero();
  for (std::int64_t c = 0; c < 3; ++c) p.b.raw()[c] = 2.0;            // f
  for (std::int64_t c = 3; c < 6; ++c) p.b.raw()[c] = -2.0;           // i
  for (std::int64_t c = 9; c < 12; ++c) p.b.raw()[c] = -2.0;          // o
  ConvLstmState st = zero_state(p, 1, 4, 4);
  Rng vals(34);
  st.c = Tensor::uniform({1, 3, 4, 4}, vals, -1.5, 1.5);
  Tensor x = random_binary({1, 2, 4, 4}, vals);
  auto [h, next] = convlstm_step(x, st, p, GateMask{}, nullptr);
  CHECK((next.c.data() - st.c.data()).abs().maxCoeff() == 0.0);
}

TEST_CASE("missing attention with a nonzero mask is a configuration error") {
  Rng rng(35);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  ConvLstmState st = zero_state(p, 1, 4, 4);
  Tensor x = random_binary({1, 2, 4, 4}, rng);
  CHECK_THROWS_AS(convlstm_step(x, st, p, GateMask{true, false, false}, nullptr), ConfigError);
}

TEST_CASE("unroll of one step equals a single convlstm_step") {
  Rng rng(36);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  ConvLstmState st = zero_state(p, 2, 4, 4);
  Tensor frames = random_binary({1, 2, 2, 4, 4}, rng);
  auto [h_seq, fs] = unroll(frames, p, GateMask{}, nullptr, st);
  auto [h, fs2] = convlstm_step(slice_leading(frames, 0), st, p, GateMask{}, nullptr);
  CHECK((slice_leading(h_seq, 0).data() - h.data()).abs().maxCoeff() == 0.0);
  CHECK((fs.c.data() - fs2.c.data()).abs().maxCoeff() == 0.0);
}

TEST_CASE("quiescent unroll stays silent") {
  Rng rng(37);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  ConvLstmState st = zero_state(p, 1, 4, 4);
  auto [h_seq, fs] = unroll(Tensor::zeros({4, 1, 2, 4, 4}), p, GateMask{}, nullptr, st);
  CHECK(h_seq.data().abs().maxCoeff() == 0.0);
}

TEST_CASE("unroll rejects frames without a time axis") {
  Rng rng(38);
  ConvLstmParams p = make_convlstm(2, 3, 3, rng);
  ConvLstmState st = zero_state(p, 1, 4, 4);
  CHECK_THROWS_AS(unroll(Tensor::zeros({1, 2, 4, 4}), p, GateMask{}, nullptr, st), ContractError);
}

TEST_CASE("spiking contract holds across random steps") {
  Rng rng(39);
  ConvLstmParams p = make_convlstm(2, 4, 3, rng, SurrogateParams{}, 0.5, 0.5);
  CbamParams cbam = make_cbam(4, 2, AttentionKind::kSpiking, rng, SurrogateParams{}, 0.5);
  ConvLstmState st = zero_state(p, 2, 5, 5);
  for (int t = 0; t < 30; ++t) {
    Tensor x = random_binary({2, 2, 5, 5}, rng, 0.5);
    StepTrace trace;
    auto [h, next] = convlstm_step(x, st, p, GateMask{true, false, false}, &cbam, &trace);
    for (const Tensor* g : {&h, &trace.f, &trace.i, &trace.g, &trace.o}) {
      for (Eigen::Index k = 0; k < g->data().size(); ++k) {
        CHECK((g->data()[k] == 0.0 || g->data()[k] == 1.0));
      }
    }
    // binary gates bound the cell state by one unit of growth per step
    CHECK(next.c.data().abs().maxCoeff() <= static_cast<double>(t + 1) + 1e-12);
    st = next;
  }
}

TEST_CASE("raw_hidden emits o (.) c without binarization") {
  Rng rng(42);
  ConvLstmParams p = make_convlstm(2, 2, 3, rng);
  p.raw_hidden = true;
  p.w.raw().setZero();
  p.b.raw().setConstant(2.0);  // every gate fires each step
  ConvLstmState st = zero_state(p, 1, 3, 3);
  Tensor x = Tensor::zeros({1, 2, 3, 3});
  auto [h1, s1] = convlstm_step(x, st, p, GateMask{}, nullptr);
  auto [h2, s2] = convlstm_step(x, s1, p, GateMask{}, nullptr);
  // c accumulates by 1 per step; the raw hidden map tracks it exactly
  CHECK(h2.data().minCoeff() == 2.0);
  CHECK(s2.h.data().maxCoeff() == 2.0);

  // the default configuration binarizes the same trajectory
  p.raw_hidden = false;
  auto [b1, t1] = convlstm_step(x, st, p, GateMask{}, nullptr);
  auto [b2, t2] = convlstm_step(x, t1, p, GateMask{}, nullptr);
  CHECK(b2.data().maxCoeff() == 1.0);
}

TEST_CASE("memory path: loss at final step reaches the first frame") {
  Rng rng(40);
  ConvLstmParams p = make_convlstm(2, 2, 3, rng, SurrogateParams{1.2}, 0.3, 0.3,
                                   SpikeMode::kSmooth);
  ConvLstmState st = zero_state(p, 1, 4, 4);
  Tensor frames = Tensor::uniform({2, 1, 2, 4, 4}, rng, 0.0, 1.0, true);
  Tape tape;
  tape.watch(frames);
  auto [h_seq, fs] = unroll(frames, p, GateMask{}, nullptr, st);
  tape.backward(sum(slice_leading(h_seq, 1)));
  Array g = tape.grad(frames);
  double first_frame_norm = 0;
  const std::int64_t blk = 2 * 4 * 4;
  for (std::int64_t i = 0; i < blk; ++i) first_frame_norm += g[i] * g[i];
  CHECK(first_frame_norm > 0.0);
}

TEST_CASE("BPTT through a short unroll matches finite differences") {
  Rng rng(41);
  ConvLstmParams p = make_convlstm(2, 2, 3, rng, SurrogateParams{1.5}, 0.4, 0.4,
                                   SpikeMode::kSmooth);
  CbamParams cbam = make_cbam(2, 2, AttentionKind::kSpiking, rng, SurrogateParams{1.5}, 0.4,
                              SpikeMode::kSmooth);
  Tensor frames = Tensor::uniform({3, 1, 2, 4, 4}, rng, 0.0, 1.0, true);
  auto fwd = [&] {
    ConvLstmState st = zero_state(p, 1, 4, 4);
    auto [h_seq, fs] = unroll(frames, p, GateMask{true, false, false}, &cbam, st);
    return h_seq;
  };
  const double err = grad_check({&frames, &p.w, &p.b, &cbam.w1, &cbam.w2, &cbam.spatial_kernel},
                                fwd, 515151, 1e-5);
  CHECK(err < 1e-3);
}
