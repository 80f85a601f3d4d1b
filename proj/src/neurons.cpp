#include "snnkit/neurons.hpp"

#include <cmath>

namespace snnkit {

namespace {
constexpr double kInvSqrtPi = 0.5641895835477562869480794515607725858;

void check_surrogate(const SurrogateParams& p) {
  if (!(p.alpha > 0)) throw ContractError("surrogate alpha must be > 0");
}
}  // namespace

double surrogate_cdf(double x, double alpha) {
  return 0.5 * (1.0 - std::erf(-alpha * x));
}

double surrogate_pdf(double x, double alpha) {
  return alpha * kInvSqrtPi * std::exp(-alpha * alpha * x * x);
}

Tensor spike_from_diff(const Tensor& x, const SurrogateParams& params, SpikeMode mode) {
  check_surrogate(params);
  const double a = params.alpha;
  Array r(x.size());
  const Array& d = x.data();
  if (mode == SpikeMode::kHard) {
    for (Eigen::Index i = 0; i < d.size(); ++i) r[i] = d[i] >= 0.0 ? 1.0 : 0.0;
  } else {
    for (Eigen::Index i = 0; i < d.size(); ++i) r[i] = surrogate_cdf(d[i], a);
  }
  Tensor out = Tensor::from_array(x.shape(), std::move(r));
  if (Tape* tape = Tape::of({&x})) {
    const std::int64_t ix = tape->node_of(x);
    Tensor xv = x;
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ix < 0) return;
      Array gx(g.size());
      const Array& xd = xv.data();
      for (Eigen::Index i = 0; i < g.size(); ++i) gx[i] = g[i] * surrogate_pdf(xd[i], a);
      t.accumulate(ix, gx);
    });
  }
  return out;
}

namespace {
// Lifts a threshold to the rank of u so the broadcast subtraction applies.
Tensor rank_match(const Tensor& v_th, const Tensor& u) {
  if (v_th.rank() == u.rank()) return v_th;
  if (v_th.size() == 1) return reshape(v_th, Shape(u.rank(), 1));
  throw ContractError("v_th shape " + shape_str(v_th.shape()) +
                      " is not broadcast-compatible with " + shape_str(u.shape()));
}
}  // namespace

Tensor spike(const Tensor& u, const Tensor& v_th, const SurrogateParams& params, SpikeMode mode) {
  return spike_from_diff(sub(u, rank_match(v_th, u)), params, mode);
}

Tensor spike(const Tensor& u, double v_th, const SurrogateParams& params, SpikeMode mode) {
  return spike_from_diff(add_scalar(u, -v_th), params, mode);
}

LifState make_lif_state(Shape shape, double tau, double v_th, double u_reset) {
  if (!(tau > 0)) throw ContractError("tau must be > 0");
  return LifState{Tensor::zeros(std::move(shape)), tau, Tensor::scalar(v_th), u_reset};
}

std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const SurrogateParams& params, SpikeMode mode) {
  if (!(state.tau > 0)) throw ContractError("tau must be > 0");
  if (!same_shape(state.u.shape(), input_current.shape())) {
    throw ContractError("lif_step input shape " + shape_str(input_current.shape()) +
                        " does not match state " + shape_str(state.u.shape()));
  }
  const double inv_tau = 1.0 / state.tau;
  Tensor u_new = add(scale(state.u, 1.0 - inv_tau), scale(input_current, inv_tau));
  Tensor spikes = spike(u_new, state.v_th, params, mode);
  // Hard mode detaches the reset branch: fired neurons pass no gradient
  // through the membrane carry.
  Tensor mask = (mode == SpikeMode::kHard) ? detach(spikes) : spikes;
  Tensor keep = sub(Tensor::full(mask.shape(), 1.0), mask);
  Tensor u_next = add(mul(u_new, keep), scale(mask, state.u_reset));
  return {spikes, LifState{u_next, state.tau, state.v_th, state.u_reset}};
}

LifState lif_integrate(const LifState& state, const Tensor& input_current) {
  if (!(state.tau > 0)) throw ContractError("tau must be > 0");
  if (!same_shape(state.u.shape(), input_current.shape())) {
    throw ContractError("lif_integrate input shape mismatch");
  }
  const double inv_tau = 1.0 / state.tau;
  Tensor u_new = add(scale(state.u, 1.0 - inv_tau), scale(input_current, inv_tau));
  return LifState{u_new, state.tau, state.v_th, state.u_reset};
}

std::pair<Tensor, LifState> lif_multistep(const LifState& state, const Tensor& inputs,
                                          const SurrogateParams& params, SpikeMode mode) {
  if (inputs.rank() < 2) {
    throw ContractError("lif_multistep expects inputs [T, ...] with T >= 1");
  }
  const std::int64_t t_steps = inputs.dim(0);
  if (t_steps < 1) throw ContractError("lif_multistep requires T >= 1");
  LifState cur = state;
  std::vector<Tensor> spikes;
  spikes.reserve(t_steps);
  for (std::int64_t t = 0; t < t_steps; ++t) {
    auto [s, next] = lif_step(cur, slice_leading(inputs, t), params, mode);
    spikes.push_back(std::move(s));
    cur = std::move(next);
  }
  return {stack_leading(spikes), cur};
}

}  // namespace snnkit
