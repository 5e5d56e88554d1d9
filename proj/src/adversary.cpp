#include "fedul/adversary.hpp"

#include <cmath>
#include <string>

namespace fedul {

const char* head_name(HeadKind k) {
  switch (k) {
    case HeadKind::Plain: return "plain";
    case HeadKind::Vae: return "vae";
    case HeadKind::Dsvae: return "dsvae";
  }
  return "?";
}

HeadKind head_from_name(const std::string& s) {
  if (s == "plain") return HeadKind::Plain;
  if (s == "vae") return HeadKind::Vae;
  if (s == "dsvae") return HeadKind::Dsvae;
  throw DomainError("unknown head: " + s);
}

SutConfig::Mode sut_mode_from_name(const std::string& s) {
  if (s == "binary") return SutConfig::Mode::Binary;
  if (s == "continuous") return SutConfig::Mode::Continuous;
  if (s == "always") return SutConfig::Mode::Always;
  throw DomainError("unknown sut mode: " + s);
}

const char* sut_mode_name(SutConfig::Mode m) {
  switch (m) {
    case SutConfig::Mode::Binary: return "binary";
    case SutConfig::Mode::Continuous: return "continuous";
    case SutConfig::Mode::Always: return "always";
  }
  return "?";
}

NoiseDraw sample_noise(const AdversaryParams& params, RngStream& rng) {
  NoiseDraw noise;
  if (params.head == HeadKind::Plain) return noise;
  const std::size_t C = params.classes(), H = params.hidden();
  if (params.head == HeadKind::Dsvae) {
    if (params.lambda < 0.0) throw DomainError("dsvae: lambda must be >= 0");
    RngStream r1 = rng.fork(1);
    Vec mean(C * H, 1.0), var(C * H, params.lambda);
    noise.eps1 = DenseMatrix(C, H);
    noise.eps1.data = sample_gaussian(r1, mean, var);
  }
  RngStream r2 = rng.fork(2);
  Vec zero(C * H, 0.0), one(C * H, 1.0);
  noise.eps2 = DenseMatrix(C, H);
  noise.eps2.data = sample_gaussian(r2, zero, one);
  return noise;
}

ForwardTrace forward(const AdversaryParams& params, std::span<const double> em_u,
                     RngStream& rng) {
  return forward_with_noise(params, em_u, sample_noise(params, rng));
}

ForwardTrace forward_with_noise(const AdversaryParams& params,
                                std::span<const double> em_u, NoiseDraw noise) {
  if (em_u.size() != params.dim())
    throw DimensionError("adversary forward: embedding dimension mismatch");
  if (params.w_mu.cols != params.hidden())
    throw DimensionError("adversary forward: head width mismatch");

  ForwardTrace t;
  t.input.assign(em_u.begin(), em_u.end());
  t.hidden = matvec(params.w1, em_u);
  for (std::size_t h = 0; h < t.hidden.size(); ++h)
    t.hidden[h] = std::max(t.hidden[h] + params.b1[h], 0.0);

  const std::size_t C = params.classes(), H = params.hidden();
  t.logits.assign(C, 0.0);
  switch (params.head) {
    case HeadKind::Plain:
      t.logits = matvec(params.w_mu, t.hidden);
      break;
    case HeadKind::Vae:
      // s_i = (W_mu_i + W_sigma_i . eps2_i)' z
      for (std::size_t i = 0; i < C; ++i) {
        double s = 0.0;
        for (std::size_t h = 0; h < H; ++h)
          s += (params.w_mu(i, h) + params.w_sigma(i, h) * noise.eps2(i, h)) * t.hidden[h];
        t.logits[i] = s;
      }
      break;
    case HeadKind::Dsvae:
      // s_i = (W_mu_i . eps1_i + W_sigma_i . eps2_i)' z
      for (std::size_t i = 0; i < C; ++i) {
        double s = 0.0;
        for (std::size_t h = 0; h < H; ++h)
          s += (params.w_mu(i, h) * noise.eps1(i, h) +
                params.w_sigma(i, h) * noise.eps2(i, h)) *
               t.hidden[h];
        t.logits[i] = s;
      }
      break;
  }
  t.probs = softmax(t.logits);
  t.noise = std::move(noise);
  return t;
}

double ce_loss(const ForwardTrace& trace, std::size_t y) {
  if (y >= trace.probs.size()) throw DomainError("ce_loss: label out of range");
  return -std::log(trace.probs[y]);
}

AdversaryGrads backward(const AdversaryParams& params, const ForwardTrace& trace,
                        std::size_t y) {
  const std::size_t C = params.classes(), H = params.hidden(), d = params.dim();
  if (trace.probs.size() != C || trace.hidden.size() != H)
    throw StateError("adversary backward: trace does not match params");
  if (y >= C) throw DomainError("adversary backward: label out of range");
  if (params.head != HeadKind::Plain && !trace.noise.eps2.same_shape(params.w_mu))
    throw StateError("adversary backward: trace noise missing");

  AdversaryGrads g;
  g.w_mu = DenseMatrix(C, H);
  if (params.head != HeadKind::Plain) g.w_sigma = DenseMatrix(C, H);

  // dCE/ds_i = probs_i - [i == y]; grad rows follow the head's logit form.
  Vec g_z(H, 0.0);
  for (std::size_t i = 0; i < C; ++i) {
    double e = trace.probs[i] - (i == y ? 1.0 : 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      double z = trace.hidden[h];
      switch (params.head) {
        case HeadKind::Plain:
          g.w_mu(i, h) = e * z;
          g_z[h] += e * params.w_mu(i, h);
          break;
        case HeadKind::Vae:
          g.w_mu(i, h) = e * z;
          g.w_sigma(i, h) = e * z * trace.noise.eps2(i, h);
          g_z[h] += e * (params.w_mu(i, h) +
                         params.w_sigma(i, h) * trace.noise.eps2(i, h));
          break;
        case HeadKind::Dsvae:
          g.w_mu(i, h) = e * z * trace.noise.eps1(i, h);
          g.w_sigma(i, h) = e * z * trace.noise.eps2(i, h);
          g_z[h] += e * (params.w_mu(i, h) * trace.noise.eps1(i, h) +
                         params.w_sigma(i, h) * trace.noise.eps2(i, h));
          break;
      }
    }
  }

  // Through the ReLU (mask from the stored activation) and the hidden layer.
  g.w1 = DenseMatrix(H, d);
  g.b1.assign(H, 0.0);
  g.input.assign(d, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    if (trace.hidden[h] <= 0.0) continue;
    g.b1[h] = g_z[h];
    // w1 gradient row needs em_u; recover it is impossible from the trace, so
    // the caller passes it via adversarial_step. Filled there.
    axpy(g_z[h], params.w1.row(h), g.input);
  }
  // Stash the masked upstream in b1 (== dCE/d pre-activation); w1 rows are
  // outer(b1, em_u), assembled by the caller that owns em_u.
  return g;
}

Vec grl_backward(std::span<const double> upstream, double eps_u) {
  if (eps_u < 0.0) throw DomainError("grl_backward: eps_u must be >= 0");
  Vec out(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = -eps_u * upstream[i];
  return out;
}

double sut_budget(const SutConfig& cfg, const ForwardTrace& trace, std::size_t y,
                  std::optional<double> input_grad_norm) {
  switch (cfg.mode) {
    case SutConfig::Mode::Always:
      return cfg.eps;
    case SutConfig::Mode::Binary:
      return argmax(trace.probs) == y ? cfg.eps : 0.0;
    case SutConfig::Mode::Continuous: {
      if (!input_grad_norm || *input_grad_norm <= 0.0)
        throw DegenerateGradientError("sut_budget: continuous mode needs a positive gradient norm");
      return cfg.tau / *input_grad_norm;
    }
  }
  return 0.0;
}

AdversarialStepResult adversarial_step(std::span<const double> em_u, std::size_t y,
                                       const AdversaryParams& params,
                                       const SutConfig& cfg, double lambda_adv,
                                       RngStream& rng) {
  AdversarialStepResult r;
  r.trace = forward(params, em_u, rng);
  r.ce = ce_loss(r.trace, y);
  r.grads = backward(params, r.trace, y);
  // Assemble the w1 gradient now that em_u is in hand: rows are the masked
  // upstream (stashed in b1) times the input.
  for (std::size_t h = 0; h < params.hidden(); ++h)
    for (std::size_t k = 0; k < params.dim(); ++k)
      r.grads.w1(h, k) = r.grads.b1[h] * em_u[k];

  std::optional<double> grad_norm;
  if (cfg.mode == SutConfig::Mode::Continuous) grad_norm = norm2(r.grads.input);
  r.eps_u = sut_budget(cfg, r.trace, y, grad_norm);
  r.skipped = r.eps_u == 0.0;
  r.em_grad_contrib = grl_backward(r.grads.input, lambda_adv * r.eps_u);
  return r;
}

}  // namespace fedul
