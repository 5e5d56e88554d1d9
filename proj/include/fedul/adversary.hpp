#pragma once

#include <optional>
#include <span>

#include "fedul/numkernel.hpp"

namespace fedul {

/// Final-layer variants of the attribute head. Vae adds a noisy sigma path on
/// top of the deterministic mu path; Dsvae additionally multiplies the mu path
/// by eps1 ~ N(1, lambda), so both logit paths are stochastic.
enum class HeadKind { Plain, Vae, Dsvae };

const char* head_name(HeadKind k);
HeadKind head_from_name(const std::string& s);

/// Attribute classifier h_omega: one hidden ReLU layer followed by one of the
/// three head variants and a softmax. The Plain head reads w_mu as its only
/// weight matrix; w_sigma stays empty.
struct AdversaryParams {
  DenseMatrix w1;  // hidden x d
  Vec b1;          // hidden
  HeadKind head = HeadKind::Plain;
  DenseMatrix w_mu;     // classes x hidden
  DenseMatrix w_sigma;  // classes x hidden (Vae/Dsvae)
  double lambda = 0.0;  // Dsvae stochasticity coefficient, >= 0

  std::size_t dim() const { return w1.cols; }
  std::size_t hidden() const { return w1.rows; }
  std::size_t classes() const { return w_mu.rows; }

  bool operator==(const AdversaryParams&) const = default;
};

/// Fresh per-forward noise, one entry per head weight element, cached so the
/// backward pass (and gradient tests) reuse the exact forward draws.
struct NoiseDraw {
  DenseMatrix eps1;  // classes x hidden, ~ N(1, lambda) (Dsvae)
  DenseMatrix eps2;  // classes x hidden, ~ N(0, 1)      (Vae/Dsvae)

  bool operator==(const NoiseDraw&) const = default;
};

struct SutConfig {
  enum class Mode { Binary, Continuous, Always };
  Mode mode = Mode::Binary;
  double eps = 0.0;  // budget granted in binary/always mode, >= 0
  double tau = 1.0;  // global scaling factor in continuous mode, > 0
};

SutConfig::Mode sut_mode_from_name(const std::string& s);
const char* sut_mode_name(SutConfig::Mode m);

/// Everything the matching backward pass needs: the input embedding, the
/// post-ReLU hidden activation (which is also the head input z), logits,
/// probabilities and the noise that produced them.
struct ForwardTrace {
  Vec input;   // em_u as seen by this forward pass
  Vec hidden;  // h == z
  Vec logits;
  Vec probs;
  NoiseDraw noise;

  std::span<const double> z() const { return hidden; }
};

/// Samples fresh noise from dedicated forks of `rng` (eps1 from fork 1, eps2
/// from fork 2) and runs the head. Keeping the forks separate makes a Dsvae
/// head at lambda = 0 replay the exact draws of a Vae head under the same
/// stream, which is what the head-reduction invariants assert.
ForwardTrace forward(const AdversaryParams& params, std::span<const double> em_u,
                     RngStream& rng);

/// Same forward pass with pinned noise (gradient checks, DLG replay).
ForwardTrace forward_with_noise(const AdversaryParams& params,
                                std::span<const double> em_u, NoiseDraw noise);

NoiseDraw sample_noise(const AdversaryParams& params, RngStream& rng);

/// Cross-entropy -ln(probs[y]).
double ce_loss(const ForwardTrace& trace, std::size_t y);

struct AdversaryGrads {
  DenseMatrix w1;
  Vec b1;
  DenseMatrix w_mu;
  DenseMatrix w_sigma;  // empty for Plain
  Vec input;            // d(CE)/d(em_u), before any reversal
};

/// Hand-derived gradients of the cross-entropy at `trace` w.r.t. all
/// parameters and the input embedding, using the stored noise.
AdversaryGrads backward(const AdversaryParams& params, const ForwardTrace& trace,
                        std::size_t y);

/// Gradient reversal: identity forward, -eps_u * g backward.
Vec grl_backward(std::span<const double> upstream, double eps_u);

/// Per-user perturbation budget. Binary: eps when the head currently
/// classifies the user correctly, 0 otherwise. Continuous: tau / ||grad||.
/// Always: eps unconditionally (the "Global" ablation strategy).
double sut_budget(const SutConfig& cfg, const ForwardTrace& trace, std::size_t y,
                  std::optional<double> input_grad_norm = std::nullopt);

struct AdversarialStepResult {
  Vec em_grad_contrib;  // contribution to d(total)/d(em_u); zero when skipped
  AdversaryGrads grads;  // plain CE gradients for the adversary's own update
  bool skipped = false;  // eps_u == 0: no reversed gradient reached em_u
  double eps_u = 0.0;
  double ce = 0.0;
  ForwardTrace trace;
};

/// One adversarial unit of work for a client: forward, budget decision,
/// backward. The adversary always receives its CE gradients; the embedding
/// receives the reversed gradient scaled by lambda_adv * eps_u only when the
/// budget is nonzero.
AdversarialStepResult adversarial_step(std::span<const double> em_u, std::size_t y,
                                       const AdversaryParams& params,
                                       const SutConfig& cfg, double lambda_adv,
                                       RngStream& rng);

}  // namespace fedul
