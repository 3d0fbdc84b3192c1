#pragma once

// Sparse factorization E ≈ Ψ A of an embedding signal.
//
// Objective:
//   ‖E − ΨA‖₁ + λ1‖Ψ‖₁ + λ2‖A‖₁ + λ3·J(A)
//   J(A) = 1/(kT) Σ_r Σ_{t≥1} |A[r,t] − A[r,t−1]|
// subject to ‖Ψ[:,c]‖₂ ≤ 1 and 0 ≤ A[r,t] ≤ 1.
//
// Solved by alternating proximal steps: Adam on the subgradient of the
// non-penalty part, soft-thresholding for the ℓ1 penalties, then projection
// onto the feasible set. The penalties never enter the gradient so they are
// applied exactly once per step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/signal.hpp"

namespace sparse_diarize {

inline constexpr double kBasisNormSlack = 1e-9;

class BasisMatrix {
 public:
  BasisMatrix() = default;
  explicit BasisMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
    for (Eigen::Index c = 0; c < data_.cols(); ++c) {
      if (!(data_.col(c).norm() <= 1.0 + kBasisNormSlack)) {
        throw InvalidArgument("basis column " + std::to_string(c) + " lies outside the unit disk");
      }
    }
  }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  Eigen::Index speakers() const noexcept { return data_.cols(); }

 private:
  Eigen::MatrixXd data_;
};

class ActivationMatrix {
 public:
  ActivationMatrix() = default;
  explicit ActivationMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
    if (!((data_.array() >= 0.0).all() && (data_.array() <= 1.0).all())) {
      throw InvalidArgument("activation entries must lie in [0, 1]");
    }
  }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  Eigen::Index speakers() const noexcept { return data_.rows(); }
  Eigen::Index steps() const noexcept { return data_.cols(); }

 private:
  Eigen::MatrixXd data_;
};

struct Hyperparams {
  double lambda1 = 0.3366;  // ℓ1 weight on Ψ
  double lambda2 = 0.2424;  // ℓ1 weight on A
  double lambda3 = 0.06;    // jitter weight
  double lr_psi = 0.1;
  double lr_a = 0.1;
  std::size_t max_iters = 5000;
  double rel_tol = 1e-5;
  std::size_t patience = 10;
  // Both learning rates (and with them the shrink thresholds) halve every
  // lr_half_life iterations until they reach min_lr_fraction of their
  // starting values. Zero keeps them constant.
  double lr_half_life = 1000.0;
  double min_lr_fraction = 0.01;
  std::uint64_t seed = 0;
  // Rescale every nonzero basis column to unit norm instead of projecting
  // onto the disk (only columns with norm > 1 are touched by default).
  bool normalize_all_columns = false;
  // Verify both feasibility invariants after every half-step.
  bool check_feasibility = false;
  // Abort once the total loss exceeds this multiple of its initial value.
  double divergence_factor = 10.0;

  void validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0)) {
      throw InvalidArgument("lambda1..3 must be non-negative");
    }
    if (!(lr_psi > 0.0 && lr_a > 0.0)) throw InvalidArgument("learning rates must be positive");
    if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
    if (!(rel_tol > 0.0)) throw InvalidArgument("rel_tol must be positive");
    if (patience == 0) throw InvalidArgument("patience must be positive");
    if (!(lr_half_life >= 0.0)) throw InvalidArgument("lr_half_life must be non-negative");
    if (!(min_lr_fraction > 0.0 && min_lr_fraction <= 1.0)) {
      throw InvalidArgument("min_lr_fraction must lie in (0, 1]");
    }
  }
};

// First/second moment accumulators for one parameter matrix.
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
  std::size_t step = 0;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::MatrixXd::Zero(rows, cols)), v(Eigen::MatrixXd::Zero(rows, cols)) {}
};

struct LossBreakdown {
  double reconstruction = 0.0;
  double l1_psi = 0.0;
  double l1_a = 0.0;
  double jitter = 0.0;
  double total = 0.0;
};

namespace detail {

inline void require_shapes(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& psi,
                           const Eigen::MatrixXd& a) {
  if (psi.rows() != signal.rows() || a.cols() != signal.cols() || psi.cols() != a.rows()) {
    throw InvalidArgument("shape mismatch: E is " + std::to_string(signal.rows()) + "x" +
                          std::to_string(signal.cols()) + ", Psi is " + std::to_string(psi.rows()) +
                          "x" + std::to_string(psi.cols()) + ", A is " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()));
  }
}

inline double jitter_scale(const Eigen::MatrixXd& a) {
  return 1.0 / (static_cast<double>(a.rows()) * static_cast<double>(a.cols()));
}

inline LossBreakdown loss_from_residual(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& psi,
                                        const Eigen::MatrixXd& a, const Hyperparams& hp);

// −Ψᵀ sign(R) + λ3 ∂J, given the residual R = E − ΨA.
inline Eigen::MatrixXd grad_a_from_residual(const Eigen::MatrixXd& residual,
                                            const Eigen::MatrixXd& psi, const Eigen::MatrixXd& a,
                                            double lambda3);

}  // namespace detail

inline double jitter_loss(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() < 2) return 0.0;
  const Eigen::Index t = a.cols();
  const double sum = (a.rightCols(t - 1) - a.leftCols(t - 1)).cwiseAbs().sum();
  return sum * detail::jitter_scale(a);
}

inline double jitter_loss(const ActivationMatrix& a) { return jitter_loss(a.data()); }

inline LossBreakdown compute_loss(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& psi,
                                  const Eigen::MatrixXd& a, const Hyperparams& hp) {
  detail::require_shapes(signal, psi, a);
  return detail::loss_from_residual(signal - psi * a, psi, a, hp);
}

inline LossBreakdown compute_loss(const EmbeddingSignal& signal, const BasisMatrix& psi,
                                  const ActivationMatrix& a, const Hyperparams& hp) {
  return compute_loss(signal.as_double(), psi.data(), a.data(), hp);
}

// Soft-thresholding, the proximal operator of step·lam·‖·‖₁.
inline Eigen::MatrixXd shrink(const Eigen::MatrixXd& x, double step, double lam) {
  const double threshold = step * lam;
  return x.unaryExpr([threshold](double v) {
    const double mag = std::abs(v) - threshold;
    return mag > 0.0 ? std::copysign(mag, v) : 0.0;
  });
}

inline void project_unit_disk_in_place(Eigen::MatrixXd& psi, bool normalize_all = false) {
  for (Eigen::Index c = 0; c < psi.cols(); ++c) {
    const double norm = psi.col(c).norm();
    if (norm > 1.0 || (normalize_all && norm > 0.0)) psi.col(c) /= norm;
  }
}

inline BasisMatrix project_unit_disk(Eigen::MatrixXd psi, bool normalize_all = false) {
  project_unit_disk_in_place(psi, normalize_all);
  return BasisMatrix(std::move(psi));
}

inline void project_interval_in_place(Eigen::MatrixXd& a) { a = a.cwiseMax(0.0).cwiseMin(1.0); }

inline ActivationMatrix project_interval(Eigen::MatrixXd a) {
  project_interval_in_place(a);
  return ActivationMatrix(std::move(a));
}

// Subgradient of ‖E − ΨA‖₁ with respect to Ψ; sign(0) = 0.
inline Eigen::MatrixXd grad_psi(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& psi,
                                const Eigen::MatrixXd& a, const Hyperparams& = {}) {
  detail::require_shapes(signal, psi, a);
  return -(signal - psi * a).cwiseSign() * a.transpose();
}

// Subgradient of ‖E − ΨA‖₁ + λ3·J with respect to A; sign(0) = 0.
inline Eigen::MatrixXd grad_a(const Eigen::MatrixXd& signal, const Eigen::MatrixXd& psi,
                              const Eigen::MatrixXd& a, const Hyperparams& hp = {}) {
  detail::require_shapes(signal, psi, a);
  return detail::grad_a_from_residual(signal - psi * a, psi, a, hp.lambda3);
}

// One bias-corrected Adam update of `param` in place.
inline void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state,
                      double lr) {
  if (state.m.size() == 0) state = AdamState(param.rows(), param.cols());
  if (grad.rows() != param.rows() || grad.cols() != param.cols() ||
      state.m.rows() != param.rows() || state.m.cols() != param.cols()) {
    throw InvalidArgument("adam_step: shape mismatch between parameter, gradient and state");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = AdamState::kBeta1 * state.m + (1.0 - AdamState::kBeta1) * grad;
  state.v = AdamState::kBeta2 * state.v + (1.0 - AdamState::kBeta2) * grad.cwiseAbs2();
  const double bias1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double bias2 = 1.0 - std::pow(AdamState::kBeta2, t);
  param.array() -= lr * (state.m.array() / bias1) /
                   ((state.v.array() / bias2).sqrt() + AdamState::kEpsilon);
}

namespace detail {

inline LossBreakdown loss_from_residual(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& psi,
                                        const Eigen::MatrixXd& a, const Hyperparams& hp) {
  LossBreakdown loss;
  loss.reconstruction = residual.cwiseAbs().sum();
  loss.l1_psi = psi.cwiseAbs().sum();
  loss.l1_a = a.cwiseAbs().sum();
  loss.jitter = jitter_loss(a);
  loss.total = loss.reconstruction + hp.lambda1 * loss.l1_psi + hp.lambda2 * loss.l1_a +
               hp.lambda3 * loss.jitter;
  return loss;
}

inline Eigen::MatrixXd grad_a_from_residual(const Eigen::MatrixXd& residual,
                                            const Eigen::MatrixXd& psi, const Eigen::MatrixXd& a,
                                            double lambda3) {
  Eigen::MatrixXd grad = -psi.transpose() * residual.cwiseSign();
  const Eigen::Index t = a.cols();
  if (lambda3 != 0.0 && t >= 2) {
    const Eigen::MatrixXd step_sign = (a.rightCols(t - 1) - a.leftCols(t - 1)).cwiseSign();
    const double w = lambda3 * jitter_scale(a);
    grad.rightCols(t - 1) += w * step_sign;
    grad.leftCols(t - 1) -= w * step_sign;
  }
  return grad;
}

inline void check_feasible(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& a,
                           std::size_t iteration) {
  for (Eigen::Index c = 0; c < psi.cols(); ++c) {
    if (!(psi.col(c).norm() <= 1.0 + kBasisNormSlack)) {
      throw NumericalError("iteration " + std::to_string(iteration) + ": basis column " +
                           std::to_string(c) + " left the unit disk");
    }
  }
  if (!((a.array() >= 0.0).all() && (a.array() <= 1.0).all())) {
    throw NumericalError("iteration " + std::to_string(iteration) +
                         ": activation left [0, 1]");
  }
}

}  // namespace detail

struct Factorization {
  BasisMatrix psi;
  ActivationMatrix activations;
  // trace[0] is the loss at initialization, trace[i] the loss after iteration i.
  std::vector<LossBreakdown> trace;
  std::size_t iterations = 0;
  bool converged = false;
};

using ProgressCallback = std::function<void(std::size_t iteration, const LossBreakdown&)>;

// Random feasible starting point: unit-norm Gaussian basis columns and
// uniform [0, 1) activations, drawn from a single seeded stream.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initial_factors(Eigen::Index dim,
                                                                   Eigen::Index k,
                                                                   Eigen::Index steps,
                                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::MatrixXd psi(dim, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double norm = 0.0;
    do {
      for (Eigen::Index m = 0; m < dim; ++m) psi(m, c) = gauss(rng);
      norm = psi.col(c).norm();
    } while (norm == 0.0);
    psi.col(c) /= norm;
  }
  Eigen::MatrixXd a(k, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index r = 0; r < k; ++r) a(r, t) = uniform(rng);
  }
  return {std::move(psi), std::move(a)};
}

namespace detail {

// Learning-rate multiplier for the given 1-based iteration.
inline double lr_scale(const Hyperparams& hp, std::size_t iter) {
  if (hp.lr_half_life == 0.0) return 1.0;
  const double halvings = static_cast<double>(iter - 1) / hp.lr_half_life;
  return std::max(hp.min_lr_fraction, std::exp2(-halvings));
}

// Compares the mean total loss of the last `patience` iterations with the
// `patience` before them.
inline bool plateaued(const std::vector<LossBreakdown>& trace, std::size_t patience,
                      double rel_tol) {
  // trace[0] is the initialization; only post-iteration values count.
  if (trace.size() < 2 * patience + 1) return false;
  double recent = 0.0;
  double previous = 0.0;
  const std::size_t n = trace.size();
  for (std::size_t i = 0; i < patience; ++i) {
    recent += trace[n - 1 - i].total;
    previous += trace[n - 1 - patience - i].total;
  }
  recent /= static_cast<double>(patience);
  previous /= static_cast<double>(patience);
  return std::abs(recent - previous) / std::max(1e-12, previous) < rel_tol;
}

}  // namespace detail

inline Factorization factorize(const Eigen::MatrixXd& signal, std::size_t k, const Hyperparams& hp,
                               const ProgressCallback& progress = {}) {
  hp.validate();
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (signal.size() == 0) throw InvalidArgument("empty signal");
  if (!signal.allFinite()) throw InvalidArgument("signal has non-finite entries");

  auto [psi, a] = initial_factors(signal.rows(), static_cast<Eigen::Index>(k), signal.cols(), hp.seed);
  AdamState psi_state(psi.rows(), psi.cols());
  AdamState a_state(a.rows(), a.cols());

  Factorization result;
  Eigen::MatrixXd residual = signal - psi * a;
  result.trace.push_back(detail::loss_from_residual(residual, psi, a, hp));
  const double initial_total = result.trace.front().total;
  std::size_t plateau_run = 0;

  for (std::size_t iter = 1; iter <= hp.max_iters; ++iter) {
    const double scale = detail::lr_scale(hp, iter);
    const double lr_psi = hp.lr_psi * scale;
    const double lr_a = hp.lr_a * scale;

    // Ψ half-step.
    const Eigen::MatrixXd g_psi = -residual.cwiseSign() * a.transpose();
    adam_step(psi, g_psi, psi_state, lr_psi);
    psi = shrink(psi, lr_psi, hp.lambda1);
    project_unit_disk_in_place(psi, hp.normalize_all_columns);
    residual = signal - psi * a;

    // A half-step against the refreshed residual.
    const Eigen::MatrixXd g_a = detail::grad_a_from_residual(residual, psi, a, hp.lambda3);
    adam_step(a, g_a, a_state, lr_a);
    a = shrink(a, lr_a, hp.lambda2);
    project_interval_in_place(a);
    residual = signal - psi * a;

    if (hp.check_feasibility) detail::check_feasible(psi, a, iter);

    const LossBreakdown loss = detail::loss_from_residual(residual, psi, a, hp);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError(iter, "divergence guard: total loss is not finite");
    }
    if (loss.total > hp.divergence_factor * initial_total) {
      throw DivergenceError(iter, "divergence guard: total loss " + std::to_string(loss.total) +
                                      " exceeds " + std::to_string(hp.divergence_factor) +
                                      "x the initial loss " + std::to_string(initial_total));
    }
    result.trace.push_back(loss);
    result.iterations = iter;
    if (progress) progress(iter, loss);
    // A single coincidental match of two noisy window means is not enough.
    plateau_run = detail::plateaued(result.trace, hp.patience, hp.rel_tol) ? plateau_run + 1 : 0;
    if (plateau_run >= hp.patience) {
      result.converged = true;
      break;
    }
  }
  result.psi = BasisMatrix(std::move(psi));
  result.activations = ActivationMatrix(std::move(a));
  return result;
}

inline Factorization factorize(const EmbeddingSignal& signal, std::size_t k, const Hyperparams& hp,
                               const ProgressCallback& progress = {}) {
  return factorize(signal.as_double(), k, hp, progress);
}

// CSV with header "iteration,reconstruction,l1_psi,l1_a,jitter,total";
// values printed with round-trip precision so reruns compare byte-for-byte.
inline std::string loss_trace_csv(const std::vector<LossBreakdown>& trace) {
  std::string out = "iteration,reconstruction,l1_psi,l1_a,jitter,total\n";
  char buf[192];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& l = trace[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, l.reconstruction,
                  l.l1_psi, l.l1_a, l.jitter, l.total);
    out += buf;
  }
  return out;
}

}  // namespace sparse_diarize
