// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>

#include "momtx/cpd/cpd.hpp"
#include "momtx/errors.hpp"

namespace momtx::cpd {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Matern-3/2 Gram matrix over integer time indices and its derivative with
// respect to the log lengthscale.
void matern(std::size_t n, double s2, double ell, Eigen::MatrixXd& k, Eigen::MatrixXd* dk_dlog_ell) {
  k.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (dk_dlog_ell) dk_dlog_ell->resize(k.rows(), k.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double a = kSqrt3 * static_cast<double>(i - j) / ell;
      const double e = std::exp(-a);
      const double v = s2 * (1.0 + a) * e;
      k(i, j) = k(j, i) = v;
      if (dk_dlog_ell) (*dk_dlog_ell)(i, j) = (*dk_dlog_ell)(j, i) = s2 * a * a * e;
    }
  }
}

struct Likelihood {
  double nlml = std::numeric_limits<double>::infinity();
  double mean = 0.0;
  Eigen::MatrixXd w;  // K^-1 - alpha alpha^T, filled on request
};

Likelihood profiled_nlml(Eigen::MatrixXd& k, std::span<const double> y, bool want_w) {
  Likelihood out;
  const Eigen::Index n = k.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return out;
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(l(i, i) > 0.0)) return out;
    logdet += 2.0 * std::log(l(i, i));
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd ki1 = llt.solve(ones);
  const Eigen::VectorXd kiy = llt.solve(yv);
  const double mu = ones.dot(kiy) / ones.dot(ki1);
  const Eigen::VectorXd alpha = kiy - mu * ki1;
  const Eigen::VectorXd r = yv.array() - mu;
  const double nlml = 0.5 * r.dot(alpha) + 0.5 * logdet +
                      0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(nlml)) return out;
  out.nlml = nlml;
  out.mean = mu;
  if (want_w) {
    out.w = llt.solve(Eigen::MatrixXd::Identity(n, n));
    out.w.noalias() -= alpha * alpha.transpose();
  }
  return out;
}

double half_frobenius(const Eigen::MatrixXd& w, const Eigen::MatrixXd& dk) {
  return 0.5 * w.cwiseProduct(dk).sum();
}

struct Bound {
  double lo;
  double hi;
};

// Parameters are optimised in an unconstrained space u with
// theta = lo + (hi - lo) * sigmoid(u).
class BoundedObjective : public ceres::FirstOrderFunction {
 public:
  using Fn = double (*)(std::span<const double>, std::span<const double>, std::span<double>,
                        double, double*);

  BoundedObjective(Fn fn, std::span<const double> y, std::vector<Bound> bounds, double jitter)
      : fn_(fn), y_(y), bounds_(std::move(bounds)), jitter_(jitter) {}

  bool Evaluate(const double* u, double* cost, double* gradient) const override {
    const std::size_t p = bounds_.size();
    std::vector<double> theta(p);
    std::vector<double> g(gradient ? p : 0);
    for (std::size_t i = 0; i < p; ++i) theta[i] = to_theta(i, u[i]);
    const double v = fn_(y_, theta, g, jitter_, nullptr);
    if (!std::isfinite(v)) return false;
    *cost = v;
    if (gradient) {
      for (std::size_t i = 0; i < p; ++i) {
        const double s = sigmoid(u[i]);
        gradient[i] = g[i] * (bounds_[i].hi - bounds_[i].lo) * s * (1.0 - s);
      }
    }
    return true;
  }

  int NumParameters() const override { return static_cast<int>(bounds_.size()); }

  double to_theta(std::size_t i, double u) const {
    return bounds_[i].lo + (bounds_[i].hi - bounds_[i].lo) * sigmoid(u);
  }
  double to_u(std::size_t i, double theta) const {
    const double f = std::clamp((theta - bounds_[i].lo) / (bounds_[i].hi - bounds_[i].lo), 1e-9,
                                1.0 - 1e-9);
    return std::log(f / (1.0 - f));
  }

 private:
  Fn fn_;
  std::span<const double> y_;
  std::vector<Bound> bounds_;
  double jitter_;
};

struct Start {
  std::vector<double> theta;
  std::vector<bool> perturb;
};

GpFit run_fit(BoundedObjective::Fn fn, std::span<const double> y, std::vector<Bound> bounds,
              const std::vector<Start>& starts, std::uint64_t seed, const GpOptions& options,
              bool stop_at_first_success) {
  GpFit best;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.1);
  auto* objective = new BoundedObjective(fn, y, bounds, options.jitter);
  ceres::GradientProblem problem(objective);
  ceres::GradientProblemSolver::Options solver_options;
  solver_options.line_search_direction_type = ceres::LBFGS;
  solver_options.max_num_iterations = options.max_iterations;
  solver_options.logging_type = ceres::SILENT;
  solver_options.minimizer_progress_to_stdout = false;
  for (const Start& start : starts) {
    std::vector<double> u(bounds.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = objective->to_u(i, start.theta[i]);
      const double e = jitter(rng);
      if (start.perturb[i]) u[i] += e;
    }
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(solver_options, problem, u.data(), &summary);
    std::vector<double> theta(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) theta[i] = objective->to_theta(i, u[i]);
    double mean = 0.0;
    const double value = fn(y, theta, {}, options.jitter, &mean);
    if (std::isfinite(value) && value < best.nlml) {
      best.ok = true;
      best.nlml = value;
      best.params = theta;
      best.mean = mean;
    }
    if (best.ok && stop_at_first_success) break;
  }
  return best;
}

}  // namespace

std::vector<double> standardise(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  std::vector<double> out(values.size(), 0.0);
  if (var > 0.0) {
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  }
  return out;
}

double nlml_plain(std::span<const double> y, std::span<const double> params, std::span<double> grad,
                  double jitter, double* mean_out) {
  if (params.size() != 3) throw DimensionError("nlml_plain: expects 3 parameters");
  const std::size_t n = y.size();
  const double s2 = std::exp(params[0]);
  const double ell = std::exp(params[1]);
  const double noise = std::exp(params[2]);
  Eigen::MatrixXd k;
  Eigen::MatrixXd dk_ell;
  matern(n, s2, ell, k, grad.empty() ? nullptr : &dk_ell);
  Eigen::MatrixXd cov = k;
  cov.diagonal().array() += noise + jitter;
  Likelihood lik = profiled_nlml(cov, y, !grad.empty());
  if (mean_out) *mean_out = lik.mean;
  if (!grad.empty() && std::isfinite(lik.nlml)) {
    grad[0] = half_frobenius(lik.w, k);
    grad[1] = half_frobenius(lik.w, dk_ell);
    grad[2] = 0.5 * noise * lik.w.trace();
  }
  return lik.nlml;
}

double nlml_changepoint(std::span<const double> y, std::span<const double> params,
                        std::span<double> grad, double jitter, double* mean_out) {
  if (params.size() != 7) throw DimensionError("nlml_changepoint: expects 7 parameters");
  const std::size_t n = y.size();
  const Eigen::Index ni = static_cast<Eigen::Index>(n);
  const double s2a = std::exp(params[0]);
  const double s2b = std::exp(params[2]);
  const double loc = params[4];
  const double steep = std::exp(params[5]);
  const double noise = std::exp(params[6]);
  const bool want = !grad.empty();
  Eigen::MatrixXd ka, kb, dka, dkb;
  matern(n, s2a, std::exp(params[1]), ka, want ? &dka : nullptr);
  matern(n, s2b, std::exp(params[3]), kb, want ? &dkb : nullptr);
  Eigen::VectorXd s(ni);
  for (Eigen::Index i = 0; i < ni; ++i) s(i) = sigmoid(steep * (static_cast<double>(i) - loc));
  const Eigen::VectorXd sa = (1.0 - s.array()).matrix();
  const Eigen::MatrixXd pa = sa * sa.transpose();
  const Eigen::MatrixXd pb = s * s.transpose();
  Eigen::MatrixXd cov = pa.cwiseProduct(ka) + pb.cwiseProduct(kb);
  cov.diagonal().array() += noise + jitter;
  Likelihood lik = profiled_nlml(cov, y, want);
  if (mean_out) *mean_out = lik.mean;
  if (want && std::isfinite(lik.nlml)) {
    const Eigen::MatrixXd& w = lik.w;
    grad[0] = half_frobenius(w, pa.cwiseProduct(ka));
    grad[1] = half_frobenius(w, pa.cwiseProduct(dka));
    grad[2] = half_frobenius(w, pb.cwiseProduct(kb));
    grad[3] = half_frobenius(w, pb.cwiseProduct(dkb));
    // dK_ij/ds_i = -(1 - s_j) ka_ij + s_j kb_ij; W and K are symmetric.
    const Eigen::MatrixXd a = -(ka * sa.asDiagonal()) + kb * s.asDiagonal();
    const Eigen::VectorXd row = w.cwiseProduct(a).rowwise().sum();
    double g_loc = 0.0;
    double g_steep = 0.0;
    for (Eigen::Index i = 0; i < ni; ++i) {
      const double ds = s(i) * (1.0 - s(i));
      g_loc += row(i) * (-steep * ds);
      g_steep += row(i) * steep * (static_cast<double>(i) - loc) * ds;
    }
    grad[4] = g_loc;
    grad[5] = g_steep;
    grad[6] = 0.5 * noise * w.trace();
  }
  return lik.nlml;
}

namespace {

std::vector<double> check_window(std::span<const double> window) {
  if (window.size() < 3) throw ContractError("GP fit needs a window of at least 3 returns");
  for (double v : window) {
    if (!std::isfinite(v)) throw DataError("GP fit: non-finite return in window");
  }
  return standardise(window);
}

}  // namespace

GpFit fit_plain_gp(std::span<const double> window, std::uint64_t seed, const GpOptions& options) {
  const std::vector<double> y = check_window(window);
  const double n = static_cast<double>(y.size());
  std::vector<Bound> bounds{{std::log(1e-4), std::log(20.0)},
                            {std::log(0.5), std::log(20.0 * n)},
                            {std::log(1e-4), std::log(20.0)}};
  const double lengths[] = {std::max(1.0, n / 4.0), 2.0, n};
  std::vector<Start> starts;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    starts.push_back({{std::log(0.5), std::log(lengths[r % 3]), std::log(0.5)}, {r >= 3, r >= 3, r >= 3}});
  }
  return run_fit(&nlml_plain, y, bounds, starts, seed, options, false);
}

GpFit fit_changepoint_gp(std::span<const double> window, std::uint64_t seed,
                         const GpOptions& options, const GpFit* plain) {
  const std::vector<double> y = check_window(window);
  const double n = static_cast<double>(y.size());
  const Bound var{std::log(1e-4), std::log(20.0)};
  const Bound ell{std::log(0.5), std::log(20.0 * n)};
  std::vector<Bound> bounds{var, ell, var, ell, {0.0, n - 1.0}, {std::log(0.1), std::log(20.0)}, var};
  const int restarts = std::max(1, options.restarts);
  std::vector<Start> starts;
  for (int r = 0; r < restarts; ++r) {
    const double frac = static_cast<double>(r + 1) / static_cast<double>(restarts + 1);
    double v0 = std::log(0.5);
    double l0 = std::log(std::max(1.0, n / 8.0));
    double noise0 = std::log(0.5);
    if (plain && plain->ok) {
      v0 = plain->params[0];
      l0 = plain->params[1];
      noise0 = plain->params[2];
    }
    starts.push_back({{v0, l0, v0, l0, frac * (n - 1.0), 0.0, noise0},
                      {true, true, true, true, false, true, true}});
  }
  GpFit fit = run_fit(&nlml_changepoint, y, bounds, starts, seed, options, false);
  if (fit.ok) fit.location = fit.params[4];
  return fit;
}

CpdPoint cpd_window(std::span<const double> returns, std::uint64_t seed, const GpOptions& options) {
  CpdPoint out;
  const GpFit plain = fit_plain_gp(returns, seed, options);
  const GpFit cp = fit_changepoint_gp(returns, seed + 1, options, &plain);
  if (!plain.ok || !cp.ok) return out;
  const double n = static_cast<double>(returns.size());
  const double delta = std::max(0.0, plain.nlml - cp.nlml);
  out.ok = true;
  out.location = cp.location;
  out.nlml_plain = plain.nlml;
  out.nlml_changepoint = cp.nlml;
  out.gamma = std::clamp(1.0 - ((n - 1.0) - cp.location) / n, kFeatureFloor, 1.0 - kFeatureFloor);
  out.nu = std::clamp(1.0 - std::exp(-delta / n), kFeatureFloor, 1.0 - kFeatureFloor);
  return out;
}

}  // namespace momtx::cpd
