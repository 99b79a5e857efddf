#include "shel/model.hpp"


#include <cstdio>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "shel/error.hpp"

namespace shel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;
}  // namespace

double PriorSpec::log_density(double x) const {
  switch (dist) {
    case Dist::Gamma:
      if (x <= 0.0) return -kInf;
      return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
    case Dist::InvGamma:
      if (x <= 0.0) return -kInf;
      return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
    case Dist::Uniform:
      if (x < a || x > b) return -kInf;
      return -std::log(b - a);
  }
  return -kInf;
}

double PriorSpec::median() const {
  switch (dist) {
    case Dist::Gamma:
      return gamma_quantile(a, b, 0.5);
    case Dist::InvGamma:
      // X ~ IG(a, b)  <=>  1/X ~ Gamma(a, rate b)
      return 1.0 / gamma_quantile(a, b, 0.5);
    case Dist::Uniform:
      return 0.5 * (a + b);
  }
  return 0.0;
}

bool PriorSpec::in_support(double x) const {
  return log_density(x) > -kInf;
}

void ModelSpec::validate() const {
  if (family == EqFamily::GaussianFH && link != LinkKind::Identity)
    throw ConfigError("gaussian_fh uses the identity link");
  if (family == EqFamily::PoissonLink && link != LinkKind::Log)
    throw ConfigError("poisson_link uses the log link");
  if (beta_prior.kind == BetaPrior::Kind::ZellnerG) {
    if (beta_prior.g <= 0.0) throw ConfigError("Zellner g must be positive");
    if (process.kind != ProcessKind::MoranICAR &&
        process.kind != ProcessKind::Independence)
      throw ConfigError(
          "the Zellner prior couples beta to the process scale; it needs a "
          "moran_icar or independence process");
  } else if (beta_prior.sd <= 0.0) {
    throw ConfigError("beta prior sd must be positive");
  }
}

uint64_t model_seed_key(const ModelSpec& spec) {
  char buf[256];
  const auto& p = spec.process;
  std::snprintf(buf, sizeof(buf),
                "f%d l%d c%d p%d q%d:%.17g t%d:%.17g:%.17g s%d:%.17g:%.17g "
                "h%d:%.17g:%.17g a%d:%.17g:%.17g b%d:%.17g:%.17g",
                static_cast<int>(spec.family), static_cast<int>(spec.link),
                spec.comparator ? 1 : 0, static_cast<int>(p.kind),
                static_cast<int>(p.q_policy.kind), p.q_policy.fraction,
                static_cast<int>(p.tau_prior.dist), p.tau_prior.a, p.tau_prior.b,
                static_cast<int>(p.sigma2_prior.dist), p.sigma2_prior.a,
                p.sigma2_prior.b, static_cast<int>(p.phi_prior.dist), p.phi_prior.a,
                p.phi_prior.b, static_cast<int>(p.a_prior.dist), p.a_prior.a,
                p.a_prior.b, static_cast<int>(spec.beta_prior.kind),
                spec.beta_prior.g, spec.beta_prior.sd);
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char* c = buf; *c; ++c) {
    h ^= static_cast<unsigned char>(*c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

SpatialContext make_context(const ModelSpec& spec, const ObservedDataset& data) {
  SpatialContext ctx;
  ctx.n = data.n();
  switch (spec.process.kind) {
    case ProcessKind::MoranICAR:
      if (!data.has_graph())
        throw DataError("model '" + spec.name + "' needs a lattice graph");
      ctx.basis = moran_basis(data.graph, data.X, spec.process.q_policy);
      break;
    case ProcessKind::ExpGP:
      if (!data.has_coords())
        throw DataError("model '" + spec.name + "' needs point coordinates");
      for (Eigen::Index i = 0; i < data.coords.rows(); ++i)
        for (Eigen::Index j = i + 1; j < data.coords.rows(); ++j)
          if ((data.coords.row(i) - data.coords.row(j)).norm() == 0.0)
            throw DuplicateCoordinates("duplicate coordinates at rows " +
                                       std::to_string(i) + " and " +
                                       std::to_string(j));
      ctx.dist = pairwise_distances(data.coords);
      break;
    case ProcessKind::Independence:
    case ProcessKind::None:
      break;
  }
  return ctx;
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<int> indices_without(int n, int skip) {
  std::vector<int> idx;
  idx.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != skip) idx.push_back(i);
  return idx;
}

PosteriorModel::PosteriorModel(const ModelSpec& spec, const ObservedDataset& data,
                               const SpatialContext& ctx, std::vector<int> active,
                               double feas_eps)
    : spec_(spec),
      data_(data),
      ctx_(ctx),
      active_(active.empty() ? all_indices(data.n()) : std::move(active)),
      feas_eps_(feas_eps) {
  spec_.validate();
  data_.validate();
  if (spec_.family == EqFamily::GaussianFH && !data_.has_sigma2())
    throw ValidationError("the Gaussian family needs known sampling variances");
  if (spec_.process.kind == ProcessKind::MoranICAR && !ctx_.basis)
    throw ConfigError("MoranICAR model given a context without a basis");
  if (spec_.process.kind == ProcessKind::ExpGP && ctx_.dist.rows() != data_.n())
    throw ConfigError("ExpGP model given a context without distances");

  // WLS on the active subset: the Zellner center and the chain start
  ObservedDataset& sub = active_data_;
  const auto na = static_cast<Eigen::Index>(active_.size());
  sub.z.resize(na);
  sub.X.resize(na, data_.m());
  sub.covariate_names = data_.covariate_names;
  if (data_.has_sigma2()) sub.sigma2.resize(na);
  if (data_.has_offset()) sub.offset.resize(na);
  for (size_t k = 0; k < active_.size(); ++k) {
    const int i = active_[k];
    const auto kk = static_cast<Eigen::Index>(k);
    sub.ids.push_back(data_.ids.empty() ? std::to_string(i) : data_.ids[i]);
    sub.z[kk] = data_.z[i];
    sub.X.row(kk) = data_.X.row(i);
    if (data_.has_sigma2()) sub.sigma2[kk] = data_.sigma2[i];
    if (data_.has_offset()) sub.offset[kk] = data_.offset[i];
  }
  wls_ = wls_center(sub, spec_.family);
  beta_center_ = (spec_.beta_prior.kind == BetaPrior::Kind::ZellnerG)
                     ? wls_.beta
                     : Eigen::VectorXd::Zero(data_.m()).eval();
}

int PosteriorModel::n_process() const {
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      return ctx_.basis->q();
    case ProcessKind::ExpGP:
    case ProcessKind::Independence:
      return data_.n();
    case ProcessKind::None:
      return 0;
  }
  return 0;
}

int PosteriorModel::n_hyper() const {
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      return 1;
    case ProcessKind::ExpGP:
      return 2;
    case ProcessKind::Independence:
      return 1;
    case ProcessKind::None:
      return 0;
  }
  return 0;
}

std::vector<std::string> PosteriorModel::hyper_names() const {
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      return {"tau"};
    case ProcessKind::ExpGP:
      return {"sigma2_y", "phi"};
    case ProcessKind::Independence:
      return {"A"};
    case ProcessKind::None:
      return {};
  }
  return {};
}

Eigen::VectorXd PosteriorModel::hyper_init() const {
  Eigen::VectorXd h(n_hyper());
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      h[0] = spec_.process.tau_prior.median();
      break;
    case ProcessKind::ExpGP:
      h[0] = spec_.process.sigma2_prior.median();
      h[1] = spec_.process.phi_prior.median();
      break;
    case ProcessKind::Independence:
      h[0] = spec_.process.a_prior.median();
      break;
    case ProcessKind::None:
      break;
  }
  return h;
}

LatentState PosteriorModel::make_state(Eigen::VectorXd beta) const {
  LatentState s;
  s.beta = std::move(beta);
  s.process = Eigen::VectorXd::Zero(n_process());
  s.hyper = hyper_init();
  return s;
}

Eigen::VectorXd PosteriorModel::build_theta(const LatentState& state) const {
  if (state.beta.size() != data_.m())
    throw DimensionMismatch("beta length does not match design columns");
  Eigen::VectorXd eta = data_.X * state.beta;
  if (data_.has_offset()) eta += data_.offset;
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      eta.noalias() += ctx_.basis->M * state.process;
      break;
    case ProcessKind::ExpGP:
    case ProcessKind::Independence:
      eta += state.process;
      break;
    case ProcessKind::None:
      break;
  }
  if (spec_.link == LinkKind::Log) {
    if ((eta.array() > 700.0).any())
      throw OverflowError("log-link exponent exceeds 700");
    return eta.array().exp();
  }
  return eta;
}

Eigen::MatrixXd PosteriorModel::residuals_active(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd theta_a(static_cast<Eigen::Index>(active_.size()));
  for (size_t k = 0; k < active_.size(); ++k)
    theta_a[static_cast<Eigen::Index>(k)] = theta[active_[k]];
  return spec_.equations().residuals(active_data_.z, theta_a, active_data_.sigma2);
}

double PosteriorModel::parametric_loglik(const Eigen::VectorXd& theta) const {
  double ll = 0.0;
  if (spec_.family == EqFamily::GaussianFH) {
    for (size_t k = 0; k < active_.size(); ++k) {
      const int i = active_[k];
      const double r = data_.z[i] - theta[i];
      ll += -0.5 * (kLog2Pi + std::log(data_.sigma2[i])) -
            0.5 * r * r / data_.sigma2[i];
    }
  } else {
    for (size_t k = 0; k < active_.size(); ++k) {
      const int i = active_[k];
      if (theta[i] <= 0.0) return -kInf;
      ll += data_.z[i] * std::log(theta[i]) - theta[i] - std::lgamma(data_.z[i] + 1.0);
    }
  }
  return ll;
}

double PosteriorModel::data_loglik(const LatentState& state) const {
  Eigen::VectorXd theta;
  try {
    theta = build_theta(state);
  } catch (const OverflowError&) {
    return -kInf;
  }
  if (spec_.comparator) return parametric_loglik(theta);
  ELOptions opts;
  opts.feas_eps = feas_eps_;
  const ELState s = solve_lambda(residuals_active(theta), opts);
  return log_el(s);
}

ELState PosteriorModel::el_state(const LatentState& state) const {
  const Eigen::VectorXd theta = build_theta(state);
  ELOptions opts;
  opts.feas_eps = feas_eps_;
  ELState s = solve_lambda(residuals_active(theta), opts);
  s.theta = theta;
  return s;
}

double PosteriorModel::process_logprior(const LatentState& state) const {
  const Eigen::VectorXd& y = state.process;
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR: {
      const double tau = state.hyper[0];
      if (tau <= 0.0) return -kInf;
      const SpatialBasis& b = *ctx_.basis;
      const double quad = y.transpose() * b.Q_reduced * y;
      const double q = b.q();
      return 0.5 * q * std::log(tau) + 0.5 * b.logdet_Qr - 0.5 * q * kLog2Pi -
             0.5 * tau * quad;
    }
    case ProcessKind::ExpGP: {
      const double s2 = state.hyper[0], phi = state.hyper[1];
      if (s2 <= 0.0 || phi <= 0.0) return -kInf;
      const Eigen::MatrixXd S = exp_covariance_from_dist(ctx_.dist, s2, phi);
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) return -kInf;
      const double logdet =
          2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
      const double quad = y.dot(llt.solve(y));
      return -0.5 * (y.size() * kLog2Pi + logdet + quad);
    }
    case ProcessKind::Independence: {
      const double A = state.hyper[0];
      if (A <= 0.0) return -kInf;
      return -0.5 * y.size() * (kLog2Pi + std::log(A)) - 0.5 * y.squaredNorm() / A;
    }
    case ProcessKind::None:
      return 0.0;
  }
  return 0.0;
}

double PosteriorModel::zellner_kappa(const LatentState& state) const {
  // precision multiplier: tau for the lattice prior, 1/A for independence
  if (spec_.process.kind == ProcessKind::MoranICAR) return state.hyper[0];
  return 1.0 / state.hyper[0];
}

double PosteriorModel::beta_logprior(const LatentState& state) const {
  const int m = data_.m();
  if (spec_.beta_prior.kind == BetaPrior::Kind::ZellnerG) {
    const double kappa = zellner_kappa(state);
    if (!(kappa > 0.0)) return -kInf;
    const double prec = spec_.beta_prior.g * kappa;
    const double ss = (state.beta - beta_center_).squaredNorm();
    return 0.5 * m * std::log(prec) - 0.5 * m * kLog2Pi - 0.5 * prec * ss;
  }
  const double sd = spec_.beta_prior.sd;
  return -0.5 * m * (kLog2Pi + 2.0 * std::log(sd)) -
         0.5 * state.beta.squaredNorm() / (sd * sd);
}

double PosteriorModel::hyper_logprior(const LatentState& state) const {
  switch (spec_.process.kind) {
    case ProcessKind::MoranICAR:
      return spec_.process.tau_prior.log_density(state.hyper[0]);
    case ProcessKind::ExpGP:
      return spec_.process.sigma2_prior.log_density(state.hyper[0]) +
             spec_.process.phi_prior.log_density(state.hyper[1]);
    case ProcessKind::Independence:
      return spec_.process.a_prior.log_density(state.hyper[0]);
    case ProcessKind::None:
      return 0.0;
  }
  return 0.0;
}

double PosteriorModel::log_kernel(const LatentState& state) const {
  const double hp = hyper_logprior(state);
  if (hp == -kInf) return -kInf;
  const double pp = process_logprior(state);
  if (pp == -kInf) return -kInf;
  const double bp = beta_logprior(state);
  if (bp == -kInf) return -kInf;
  const double ll = data_loglik(state);
  if (ll == -kInf) return -kInf;
  return ll + pp + bp + hp;
}

}  // namespace shel
