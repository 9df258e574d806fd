#include "rla/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rla {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Sums of many floating-point values drift; closer than this to zero counts as zero.
constexpr double kSumSlack = 1e-9;

double expected_log_growth(double eta, double mu, double upper, const double (&values)[3], const double (&weights)[3]) {
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (weights[k] == 0.0) continue;
    const double term = (values[k] * eta / mu + (upper - values[k]) * (upper - eta) / (upper - mu)) / upper;
    if (term <= 0.0) return -kInf;
    g += weights[k] * std::log(term);
  }
  return g;
}

}  // namespace

AlphaState AlphaState::fresh(std::int64_t population, double upper, double eta, AuditMode mode) {
  AlphaState s;
  s.population = population;
  s.upper = upper;
  s.eta = eta;
  s.mode = mode;
  return s;
}

double AlphaState::null_mean() const {
  if (draws >= population) return 0.0;
  double numerator = 0.5 * static_cast<double>(population) - running_sum;
  if (std::abs(numerator) <= kSumSlack * std::max(1.0, running_sum)) numerator = 0.0;
  return numerator / static_cast<double>(population - draws);
}

void ErrorModel::validate() const {
  if (p1 < 0.0 || p2 < 0.0 || p1 + p2 > 1.0) throw InputError("error rates must be nonnegative and sum to at most 1");
}

double overstatement_assorter_value(double omega, double margin, double upper) {
  return (1.0 - omega / upper) / (2.0 - margin / upper);
}

double optimal_eta(double margin, double upper, double p1, double p2) {
  const double bound = 2.0 * upper / (2.0 * upper - margin);
  if (margin <= 0.0) return bound;
  const double mu = 0.5;
  const double values[3] = {overstatement_assorter_value(0.0, margin, upper),
                            overstatement_assorter_value(upper / 2.0, margin, upper),
                            overstatement_assorter_value(upper, margin, upper)};
  const double weights[3] = {1.0 - p1 - p2, p1, p2};

  // Golden-section search for the maximum of a concave function.
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = mu + kEtaGap;
  double hi = bound;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = expected_log_growth(x1, mu, bound, values, weights);
  double f2 = expected_log_growth(x2, mu, bound, values, weights);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = expected_log_growth(x2, mu, bound, values, weights);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = expected_log_growth(x1, mu, bound, values, weights);
    }
  }
  // The maximizer may sit on either end of the interval.
  double best = 0.5 * (lo + hi);
  double best_growth = expected_log_growth(best, mu, bound, values, weights);
  for (double edge : {mu + kEtaGap, bound}) {
    const double g = expected_log_growth(edge, mu, bound, values, weights);
    if (g >= best_growth) {
      best = edge;
      best_growth = g;
    }
  }
  return best;
}

double choose_eta(const EtaConfig& config, double margin, double upper) {
  if (config.kind == EtaConfig::Kind::fixed) return config.eta;
  return optimal_eta(margin, upper, config.p1, config.p2);
}

AlphaState alpha_step(const AlphaState& state, double x) {
  if (state.draws >= state.population) throw std::invalid_argument("population exhausted");
  if (!(x >= 0.0 && x <= state.upper * (1.0 + 1e-12)))
    throw std::invalid_argument("observed value outside [0, upper]");
  AlphaState next = state;
  const double mu = state.null_mean();
  if (std::isinf(state.martingale) || state.martingale == 0.0) {
    // Absorbing states: the null was already ruled out or can no longer be tested.
  } else if (mu < 0.0) {
    next.martingale = kInf;
  } else if (mu >= state.upper) {
    next.martingale = 0.0;
  } else {
    const double eta = std::min(std::max(state.eta, mu + kEtaGap), state.upper);
    const double term = mu == 0.0 ? (x > 0.0 ? kInf : (state.upper - eta) / state.upper)
                                  : (x * eta / mu + (state.upper - x) * (state.upper - eta) / (state.upper - mu)) /
                                        state.upper;
    next.martingale = state.martingale * term;
  }
  next.running_sum += x;
  next.draws += 1;
  next.martingale_max = std::max(next.martingale_max, next.martingale);
  return next;
}

double p_value(const AlphaState& state) {
  if (std::isinf(state.martingale_max)) return 0.0;
  return std::min(1.0, 1.0 / state.martingale_max);
}

std::int64_t project_draws(const AlphaState& state, double risk_limit, const DrawSequence& sequence) {
  AlphaState s = state;
  std::int64_t k = 0;
  while (p_value(s) > risk_limit && s.draws < s.population) {
    s = alpha_step(s, std::min(sequence(k), s.upper));
    ++k;
    // Once T hits zero the projection cannot recover.
    if (s.martingale == 0.0) return state.population - state.draws;
  }
  return k;
}

DrawSequence comparison_sequence(double margin, double upper, const ErrorModel& errors) {
  const double clean = overstatement_assorter_value(0.0, margin, upper);
  const double one_vote = overstatement_assorter_value(upper / 2.0, margin, upper);
  const double two_vote = overstatement_assorter_value(upper, margin, upper);
  const bool placed = errors.placement == ErrorModel::Placement::first_then_equispaced;
  const std::int64_t step1 = placed && errors.p1 > 0.0 ? std::max<std::int64_t>(1, std::floor(1.0 / errors.p1)) : 0;
  const std::int64_t step2 = placed && errors.p2 > 0.0 ? std::max<std::int64_t>(1, std::floor(1.0 / errors.p2)) : 0;
  return [=](std::int64_t k) {
    const std::int64_t position = k + 1;
    if (step2 > 0 && position % step2 == 0) return two_vote;
    if (step1 > 0 && k % step1 == 0) return one_vote;
    return clean;
  };
}

std::int64_t estimate_sample_size(std::int64_t population, double margin, double upper, double risk_limit,
                                  const ErrorModel& errors, const EtaConfig& eta_config) {
  if (population < 1) throw InputError("population must be at least 1");
  if (!(risk_limit > 0.0 && risk_limit < 1.0)) throw InputError("risk limit must lie in (0, 1)");
  errors.validate();
  if (margin <= 0.0) return population;
  const double bound = 2.0 * upper / (2.0 * upper - margin);
  const double eta = choose_eta(eta_config, margin, upper);
  AlphaState state = AlphaState::fresh(population, bound, eta);
  return project_draws(state, risk_limit, comparison_sequence(margin, upper, errors));
}

}  // namespace rla
