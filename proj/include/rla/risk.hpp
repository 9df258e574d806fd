#pragma once

// Sequential risk measurement with the ALPHA test supermartingale for
// sampling without replacement from a finite population of values in
// [0, upper], tested against the null hypothesis that the population mean
// is at most 1/2.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rla/model.hpp"

namespace rla {

/// Smallest gap kept between the alternative and the conditional null mean.
inline constexpr double kEtaGap = 1.0 / (1 << 20);

struct AlphaState {
  std::int64_t population = 0;  ///< N
  double upper = 1.0;           ///< upper bound on an observed value
  double eta = 1.0;             ///< alternative mean, fixed per assertion
  AuditMode mode = AuditMode::comparison;
  std::int64_t draws = 0;
  double running_sum = 0.0;
  double martingale = 1.0;      ///< T; may be +infinity
  double martingale_max = 1.0;

  static AlphaState fresh(std::int64_t population, double upper, double eta,
                          AuditMode mode = AuditMode::comparison);

  /// Conditional null mean of the values not yet drawn.
  double null_mean() const;
};

/// Rates of one- and two-vote overstatements, and how a deterministic
/// projection places them in the draw sequence.
struct ErrorModel {
  enum class Placement { first_then_equispaced, none };
  double p1 = 0.0;
  double p2 = 0.0;
  Placement placement = Placement::first_then_equispaced;

  void validate() const;
};

/// How each assertion's alternative eta is chosen.
struct EtaConfig {
  enum class Kind { optimal_comparison, fixed };
  Kind kind = Kind::optimal_comparison;
  /// Assumed overstatement rates feeding the optimal-comparison estimator.
  double p1 = 0.0;
  double p2 = 1e-4;
  /// Used when kind == fixed.
  double eta = 0.0;
};

/// Overstatement assorter value for overstatement `omega`.
double overstatement_assorter_value(double omega, double margin, double upper);

/// Maximizer of the expected log growth of the comparison martingale under
/// the given overstatement rates. Returns the value bound when margin <= 0.
double optimal_eta(double margin, double upper, double p1, double p2);

/// eta for an assertion under the configuration.
double choose_eta(const EtaConfig& config, double margin, double upper);

/// One ALPHA update. Throws std::invalid_argument for an out-of-range value
/// or an exhausted population.
AlphaState alpha_step(const AlphaState& state, double x);

/// min(1, 1/T_max); zero once the null has been ruled out.
double p_value(const AlphaState& state);

/// Draw values of a deterministic projection: value for the k-th future draw (0-based).
using DrawSequence = std::function<double(std::int64_t)>;

/// Draws needed, beyond those already in `state`, for the p-value to fall to
/// `risk_limit`, when future values follow `sequence`. Stops at the
/// population size (a full hand count).
std::int64_t project_draws(const AlphaState& state, double risk_limit, const DrawSequence& sequence);

/// Sequence with the one-vote value at positions 1, 1+m, 1+2m, ... (m = floor(1/p1))
/// and the two-vote value at positions m2, 2*m2, ... (m2 = floor(1/p2)), the clean
/// value elsewhere.
DrawSequence comparison_sequence(double margin, double upper, const ErrorModel& errors);

/// Initial sample size for a comparison audit of one assertion.
std::int64_t estimate_sample_size(std::int64_t population, double margin, double upper, double risk_limit,
                                  const ErrorModel& errors, const EtaConfig& eta_config);

}  // namespace rla
