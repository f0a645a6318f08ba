#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "sssl/eigensystem.hpp"
#include "sssl/kernel.hpp"
#include "sssl/types.hpp"

namespace sssl {

// Power-law envelope lambda_k <= a^2 k^(-p), fitted by least squares in
// log-log space and then calibrated so the envelope actually dominates every
// eigenvalue in the fitted range.
struct PowerLawFit {
  double a = 0.0;             // envelope amplitude (a, not a^2)
  double p = 0.0;             // decay exponent; 0 for a flat spectrum
  double max_violation = 0.0; // max lambda_k - a^2 k^(-p); <= 0 after calibration
  Index k_begin = 1;          // fitted range, 1-based inclusive
  Index k_end = 1;
  double a_squared() const { return a * a; }
};

// Fits on the strictly positive eigenvalues above 1e-12 * lambda_1.
// Throws unless at least 3 positive eigenvalues are available.
PowerLawFit fit_power_law(const Vector& lambdas_descending);

// Empirical bounded-eigenfunction constant: max over eval points and i < s of
// |phi_i(x)| / sqrt(lambda_i). The division by the empirical lambda puts the
// RKHS-normalized eigenfunctions on the distribution-normalized scale, where
// their sample mean square is exactly 1.
double c_hat_estimate(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
                      const Dataset& eval_points);

// max over eval points of sum_{i<s} (phi_i(x) / sqrt(lambda_i))^2.
double m_of_s(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
              const Dataset& eval_points, Index s);

// lambda_s - lambda_{s+1} with 1-based s. Throws when s+1 entries are not
// available.
double eigengap(const Vector& lambdas_descending, Index s);

// 12 ln(N) / sqrt(N). Accepts real-valued N >= 2 (counts in practice).
double tau_n(double n_unlabeled);

// Labeled-sample budget 64 C^2 ln^2(2 N^3) (R a / eps)^(4/(p-1)). Substituting
// the empirical constant for C gives the finite-sample variant. Throws when
// p <= 1 (exponent undefined) or any input is non-positive.
double required_labels(double c, double n_unlabeled, double r, double a, double eps, double p);

// ceil((a R / eps)^(2/(p-1))), at least 1.
Index recommended_s(double a, double r, double eps, double p);

struct UnlabeledBudget {
  bool ok = false;
  double required_n = 0.0;  // the max of the two terms; +inf when r_s = 0
  std::string reason;       // populated when ok is false
};

// N >= max(144 R^2 ln^2(N) / (r_s^2 eps^2), 144 R^4 a^2 ln^2(N) / eps^4).
UnlabeledBudget unlabeled_budget(double n_unlabeled, double r, double a, double eps, double r_s);
bool unlabeled_budget_ok(double n_unlabeled, double r, double a, double eps, double r_s);

struct DiagnosticsInputs {
  double r = 1.0;       // RKHS-norm budget for the comparator function
  double eps = 0.1;     // target approximation error (not squared)
  Index n_labeled = 0;  // 0 = unknown
  bool defaults_used = false;  // set when r/eps came from defaults, not the user
};

struct DiagnosticsReport {
  PowerLawFit power_law;
  bool power_law_ok = false;  // p > 2
  double c_hat = 0.0;
  double m_s = 0.0;
  Index m_s_at = 0;    // the s at which m_of_s was evaluated
  double r_s = 0.0;    // eigengap at eigengap_s
  Index eigengap_s = 0;
  bool eigengap_capped = false;  // recommended s+1 exceeded the computed pairs
  double tau = 0.0;
  double eigengap_threshold = 0.0;  // 3 tau^(2/3)
  bool eigengap_ok = false;
  std::optional<double> n0;          // absent when p <= 1
  std::optional<Index> recommended_s_value;
  UnlabeledBudget unlabeled_budget;
  DiagnosticsInputs inputs;
  Index n_points = 0;
  Index s_used = 0;  // eigenpairs above the rank tolerance that fed the checks
  std::vector<std::string> notes;
};

// Aggregates every check on one dataset. Eigenfunction-based estimates are
// evaluated at the training points themselves. Requires es.s >= 2.
DiagnosticsReport assumption_report(const GramMatrix& k, const EigenSystem& es,
                                    const KernelSpec& spec, const Dataset& train,
                                    const DiagnosticsInputs& inputs);

// JSON serialization, one field per report member.
std::string report_to_json(const DiagnosticsReport& report);

// CSV rows "index,lambda,envelope" with envelope = a^2 k^(-p), 1-based index.
void write_spectrum_envelope_csv(const Vector& lambdas, const PowerLawFit& fit, std::ostream& out);

}  // namespace sssl
