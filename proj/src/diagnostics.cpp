#include "sssl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sssl {
namespace {

// Distribution-normalized eigenfunction values at the eval points:
// column i holds phi_i(x) / sqrt(lambda_i).
Matrix normalized_feature_matrix(const EigenSystem& es, const KernelSpec& spec,
                                 const Dataset& train, const Dataset& eval_points, Index s) {
  if (s < 1 || s > es.s) throw std::invalid_argument("normalized features: bad s");
  for (Index i = 0; i < s; ++i) {
    if (!es.usable(i)) {
      throw std::domain_error("eigenpair " + std::to_string(i) +
                              " is below the rank tolerance; estimate undefined");
    }
  }
  Matrix block = kernel_block(spec, eval_points, train);  // m x N
  Vector scale(s);
  for (Index i = 0; i < s; ++i) {
    scale(i) = 1.0 / (std::sqrt(es.sigmas(i)) * std::sqrt(es.lambdas(i)));
  }
  return block * es.vectors.leftCols(s) * scale.asDiagonal();
}

}  // namespace

PowerLawFit fit_power_law(const Vector& lambdas) {
  if (lambdas.size() < 1) throw std::invalid_argument("fit_power_law: empty spectrum");
  const double lead = lambdas(0);
  const double floor = 1e-12 * lead;

  Index count = 0;
  while (count < lambdas.size() && lambdas(count) > floor && lambdas(count) > 0.0) ++count;
  if (count < 3) {
    throw std::invalid_argument("fit_power_law: needs at least 3 strictly positive eigenvalues");
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (Index k = 0; k < count; ++k) {
    const double lx = std::log(static_cast<double>(k + 1));
    const double ly = std::log(lambdas(k));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(count);
  const double denom = sxx - sx * sx / n;
  const double slope = denom > 0.0 ? (sxy - sx * sy / n) / denom : 0.0;

  PowerLawFit fit;
  fit.p = -slope;
  fit.k_begin = 1;
  fit.k_end = count;

  // Calibrate a^2 upward until a^2 k^(-p) dominates the fitted range.
  double a2 = 0.0;
  for (Index k = 0; k < count; ++k) {
    a2 = std::max(a2, lambdas(k) * std::pow(static_cast<double>(k + 1), fit.p));
  }
  fit.a = std::sqrt(a2);

  double violation = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < count; ++k) {
    violation = std::max(violation, lambdas(k) - a2 * std::pow(static_cast<double>(k + 1), -fit.p));
  }
  fit.max_violation = violation;
  return fit;
}

double c_hat_estimate(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
                      const Dataset& eval_points) {
  const Matrix f = normalized_feature_matrix(es, spec, train, eval_points, es.s);
  return f.cwiseAbs().maxCoeff();
}

double m_of_s(const EigenSystem& es, const KernelSpec& spec, const Dataset& train,
              const Dataset& eval_points, Index s) {
  const Matrix f = normalized_feature_matrix(es, spec, train, eval_points, s);
  return f.array().square().rowwise().sum().maxCoeff();
}

double eigengap(const Vector& lambdas, Index s) {
  if (s < 1) throw std::invalid_argument("eigengap: s must be >= 1");
  if (s + 1 > lambdas.size()) {
    throw std::invalid_argument("eigengap: needs lambda_{s+1}; only " +
                                std::to_string(lambdas.size()) + " eigenvalues available");
  }
  return lambdas(s - 1) - lambdas(s);
}

double tau_n(double n_unlabeled) {
  if (!(n_unlabeled >= 2.0)) throw std::invalid_argument("tau_n: N must be >= 2");
  return 12.0 * std::log(n_unlabeled) / std::sqrt(n_unlabeled);
}

double required_labels(double c, double n_unlabeled, double r, double a, double eps, double p) {
  if (!(c > 0.0) || !(n_unlabeled > 0.0) || !(r > 0.0) || !(a > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("required_labels: all inputs must be positive");
  }
  if (!(p > 1.0)) {
    throw std::invalid_argument("required_labels: p must exceed 1 (exponent undefined)");
  }
  const double log_term = std::log(2.0 * std::pow(n_unlabeled, 3.0));
  return 64.0 * c * c * log_term * log_term * std::pow(r * a / eps, 4.0 / (p - 1.0));
}

Index recommended_s(double a, double r, double eps, double p) {
  if (!(a > 0.0) || !(r > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("recommended_s: a, R, eps must be positive");
  }
  if (!(p > 1.0)) throw std::invalid_argument("recommended_s: p must exceed 1");
  const double raw = std::pow(a * r / eps, 2.0 / (p - 1.0));
  return std::max<Index>(1, static_cast<Index>(std::ceil(raw)));
}

UnlabeledBudget unlabeled_budget(double n_unlabeled, double r, double a, double eps, double r_s) {
  if (!(n_unlabeled > 0.0) || !(r > 0.0) || !(a > 0.0) || !(eps > 0.0) || r_s < 0.0) {
    throw std::invalid_argument("unlabeled_budget: inputs must be positive (r_s >= 0)");
  }
  UnlabeledBudget out;
  const double log_n = std::log(n_unlabeled);
  const double second = 144.0 * std::pow(r, 4.0) * a * a * log_n * log_n / std::pow(eps, 4.0);
  if (r_s == 0.0) {
    out.ok = false;
    out.required_n = std::numeric_limits<double>::infinity();
    out.reason = "eigengap r_s is zero, so the first budget term is unbounded";
    return out;
  }
  const double first = 144.0 * r * r * log_n * log_n / (r_s * r_s * eps * eps);
  out.required_n = std::max(first, second);
  out.ok = n_unlabeled >= out.required_n;
  if (!out.ok) {
    out.reason = "N below the required unlabeled budget";
  }
  return out;
}

bool unlabeled_budget_ok(double n_unlabeled, double r, double a, double eps, double r_s) {
  return unlabeled_budget(n_unlabeled, r, a, eps, r_s).ok;
}

DiagnosticsReport assumption_report(const GramMatrix& k, const EigenSystem& es,
                                    const KernelSpec& spec, const Dataset& train,
                                    const DiagnosticsInputs& inputs) {
  if (es.s < 2) throw std::invalid_argument("assumption_report: needs at least 2 eigenpairs");
  if (train.size() != es.n_points || k.n_points() != es.n_points) {
    throw std::invalid_argument("assumption_report: mismatched inputs");
  }

  DiagnosticsReport rep;
  rep.inputs = inputs;
  rep.n_points = es.n_points;
  rep.s_used = std::max<Index>(es.numerical_rank, 0);
  if (rep.s_used < 2) {
    throw std::invalid_argument("assumption_report: numerical rank below 2");
  }
  if (inputs.defaults_used) {
    rep.notes.push_back("R and eps were NOT supplied; defaults R=1, eps=0.1 are placeholders "
                        "for quantities that depend on the unknown target function");
  }

  rep.power_law = fit_power_law(es.lambdas);
  rep.power_law_ok = rep.power_law.p > 2.0;
  if (!rep.power_law_ok) {
    rep.notes.push_back("fitted power index p <= 2: the skewed-spectrum assumption fails");
  }

  // Eigenfunction-based estimates use the empirical eigenpairs evaluated at
  // the training points; population quantities are not observable.
  EigenSystem usable = es;
  if (es.numerical_rank < es.s) {
    usable.sigmas = es.sigmas.head(es.numerical_rank);
    usable.vectors = es.vectors.leftCols(es.numerical_rank);
    usable.lambdas = es.lambdas.head(es.numerical_rank);
    usable.s = es.numerical_rank;
  }
  rep.c_hat = c_hat_estimate(usable, spec, train, train);

  const double n_real = static_cast<double>(es.n_points);
  rep.tau = tau_n(n_real);
  rep.eigengap_threshold = 3.0 * std::pow(rep.tau, 2.0 / 3.0);

  if (rep.power_law.p > 1.0) {
    rep.recommended_s_value = recommended_s(rep.power_law.a, inputs.r, inputs.eps, rep.power_law.p);
    rep.n0 = required_labels(rep.c_hat, n_real, inputs.r, rep.power_law.a, inputs.eps,
                             rep.power_law.p);
  } else {
    rep.notes.push_back("fitted p <= 1: n0 and the recommended s are undefined");
  }

  Index gap_s = rep.recommended_s_value.value_or(1);
  if (gap_s + 1 > usable.s) {
    gap_s = usable.s - 1;
    rep.eigengap_capped = true;
    rep.notes.push_back("recommended s exceeds the computed spectrum; eigengap evaluated at the "
                        "largest available s");
  }
  rep.eigengap_s = gap_s;
  rep.r_s = eigengap(usable.lambdas, gap_s);
  rep.eigengap_ok = rep.r_s >= rep.eigengap_threshold;

  rep.m_s_at = std::min<Index>(rep.recommended_s_value.value_or(usable.s), usable.s);
  rep.m_s = m_of_s(usable, spec, train, train, rep.m_s_at);

  rep.unlabeled_budget = unlabeled_budget(n_real, inputs.r, rep.power_law.a, inputs.eps, rep.r_s);
  return rep;
}

std::string report_to_json(const DiagnosticsReport& rep) {
  nlohmann::json j;
  j["power_law"] = {{"a", rep.power_law.a},
                    {"a_squared", rep.power_law.a_squared()},
                    {"p", rep.power_law.p},
                    {"max_violation", rep.power_law.max_violation},
                    {"fitted_range", {rep.power_law.k_begin, rep.power_law.k_end}},
                    {"p_exceeds_2", rep.power_law_ok}};
  j["c_hat"] = rep.c_hat;
  j["m_of_s"] = {{"value", rep.m_s}, {"s", rep.m_s_at}};
  j["eigengap"] = {{"r_s", rep.r_s},
                   {"s", rep.eigengap_s},
                   {"capped", rep.eigengap_capped},
                   {"tau_n", rep.tau},
                   {"threshold", rep.eigengap_threshold},
                   {"ok", rep.eigengap_ok}};
  if (rep.n0) {
    j["n0"] = *rep.n0;
  } else {
    j["n0"] = nullptr;
  }
  if (rep.recommended_s_value) {
    j["recommended_s"] = *rep.recommended_s_value;
  } else {
    j["recommended_s"] = nullptr;
  }
  j["unlabeled_budget"] = {{"ok", rep.unlabeled_budget.ok},
                          {"required_n", std::isfinite(rep.unlabeled_budget.required_n)
                                             ? nlohmann::json(rep.unlabeled_budget.required_n)
                                             : nlohmann::json("inf")},
                          {"reason", rep.unlabeled_budget.reason}};
  j["inputs"] = {{"R", rep.inputs.r},
                 {"eps", rep.inputs.eps},
                 {"N", rep.n_points},
                 {"n", rep.inputs.n_labeled},
                 {"s", rep.s_used}};
  j["eval_points"] = "train";
  j["notes"] = rep.notes;
  return j.dump(2);
}

void write_spectrum_envelope_csv(const Vector& lambdas, const PowerLawFit& fit,
                                 std::ostream& out) {
  out << "index,lambda,envelope\n";
  char buf[96];
  const double a2 = fit.a_squared();
  for (Index k = 0; k < lambdas.size(); ++k) {
    const double envelope = a2 * std::pow(static_cast<double>(k + 1), -fit.p);
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(k + 1),
                  lambdas(k), envelope);
    out << buf;
  }
}

}  // namespace sssl
