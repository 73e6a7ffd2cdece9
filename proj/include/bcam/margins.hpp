#pragma once

// Parametric continuous margins in the (mu, sigma, nu) parameterisation:
// cdf, log-density, quantile, moments, parameter links, and derivatives of
// F and log f with respect to the distribution parameters.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcam/rng.hpp"

namespace bcam {

enum class MarginFamily { BE, DAGUM, GA, GU, iG, LN, LO, N, rGU, SM, WEI };

enum class LinkKind { identity, log_shifted, logistic };

struct MarginParams {
  double mu = 0.0;
  double sigma = 1.0;
  double nu = 1.0;  // ignored by two-parameter families

  double operator[](int i) const { return i == 0 ? mu : i == 1 ? sigma : nu; }
  double& operator[](int i) { return i == 0 ? mu : i == 1 ? sigma : nu; }
};

int n_params(MarginFamily f);
std::string margin_tag(MarginFamily f);
/// Parses "BE", "DAGUM", ..., "WEI"; throws InputError listing valid tags.
MarginFamily margin_from_tag(std::string_view tag);
const std::vector<MarginFamily>& all_margins();

/// Link used for parameter `which` (0 = mu, 1 = sigma, 2 = nu).
LinkKind param_link(MarginFamily f, int which);

/// param = g^{-1}(eta).
double link_apply(LinkKind k, double eta);
/// eta = g(param).
double link_inverse(LinkKind k, double param);
/// d param / d eta.
double link_deriv(LinkKind k, double eta);

bool in_support(MarginFamily f, double y);
/// Throws DomainError describing the violated range.
void check_params(MarginFamily f, const MarginParams& p);
void check_support(MarginFamily f, double y);

double margin_cdf(MarginFamily f, double y, const MarginParams& p);
double margin_logpdf(MarginFamily f, double y, const MarginParams& p);
double margin_pdf(MarginFamily f, double y, const MarginParams& p);
double margin_quantile(MarginFamily f, double prob, const MarginParams& p);

struct Moments {
  std::optional<double> mean;
  std::optional<double> variance;
};

/// Mean and variance; std::nullopt where they do not exist.
Moments margin_moments(MarginFamily f, const MarginParams& p);

struct MarginDerivs {
  double cdf = 0.0;
  double logpdf = 0.0;
  std::array<double, 3> dcdf{};     // dF / d(mu, sigma, nu)
  std::array<double, 3> dlogpdf{};  // d log f / d(mu, sigma, nu)
};

/// Derivatives of F and log f (checked).
MarginDerivs margin_derivs(MarginFamily f, double y, const MarginParams& p);
std::array<double, 3> margin_cdf_derivs(MarginFamily f, double y, const MarginParams& p);
std::array<double, 3> margin_logpdf_derivs(MarginFamily f, double y, const MarginParams& p);

/// Unchecked fast path used inside the likelihood.
MarginDerivs margin_derivs_unchecked(MarginFamily f, double y, const MarginParams& p);

/// Inverse-cdf sampling.
std::vector<double> margin_sample(MarginFamily f, const MarginParams& p, std::size_t n, Rng& rng);

}  // namespace bcam
