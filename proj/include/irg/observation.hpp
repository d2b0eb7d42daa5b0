#pragma once

// Per-class alert-count observation model. All nodes share the same three
// conditional rows Z(o | attacker class). The bundled synthetic model uses
// truncated negative-binomial counts with a shared dispersion and a
// class-increasing mean, which keeps the rows totally positive of order 2
// (and hence monotone in likelihood ratio) after truncation.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "irg/infrastructure.hpp"
#include "irg/rng.hpp"

namespace irg {

class ObservationModel {
 public:
  static constexpr int kClasses = 3;

  ObservationModel() = default;

  static ObservationModel from_rows(const std::array<std::vector<double>, 3>& rows) {
    ObservationModel m;
    if (rows[0].empty() || rows[1].size() != rows[0].size() ||
        rows[2].size() != rows[0].size())
      throw std::invalid_argument("observation rows must be nonempty and equal length");
    m.rows_ = rows;
    for (auto& row : m.rows_) {
      double total = 0.0;
      for (double v : row) {
        if (v < 0.0) throw std::invalid_argument("observation probabilities must be nonnegative");
        total += v;
      }
      if (total <= 0.0) throw std::invalid_argument("observation row sums to zero");
      for (double& v : row) v /= total;
    }
    m.build_cdf();
    return m;
  }

  static ObservationModel synthetic_negbin(int n_obs, double dispersion,
                                           const std::array<double, 3>& mean) {
    if (n_obs < 2) throw std::invalid_argument("need at least two observations");
    if (dispersion <= 0.0) throw std::invalid_argument("dispersion must be positive");
    std::array<std::vector<double>, 3> rows;
    for (int cls = 0; cls < kClasses; ++cls) {
      if (mean[cls] <= 0.0) throw std::invalid_argument("negbin means must be positive");
      rows[cls] = negbin_row(n_obs, dispersion, mean[cls]);
    }
    return from_rows(rows);
  }

  static ObservationModel from_config(const GameConfig& cfg) {
    const auto& spec = cfg.obs_model;
    if (spec.kind == ObsModelSpec::Kind::synthetic)
      return synthetic_negbin(cfg.obs_space_size, spec.dispersion, spec.mean);
    throw std::invalid_argument(
        "empirical observation model must be loaded through the identification "
        "pipeline (see load_empirical_model)");
  }

  int n_obs() const { return static_cast<int>(rows_[0].size()); }

  const std::vector<double>& row(int cls) const { return rows_.at(cls); }

  double likelihood(int cls, int obs) const { return rows_.at(cls).at(obs); }

  int sample(int cls, Rng& rng) const {
    const auto& cdf = cdf_.at(cls);
    double u = rng.uniform();
    // first index whose cumulative mass exceeds u
    int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (cdf[mid] > u) hi = mid;
      else lo = mid + 1;
    }
    return lo;
  }

 private:
  static std::vector<double> negbin_row(int n_obs, double r, double m) {
    // success probability from the mean: m = r(1-p)/p
    double p = r / (r + m);
    std::vector<double> row(n_obs);
    double base = std::lgamma(r);
    for (int k = 0; k < n_obs; ++k) {
      double lp = std::lgamma(k + r) - base - std::lgamma(k + 1.0) +
                  r * std::log(p) + k * std::log1p(-p);
      row[k] = std::exp(lp);
    }
    return row;  // from_rows renormalizes over the truncated support
  }

  void build_cdf() {
    for (int cls = 0; cls < kClasses; ++cls) {
      cdf_[cls].resize(rows_[cls].size());
      double acc = 0.0;
      for (std::size_t k = 0; k < rows_[cls].size(); ++k) {
        acc += rows_[cls][k];
        cdf_[cls][k] = acc;
      }
      cdf_[cls].back() = 1.0;  // guard against rounding at the top end
    }
  }

  std::array<std::vector<double>, 3> rows_;
  std::array<std::vector<double>, 3> cdf_;
};

}  // namespace irg
