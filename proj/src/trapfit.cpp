#include "charlab_detail.hpp"
#include "geigerlab/charlab.hpp"
#include "geigerlab/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace geigerlab {

namespace {

struct Data {
  Eigen::ArrayXd lo, hi, width, y, sigma;
  Eigen::Index size() const { return y.size(); }
};

// Bin-averaged component: tau (e^{-lo/tau} - e^{-hi/tau}) / w
Eigen::ArrayXd component(const Data &d, double tau) {
  return tau * ((-d.lo / tau).exp() - (-d.hi / tau).exp()) / d.width;
}

// d/d(ln tau) of tau (e^{-lo/tau} - e^{-hi/tau}), over w
Eigen::ArrayXd component_dlogtau(const Data &d, double tau) {
  const Eigen::ArrayXd el = (-d.lo / tau).exp();
  const Eigen::ArrayXd eh = (-d.hi / tau).exp();
  return (tau * (el - eh) + d.lo * el - d.hi * eh) / d.width;
}

struct Fit {
  Eigen::VectorXd theta; // [ln A_0, ln tau_0, ln A_1, ln tau_1, ...]
  double chi2 = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

Eigen::VectorXd residuals(const Data &d, const Eigen::VectorXd &theta) {
  Eigen::ArrayXd model = Eigen::ArrayXd::Zero(d.size());
  for (Eigen::Index k = 0; k < theta.size() / 2; ++k)
    model += std::exp(theta[2 * k]) * component(d, std::exp(theta[2 * k + 1]));
  return ((model - d.y) / d.sigma).matrix();
}

Eigen::MatrixXd jacobian(const Data &d, const Eigen::VectorXd &theta) {
  Eigen::MatrixXd j(d.size(), theta.size());
  for (Eigen::Index k = 0; k < theta.size() / 2; ++k) {
    const double a = std::exp(theta[2 * k]);
    const double tau = std::exp(theta[2 * k + 1]);
    j.col(2 * k) = (a * component(d, tau) / d.sigma).matrix();
    j.col(2 * k + 1) = (a * component_dlogtau(d, tau) / d.sigma).matrix();
  }
  return j;
}

Fit levenberg_marquardt(const Data &d, Eigen::VectorXd theta) {
  Fit fit;
  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(d, theta);
  double chi2 = r.squaredNorm();
  for (int iter = 0; iter < 500; ++iter) {
    fit.iterations = iter + 1;
    const Eigen::MatrixXd j = jacobian(d, theta);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    bool improved = false;
    while (lambda < 1e14) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd trial = theta + step;
      const Eigen::VectorXd r_trial = residuals(d, trial);
      const double chi2_trial = r_trial.squaredNorm();
      if (std::isfinite(chi2_trial) && chi2_trial < chi2) {
        const double drop = chi2 - chi2_trial;
        theta = trial;
        r = r_trial;
        chi2 = chi2_trial;
        lambda = std::max(lambda / 3, 1e-12);
        improved = true;
        if (drop <= 1e-12 * (1 + chi2) || step.norm() < 1e-10) {
          fit.converged = true;
        }
        break;
      }
      lambda *= 4;
    }
    if (!improved || fit.converged) {
      // no downhill step left: a minimum along every LM direction
      fit.converged = true;
      break;
    }
  }
  fit.theta = theta;
  fit.chi2 = chi2;
  return fit;
}

// Non-negative amplitudes for fixed taus: weighted least squares, negatives floored.
Eigen::VectorXd initial_theta(const Data &d, const std::vector<double> &taus) {
  const auto m = static_cast<Eigen::Index>(taus.size());
  Eigen::MatrixXd basis(d.size(), m);
  for (Eigen::Index k = 0; k < m; ++k)
    basis.col(k) = (component(d, taus[k]) / d.sigma).matrix();
  const Eigen::VectorXd rhs = (d.y / d.sigma).matrix();
  Eigen::VectorXd amp = basis.colPivHouseholderQr().solve(rhs);
  double scale = 0;
  for (Eigen::Index k = 0; k < m; ++k)
    scale = std::max(scale, std::abs(amp[k]));
  if (!(scale > 0) || !std::isfinite(scale))
    scale = 1.0;
  Eigen::VectorXd theta(2 * m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double a = amp[k] > 0 && std::isfinite(amp[k]) ? amp[k] : 1e-3 * scale;
    theta[2 * k] = std::log(a);
    theta[2 * k + 1] = std::log(taus[k]);
  }
  return theta;
}

void combinations(const std::vector<double> &grid, std::size_t order, std::size_t start,
                  std::vector<double> &current, std::vector<std::vector<double>> &out) {
  if (current.size() == order) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = start; i < grid.size(); ++i) {
    current.push_back(grid[i]);
    combinations(grid, order, i + 1, current, out);
    current.pop_back();
  }
}

} // namespace

TrapFit fit_trap_constants(const ExpBinHistogram &hist, std::size_t max_order,
                           const PlateauOptions &plateau) {
  if (max_order < 1 || max_order > 3)
    throw Error("fit_trap_constants: model order must be 1..3");
  const AfterpulseAnalysis a = analyze_afterpulsing(hist, plateau);
  if (!(a.afterpulse_probability > 0) || a.excess.empty())
    throw FitError("fit_trap_constants: no peak");

  const std::size_t tail = final_decade_start(hist);
  const auto it = std::lower_bound(hist.edges.begin(), hist.edges.end(), a.excess.front().lo_s);
  const auto peak = static_cast<std::size_t>(it - hist.edges.begin());
  if (peak >= tail)
    throw FitError("fit_trap_constants: no peak before the plateau");

  const double n = static_cast<double>(hist.n_triggers);
  const auto count = static_cast<Eigen::Index>(tail - peak);
  Data d;
  d.lo.resize(count);
  d.hi.resize(count);
  d.width.resize(count);
  d.y.resize(count);
  d.sigma.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const std::size_t b = peak + static_cast<std::size_t>(i);
    d.lo[i] = hist.lo(b);
    d.hi[i] = hist.hi(b);
    d.width[i] = hist.width(b);
    d.y[i] = hist.rate(b) - a.background_rate_hz;
    d.sigma[i] = std::sqrt(std::max(static_cast<double>(hist.counts[b]), 1.0)) / (n * d.width[i]);
  }

  const double t_first = std::max(hist.lo(peak), hist.width(peak));
  const double t_last = hist.lo(tail);
  std::vector<double> grid;
  constexpr int kGrid = 8;
  for (int g = 0; g < kGrid; ++g)
    grid.push_back(t_first * std::pow(t_last / t_first, (g + 0.5) / kGrid));

  std::ostringstream diag;
  TrapFit best;
  best.aicc = std::numeric_limits<double>::infinity();
  for (std::size_t order = 1; order <= max_order; ++order) {
    const double k = 2.0 * static_cast<double>(order);
    const double dof = static_cast<double>(count) - k - 1.0;
    if (dof <= 0) {
      diag << " order " << order << ": too few points (" << count << ");";
      continue;
    }
    std::vector<std::vector<double>> starts;
    std::vector<double> current;
    combinations(grid, order, 0, current, starts);
    Fit order_best;
    int failures = 0;
    for (const auto &taus : starts) {
      Fit f = levenberg_marquardt(d, initial_theta(d, taus));
      if (!f.converged || !f.theta.allFinite()) {
        ++failures;
        continue;
      }
      if (f.chi2 < order_best.chi2)
        order_best = f;
    }
    if (!std::isfinite(order_best.chi2)) {
      diag << " order " << order << ": " << failures << " starts did not converge;";
      continue;
    }
    const double aicc = order_best.chi2 + 2 * k + 2 * k * (k + 1) / dof;
    diag << " order " << order << ": chi2=" << order_best.chi2 << " aicc=" << aicc << ';';
    if (aicc < best.aicc) {
      best = {};
      best.order = order;
      best.chi2 = order_best.chi2;
      best.aicc = aicc;
      best.points = static_cast<std::size_t>(count);
      std::vector<std::pair<double, double>> comps;
      for (std::size_t c = 0; c < order; ++c)
        comps.emplace_back(std::exp(order_best.theta[2 * c + 1]),
                           std::exp(order_best.theta[2 * c]));
      std::sort(comps.begin(), comps.end());
      for (const auto &[tau, amp] : comps) {
        best.taus_s.push_back(tau);
        best.amplitudes_hz.push_back(amp);
      }
    }
  }
  if (best.order == 0)
    throw FitError("fit_trap_constants: no model order converged;" + diag.str());
  return best;
}

} // namespace geigerlab
