#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code paths: the forward pass is re-derived
// from the model equations in long double, ranks are counted by brute force,
// and ridge regression goes through Eigen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "imaginet/model.hpp"

namespace oracle {

using LD = long double;
using LVec = std::vector<LD>;

inline LVec mv(const imaginet::Matrix& m, const LVec& x) {
  LVec y(m.rows(), 0.0L);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) y[i] += static_cast<LD>(m(i, j)) * x[j];
  return y;
}

inline LD steep(LD z) { return 1.0L / (1.0L + std::exp(-3.75L * z)); }
inline LD clip(LD z) { return std::min(std::max(z, 0.0L), 5.0L); }

struct Pathway {
  std::vector<LVec> states;
};

inline Pathway run_gru(const imaginet::GruParams& g, const std::vector<LVec>& xs) {
  const std::size_t H = g.W.rows();
  Pathway out;
  LVec h(H, 0.0L);
  for (const LVec& x : xs) {
    const LVec az = mv(g.Wz, x), bz = mv(g.Uz, h);
    const LVec ar = mv(g.Wr, x), br = mv(g.Ur, h);
    LVec z(H), r(H), rh(H);
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = steep(az[i] + bz[i]);
      r[i] = steep(ar[i] + br[i]);
      rh[i] = r[i] * h[i];
    }
    const LVec ac = mv(g.W, x), bc = mv(g.U, rh);
    LVec next(H);
    for (std::size_t i = 0; i < H; ++i) next[i] = (1.0L - z[i]) * h[i] + z[i] * clip(ac[i] + bc[i]);
    h = next;
    out.states.push_back(h);
  }
  return out;
}

struct Loss {
  LD total, textual, visual;
};

/// Composite loss evaluated from scratch in extended precision.
inline Loss composite_loss(const imaginet::ImaginetParams& p, std::span<const std::size_t> s,
                           const imaginet::Vector& target, LD alpha) {
  std::vector<LVec> xs;
  for (std::size_t t : s) {
    LVec x(p.We.rows());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = p.We(i, t);
    xs.push_back(x);
  }
  const Pathway vis = run_gru(p.gru_visual, xs);
  const Pathway txt = run_gru(p.gru_textual, xs);

  const LVec pre = mv(p.V, vis.states.back());
  LD lv = 0.0L;
  for (std::size_t k = 0; k < pre.size(); ++k) {
    const LD d = clip(pre[k]) - static_cast<LD>(target[k]);
    lv += d * d;
  }
  lv /= static_cast<LD>(pre.size());

  LD lt = 0.0L;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) {
    const LVec logits = mv(p.L, txt.states[t]);
    const LD m = *std::max_element(logits.begin(), logits.end());
    LD z = 0.0L;
    for (LD l : logits) z += std::exp(l - m);
    lt -= (logits[s[t + 1]] - m) - std::log(z);
  }
  lt /= static_cast<LD>(s.size());
  return {alpha * lt + (1.0L - alpha) * lv, lt, lv};
}

/// Central difference of `composite_loss` along one coordinate, with the
/// difference taken in long double so rounding stays far below the step.
inline double central_difference(imaginet::ImaginetParams& p, imaginet::Matrix& tensor,
                                 std::size_t idx, std::span<const std::size_t> s,
                                 const imaginet::Vector& target, LD alpha, double eps) {
  const double saved = tensor.span()[idx];
  tensor.span()[idx] = saved + eps;
  const LD up = composite_loss(p, s, target, alpha).total;
  tensor.span()[idx] = saved - eps;
  const LD down = composite_loss(p, s, target, alpha).total;
  tensor.span()[idx] = saved;
  return static_cast<double>((up - down) / (2.0L * static_cast<LD>(eps)));
}

/// Fractional ranks by counting: 1 + (#smaller) + (#equal others) / 2.
inline std::vector<LD> counted_ranks(std::span<const double> xs) {
  std::vector<LD> r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (xs[j] < xs[i]) ++less;
      else if (j != i && xs[j] == xs[i]) ++equal;
    }
    r[i] = 1.0L + static_cast<LD>(less) + static_cast<LD>(equal) / 2.0L;
  }
  return r;
}

inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = counted_ranks(xs), ry = counted_ranks(ys);
  const LD n = static_cast<LD>(xs.size());
  LD mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  LD sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline LD cosine(const imaginet::Vector& a, const imaginet::Vector& b) {
  LD ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    ab += static_cast<LD>(a[i]) * b[i];
    aa += static_cast<LD>(a[i]) * a[i];
    bb += static_cast<LD>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Full ordering of candidate indices by (descending similarity, ascending
/// index), built by sorting explicit pairs.
inline std::vector<std::size_t> full_order(std::span<const double> sims) {
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t j = 0; j < sims.size(); ++j) keyed.emplace_back(-sims[j], j);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (const auto& kv : keyed) out.push_back(kv.second);
  return out;
}

/// Ridge solution [A | b] through Eigen on the augmented design.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> ridge(const imaginet::Matrix& X,
                                                         const imaginet::Matrix& Y,
                                                         double lambda) {
  const Eigen::Index n = static_cast<Eigen::Index>(X.rows());
  const Eigen::Index d = static_cast<Eigen::Index>(X.cols());
  const Eigen::Index K = static_cast<Eigen::Index>(Y.cols());
  Eigen::MatrixXd Z(n, d + 1), T(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) Z(i, j) = X(i, j);
    Z(i, d) = 1.0;
    for (Eigen::Index k = 0; k < K; ++k) T(i, k) = Y(i, k);
  }
  Eigen::MatrixXd G = Z.transpose() * Z;
  for (Eigen::Index j = 0; j < d; ++j) G(j, j) += lambda;
  const Eigen::MatrixXd W = G.colPivHouseholderQr().solve(Z.transpose() * T);  // (d+1) × K
  Eigen::MatrixXd A = W.topRows(d).transpose();
  Eigen::VectorXd b = W.row(d).transpose();
  return {A, b};
}

}  // namespace oracle
