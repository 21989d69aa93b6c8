#pragma once

// Reference computations used by the tests. They share no code with the
// library and evaluate in 50-digit floating point where precision matters.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

inline Big big_log(const Big& x) { return boost::multiprecision::log(x); }

// D_JS with natural log from the entropy identity H(M) - (H(P) + H(Q))/2.
inline double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  auto h = [](const std::vector<Big>& d) {
    Big s = 0;
    for (const auto& x : d)
      if (x > 0) s -= x * big_log(x);
    return s;
  };
  std::vector<Big> bp, bq, bm;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bp.emplace_back(p[i]);
    bq.emplace_back(q[i]);
    bm.push_back((Big(p[i]) + Big(q[i])) / 2);
  }
  const Big d = h(bm) - (h(bp) + h(bq)) / 2;
  return static_cast<double>(d);
}

struct LrRho {
  double lr;
  double rho;
};

inline LrRho schedule(int e, int t, double l, double alpha, double beta, double gamma) {
  if (e <= 50) return {l, 0.0};
  const Big p = Big(e - 50) / Big(t);
  const Big lr = Big(l) / boost::multiprecision::pow(Big(1) + Big(alpha) * p, Big(beta));
  const Big rho = Big(2) / (Big(1) + boost::multiprecision::exp(-Big(gamma) * p)) - Big(1);
  return {static_cast<double>(lr), static_cast<double>(rho)};
}

// Homogeneity and completeness through the mutual information:
// h = I(C;K)/H(C), c = I(C;K)/H(K).
struct HC {
  double homogeneity;
  double completeness;
};

inline HC homogeneity_completeness(const std::vector<int>& classes, const std::vector<int>& clusters) {
  const Big n = static_cast<double>(classes.size());
  std::map<int, Big> pc, pk;
  std::map<std::pair<int, int>, Big> joint;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    pc[classes[i]] += 1;
    pk[clusters[i]] += 1;
    joint[{classes[i], clusters[i]}] += 1;
  }
  Big hc = 0, hk = 0, mi = 0;
  for (auto& [c, v] : pc) hc -= (v / n) * big_log(v / n);
  for (auto& [k, v] : pk) hk -= (v / n) * big_log(v / n);
  for (auto& [ck, v] : joint) {
    const Big pj = v / n;
    mi += pj * big_log(pj / ((pc[ck.first] / n) * (pk[ck.second] / n)));
  }
  HC r{1.0, 1.0};
  if (hc > 0) r.homogeneity = static_cast<double>(mi / hc);
  if (hk > 0) r.completeness = static_cast<double>(mi / hk);
  return r;
}

// Per-class F1 by direct counting; classes are 0 (con), 1 (neutral), 2 (pro).
inline double f1_for(const std::vector<int>& pred, const std::vector<int>& gold, int cls) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == cls && gold[i] == cls) tp += 1;
    else if (pred[i] == cls) fp += 1;
    else if (gold[i] == cls) fn += 1;
  }
  if (tp == 0) return 0.0;
  return 2 * tp / (2 * tp + fp + fn);
}

struct Trial {
  double stance;
  double disc;
};

// Brute-force selection: average ranks by pairwise counting over the
// surviving trials, then (mean rank, -stance, index) lexicographic minimum.
struct RankOutcome {
  std::optional<std::size_t> best;
  std::vector<double> mean_rank;  // -1 for excluded
  std::vector<bool> excluded;
};

inline RankOutcome select(const std::vector<Trial>& trials) {
  RankOutcome out;
  out.mean_rank.assign(trials.size(), -1.0);
  out.excluded.assign(trials.size(), false);
  for (std::size_t i = 0; i < trials.size(); ++i) out.excluded[i] = trials[i].disc < 0.01;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (out.excluded[i]) continue;
    double s_rank = 1, d_rank = 1;
    for (std::size_t j = 0; j < trials.size(); ++j) {
      if (j == i || out.excluded[j]) continue;
      if (trials[j].stance > trials[i].stance) s_rank += 1;
      else if (trials[j].stance == trials[i].stance) s_rank += 0.5;
      if (trials[j].disc < trials[i].disc) d_rank += 1;
      else if (trials[j].disc == trials[i].disc) d_rank += 0.5;
    }
    out.mean_rank[i] = (s_rank + d_rank) / 2;
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (out.excluded[i]) continue;
    if (!out.best) {
      out.best = i;
      continue;
    }
    const auto b = *out.best;
    const auto key_i = std::make_tuple(out.mean_rank[i], -trials[i].stance, i);
    const auto key_b = std::make_tuple(out.mean_rank[b], -trials[b].stance, b);
    if (key_i < key_b) out.best = i;
  }
  return out;
}

}  // namespace oracle
