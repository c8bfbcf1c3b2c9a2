#ifndef MRSUR_CRITERIA_HPP
#define MRSUR_CRITERIA_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

#include "mrsur/errors.hpp"
#include "mrsur/gp_core.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/point.hpp"
#include "mrsur/special_fn.hpp"

// Closed-form batch SUR criterion for excursion-probability estimation with
// Gaussian observation noise, and the gain-per-cost (MR-SUR) selection rule.
//
// With a_n(x) = (m_n(x) - z_crit)/sqrt(v_n(x)), v_n = k_n(x,x) + lambda(x),
// r_n = k_n(x,x)/v_n and rt_n(x; batch) = nu_n(x,x; batch)/v_n(x):
//
//   H_n        = int [Phi2(a_n, a_n; r_n) - Phi(a_n)^2] dmu
//   J_n(batch) = int [Phi2(a_n, a_n; r_n) - Phi2(a_n, a_n; rt_n)] dmu
//   G_n(batch) = H_n - J_n(batch)
//
// nu_n(x, x'; batch) = k_n(batch, x)' K_n(batch,batch)^{-1} k_n(batch, x') is
// the covariance reduction produced by conditioning on the batch, where
// K_n(batch,batch) adds lambda on the diagonal.

namespace mrsur {

// Weighted nodes representing the measure mu.
struct IntegrationNodes {
  std::vector<Point> nodes;
  Eigen::VectorXd weights;  // nonnegative, typically 1/N each
};

struct CandidateBatch {
  std::vector<Point> points;  // q >= 1 points, one common fidelity level
  double cost = 1.0;
};

// Posterior mean of the exceedance probability Q(x) = P(Z_x > z_crit),
// i.e. Phi(a_n(x)).
inline double excursion_prob(const PosteriorState& st, const NoiseModel& nm,
                             double z_crit, const Point& x) {
  const QueryCache q = st.query(x);
  const double v = st.var(q) + noise_at(nm, x);
  if (v <= 0.0) throw DegenerateVariance("excursion_prob: k_n(x,x) + lambda(x) <= 0");
  return normal_cdf((st.mean(q) - z_crit) / std::sqrt(v));
}

// Precomputes the per-node posterior quantities shared by H_n and every
// candidate evaluation; queries against one fitted state are read-only, so a
// single evaluator may be used from several threads.
class CriterionEvaluator {
 public:
  CriterionEvaluator(const PosteriorState& st, const NoiseModel& nm, double z_crit,
                     IntegrationNodes mu)
      : st_(&st), nm_(&nm), z_crit_(z_crit), mu_(std::move(mu)) {
    const int N = static_cast<int>(mu_.nodes.size());
    qc_.reserve(N);
    a_.resize(N);
    v_.resize(N);
    r_.resize(N);
    phi2_r_.resize(N);
    phi_sq_.resize(N);
    H_ = 0.0;
    for (int i = 0; i < N; ++i) {
      qc_.push_back(st.query(mu_.nodes[i]));
      const double kxx = st.var(qc_[i]);
      const double lam = noise_at(nm, mu_.nodes[i]);
      const double v = kxx + lam;
      if (v <= 0.0) {
        throw DegenerateVariance("uncertainty_H: k_n(x,x) + lambda(x) <= 0 at a node");
      }
      a_[i] = (st.mean(qc_[i]) - z_crit) / std::sqrt(v);
      v_[i] = v;
      r_[i] = std::clamp(kxx / v, 0.0, 1.0);
      const double p = normal_cdf(a_[i]);
      phi2_r_[i] = bvn_cdf(a_[i], a_[i], r_[i]);
      phi_sq_[i] = p * p;
      H_ += mu_.weights[i] * (phi2_r_[i] - phi_sq_[i]);
    }
  }

  double H() const { return H_; }
  const IntegrationNodes& nodes() const { return mu_; }
  const PosteriorState& state() const { return *st_; }

  // Posterior excursion-probability estimate Phi(a_n) at every node.
  Eigen::VectorXd node_excursion_probs() const {
    Eigen::VectorXd p(a_.size());
    for (Eigen::Index i = 0; i < a_.size(); ++i) p[i] = normal_cdf(a_[i]);
    return p;
  }

  // Factorized batch covariance K_n(batch, batch) + diag(lambda) + jitter.
  struct BatchSolve {
    std::vector<QueryCache> qc;
    Eigen::MatrixXd L;
  };

  BatchSolve factor_batch(std::vector<QueryCache> batch_qc) const {
    const int q = static_cast<int>(batch_qc.size());
    BatchSolve bs;
    bs.qc = std::move(batch_qc);
    Eigen::MatrixXd K(q, q);
    for (int l = 0; l < q; ++l) {
      for (int m = 0; m <= l; ++m) {
        const double v = st_->cov(bs.qc[l], bs.qc[m]);
        K(l, m) = v;
        K(m, l) = v;
      }
      K(l, l) = st_->var(bs.qc[l]) + noise_at(*nm_, bs.qc[l].x);
    }
    const double mdiag = std::max(K.diagonal().mean(), 1e-300);
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    double jitter = 1e-12 * mdiag;
    while (llt.info() != Eigen::Success) {
      if (jitter > 1e-4 * mdiag) {
        throw SingularBatch("sur_J: batch covariance not invertible after jitter escalation");
      }
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      llt.compute(Kj);
      jitter *= 10.0;
    }
    bs.L = llt.matrixL();
    return bs;
  }

  QueryCache query(const Point& p) const { return st_->query(p); }

  // (J_n, G_n) for a batch of candidate points.
  std::pair<double, double> JG(const std::vector<Point>& batch) const {
    std::vector<QueryCache> qc;
    qc.reserve(batch.size());
    for (const Point& p : batch) qc.push_back(st_->query(p));
    return JG(std::move(qc));
  }

  // Same, with the per-point solves already done; lets greedy batch searches
  // reuse the member caches across trial extensions.
  std::pair<double, double> JG(std::vector<QueryCache> batch_qc) const {
    const BatchSolve bs = factor_batch(std::move(batch_qc));
    const int q = static_cast<int>(bs.qc.size());
    const int N = static_cast<int>(mu_.nodes.size());
    double J = 0.0, G = 0.0;
    Eigen::VectorXd c(q);
    for (int i = 0; i < N; ++i) {
      for (int l = 0; l < q; ++l) c[l] = st_->cov(bs.qc[l], qc_[i]);
      const Eigen::VectorXd t = bs.L.triangularView<Eigen::Lower>().solve(c);
      const double nu = t.squaredNorm();
      // nu <= k_n(x,x) in exact arithmetic; clamp against roundoff.
      const double rt = std::clamp(nu / v_[i], 0.0, r_[i]);
      const double phi2_rt = bvn_cdf(a_[i], a_[i], rt);
      J += mu_.weights[i] * (phi2_r_[i] - phi2_rt);
      G += mu_.weights[i] * (phi2_rt - phi_sq_[i]);
    }
    return {J, G};
  }

  // nu_n(x, y; batch): the posterior-covariance reduction at (x, y) from
  // conditioning on the batch.
  double nu_reduction(const std::vector<Point>& batch, const Point& x,
                      const Point& y) const {
    std::vector<QueryCache> qc;
    qc.reserve(batch.size());
    for (const Point& p : batch) qc.push_back(st_->query(p));
    const BatchSolve bs = factor_batch(std::move(qc));
    const int q = static_cast<int>(batch.size());
    const QueryCache qx = st_->query(x);
    const QueryCache qy = st_->query(y);
    Eigen::VectorXd cx(q), cy(q);
    for (int l = 0; l < q; ++l) {
      cx[l] = st_->cov(bs.qc[l], qx);
      cy[l] = st_->cov(bs.qc[l], qy);
    }
    const Eigen::VectorXd tx = bs.L.triangularView<Eigen::Lower>().solve(cx);
    const Eigen::VectorXd ty = bs.L.triangularView<Eigen::Lower>().solve(cy);
    return tx.dot(ty);
  }

 private:
  const PosteriorState* st_;
  const NoiseModel* nm_;
  double z_crit_;
  IntegrationNodes mu_;
  std::vector<QueryCache> qc_;
  Eigen::VectorXd a_, v_, r_, phi2_r_, phi_sq_;
  double H_ = 0.0;
};

inline double uncertainty_H(const PosteriorState& st, const NoiseModel& nm,
                            double z_crit, const IntegrationNodes& mu) {
  return CriterionEvaluator(st, nm, z_crit, mu).H();
}

inline double sur_J(const PosteriorState& st, const NoiseModel& nm, double z_crit,
                    const CandidateBatch& batch, const IntegrationNodes& mu) {
  return CriterionEvaluator(st, nm, z_crit, mu).JG(batch.points).first;
}

inline double gain_G(const PosteriorState& st, const NoiseModel& nm, double z_crit,
                     const CandidateBatch& batch, const IntegrationNodes& mu) {
  return CriterionEvaluator(st, nm, z_crit, mu).JG(batch.points).second;
}

// ---------------------------------------------------------------------------
// Pareto front and MR-SUR selection
// ---------------------------------------------------------------------------

// Indices of the (cost, J) records not dominated by any other (dominance:
// C_j <= C_i and J_j <= J_i with at least one strict).  Output sorted by cost.
inline std::vector<int> pareto_front(const std::vector<std::pair<double, double>>& cj) {
  const int n = static_cast<int>(cj.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (cj[a].first != cj[b].first) return cj[a].first < cj[b].first;
    if (cj[a].second != cj[b].second) return cj[a].second < cj[b].second;
    return a < b;
  });
  std::vector<int> front;
  double best_j = std::numeric_limits<double>::infinity();
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && cj[idx[j]].first == cj[idx[i]].first) ++j;  // equal-cost group
    const double jmin = cj[idx[i]].second;
    if (jmin < best_j) {
      for (int k = i; k < j && cj[idx[k]].second == jmin; ++k) front.push_back(idx[k]);
      best_j = jmin;
    }
    i = j;
  }
  return front;
}

struct CandidateRecord {
  CandidateBatch candidate;
  double J = 0.0;
  double G = 0.0;
  double rate = 0.0;  // G / cost
  bool on_pareto = false;
};

struct CriterionField {
  double H = 0.0;
  std::vector<CandidateRecord> records;
  std::vector<int> pareto;  // indices into records, sorted by cost
  int best = -1;            // argmax of rate with tie-breaking
};

// Tie-breaking for equal rates: lower cost first, then lexicographic batch
// order.  Multiplying every cost by a positive constant rescales all rates
// equally, so the argmax is invariant.
inline int mrsur_argmax(const CriterionField& field) {
  if (field.records.empty()) throw EmptyCandidates("mrsur_select: no candidates");
  int best = 0;
  for (int i = 1; i < static_cast<int>(field.records.size()); ++i) {
    const CandidateRecord& a = field.records[i];
    const CandidateRecord& b = field.records[best];
    if (a.rate > b.rate) {
      best = i;
    } else if (a.rate == b.rate) {
      if (a.candidate.cost < b.candidate.cost ||
          (a.candidate.cost == b.candidate.cost &&
           batch_less(a.candidate.points, b.candidate.points))) {
        best = i;
      }
    }
  }
  return best;
}

inline CriterionField evaluate_criterion_field(const CriterionEvaluator& ev,
                                               const std::vector<CandidateBatch>& cands) {
  CriterionField field;
  field.H = ev.H();
  field.records.reserve(cands.size());
  std::vector<std::pair<double, double>> cj;
  cj.reserve(cands.size());
  for (const CandidateBatch& cb : cands) {
    CandidateRecord rec;
    rec.candidate = cb;
    const auto [J, G] = ev.JG(cb.points);
    rec.J = J;
    rec.G = G;
    rec.rate = G / cb.cost;
    field.records.push_back(std::move(rec));
    cj.emplace_back(cb.cost, J);
  }
  if (!field.records.empty()) {
    field.pareto = pareto_front(cj);
    for (int i : field.pareto) field.records[i].on_pareto = true;
    field.best = mrsur_argmax(field);
  }
  return field;
}

// Evaluates the criterion over the candidate set and returns the gain-rate
// argmax together with the full field.
inline std::pair<CandidateBatch, CriterionField> mrsur_select(
    const PosteriorState& st, const NoiseModel& nm, double z_crit,
    const IntegrationNodes& mu, const std::vector<CandidateBatch>& cands) {
  if (cands.empty()) throw EmptyCandidates("mrsur_select: no candidates");
  CriterionEvaluator ev(st, nm, z_crit, mu);
  CriterionField field = evaluate_criterion_field(ev, cands);
  return {field.records[field.best].candidate, std::move(field)};
}

// CSV dump: one row per batch member (shared metrics repeated for q > 1).
inline void to_csv(const CriterionField& field, std::ostream& os) {
  int dim = 0;
  for (const auto& r : field.records) {
    if (!r.candidate.points.empty()) {
      dim = static_cast<int>(r.candidate.points.front().dim());
      break;
    }
  }
  for (int j = 1; j <= dim; ++j) os << "u" << j << ",";
  os << "delta,cost,J,G,rate,on_pareto\n";
  os.precision(17);
  for (const auto& r : field.records) {
    for (const Point& p : r.candidate.points) {
      for (int j = 0; j < dim; ++j) os << p.u[j] << ",";
      os << p.delta << "," << r.candidate.cost << "," << r.J << "," << r.G << ","
         << r.rate << "," << (r.on_pareto ? 1 : 0) << "\n";
    }
  }
}

}  // namespace mrsur

#endif  // MRSUR_CRITERIA_HPP
