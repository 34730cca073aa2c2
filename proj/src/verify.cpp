#include "sbl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "sbl/dnn.hpp"
#include "sbl/majorizers.hpp"
#include "sbl/parallel.hpp"
#include "sbl/rng.hpp"
#include "sbl/rule_spec.hpp"
#include "sbl/updates.hpp"

namespace sbl {

Instance random_instance(std::uint64_t seed, const RandomInstanceSpec& spec) {
  Rng rng(seed);
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(spec.max_n - 1)));
  const Eigen::Index m_lo = n;
  const Eigen::Index m =
      m_lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(std::max<Eigen::Index>(1, spec.max_m - m_lo + 1))));
  MatrixSpec ms;
  ms.kind = MatrixKind::GaussianComplex;
  ms.n = n;
  ms.m = m;
  ms.seed = rng.bits();
  SignalSpec sig;
  sig.sparsity = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n / 2)));
  sig.snr_db = spec.snr_db[rng.below(spec.snr_db.size())];
  sig.sigma2 = spec.sigma2;
  sig.snapshots = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_snapshots)));
  sig.seed = rng.bits();
  return make_instance(make_matrix(ms), sig);
}

GammaVec random_gamma(Rng& rng, Eigen::Index m) {
  GammaVec g(m);
  for (Eigen::Index i = 0; i < m; ++i) g[i] = std::pow(10.0, rng.uniform(-4.0, 2.0));
  return g;
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

// Runs `check(k)` for k < count; each returns a slack (<= 0 is a pass, the
// largest is reported).
PropertyResult sweep(const std::string& name, int count, unsigned jobs, const std::function<double(std::size_t)>& check) {
  std::vector<double> worst(static_cast<std::size_t>(count));
  parallel_for(worst.size(), jobs, [&](std::size_t k) { worst[k] = check(k); });
  PropertyResult r;
  r.name = name;
  r.cases = worst.size();
  const double w = worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
  r.passed = !std::isnan(w) && w <= 0.0;
  r.detail = "max slack " + num(w);
  return r;
}

double rel_diff(const GammaVec& a, const GammaVec& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

double descent_slack(const SblProblem& p, const UpdateRuleSpec& rule, int iters) {
  StoppingCfg stop;
  stop.max_iters = iters;
  const RunTrace tr = run(p, rule, GammaVec::Ones(p.m()), stop, RunOptions{false, false});
  double worst = -1.0;
  for (std::size_t j = 1; j < tr.nll_values.size(); ++j) {
    const double prev = tr.nll_values[j - 1];
    worst = std::max(worst, tr.nll_values[j] - prev - 1e-8 * std::max(1.0, std::abs(prev)));
  }
  return worst;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const VerifyConfig& cfg) {
  std::vector<PropertyResult> out;
  const auto inst = [&](std::size_t k, std::uint64_t tag) { return random_instance(derive_seed(cfg.seed, tag, k)); };
  const auto rng_for = [&](std::size_t k, std::uint64_t tag) { return Rng(derive_seed(cfg.seed, tag, k, 7)); };
  const int draws = cfg.draws;
  const int runs = cfg.instances;

  out.push_back(sweep("t2*gamma <= 1", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 1);
    Rng rng = rng_for(k, 1);
    const GammaVec g = random_gamma(rng, in.problem.m());
    const TStats t = t_stats(in.problem, g);
    return (t.t2.array() * g.array()).maxCoeff() - 1.0 - 1e-9;
  }));

  out.push_back(sweep("nll matches dense inverse", std::min(draws, 300), cfg.jobs, [&](std::size_t k) {
    RandomInstanceSpec spec;
    spec.max_n = 8;
    spec.max_m = 16;
    const Instance in = random_instance(derive_seed(cfg.seed, 2, k), spec);
    Rng rng = rng_for(k, 2);
    const GammaVec g = random_gamma(rng, in.problem.m());
    const auto& p = in.problem;
    const CMatrix s = p.phi * g.asDiagonal() * p.phi.adjoint() + p.sigma2 * CMatrix::Identity(p.n(), p.n());
    const CMatrix inv = s.inverse();
    const double dense = std::log(std::abs(s.determinant())) + (p.y.adjoint() * inv * p.y).trace().real() / p.l();
    const double fast = nll(p, g);
    return std::abs(fast - dense) / std::max(1.0, std::abs(dense)) - 1e-9;
  }));

  out.push_back(sweep("gradient equals T2 - T1", std::min(draws, 200), cfg.jobs, [&](std::size_t k) {
    RandomInstanceSpec spec;
    spec.max_n = 8;
    spec.max_m = 12;
    const Instance in = random_instance(derive_seed(cfg.seed, 3, k), spec);
    Rng rng = rng_for(k, 3);
    GammaVec g(in.problem.m());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = rng.uniform(0.2, 2.0);
    const TStats t = t_stats(in.problem, g);
    double worst = -1.0;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      GammaVec gp = g, gm = g;
      gp[i] += h;
      gm[i] -= h;
      const double fd = (nll(in.problem, gp) - nll(in.problem, gm)) / (2.0 * h);
      const double exact = t.t2[i] - t.t1[i];
      worst = std::max(worst, std::abs(fd - exact) - 1e-4 * std::max(1.0, std::abs(exact)));
    }
    return worst;
  }));

  out.push_back(sweep("posterior error variance within [0, gamma], zero rows absorbed", draws, cfg.jobs,
                      [&](std::size_t k) {
                        const Instance in = inst(k, 4);
                        Rng rng = rng_for(k, 4);
                        GammaVec g = random_gamma(rng, in.problem.m());
                        g[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(g.size())))] = 0.0;
                        const Posterior post = posterior(in.problem, g);
                        double worst = -1.0;
                        for (Eigen::Index i = 0; i < g.size(); ++i) {
                          worst = std::max({worst, -post.err_diag[i], post.err_diag[i] - g[i]});
                          if (g[i] == 0.0 && post.mean.row(i).norm() != 0.0) worst = 1.0;
                        }
                        return worst;
                      }));

  const std::vector<std::pair<std::string, UpdateRuleSpec>> descent_rules = {
      {"em", Em{}}, {"psbl:0.1", Psbl{0.1}}, {"psbl:0.25", Psbl{0.25}}, {"psbl:0.5", Psbl{0.5}},
      {"psbl:0.75", Psbl{0.75}}, {"psbl:1", Psbl{1.0}}};
  for (const auto& [label, rule] : descent_rules) {
    out.push_back(sweep("descent " + label, runs, cfg.jobs,
                        [&](std::size_t k) { return descent_slack(inst(k, 5).problem, rule, cfg.max_iters); }));
  }

  out.push_back(sweep("descent of random convex update mixtures", runs, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 6);
    Rng rng = rng_for(k, 6);
    ConvexUpdates cu;
    cu.rules = {Em{}, Psbl{0.25}, Psbl{0.5}, Psbl{1.0}};
    RVector w(4);
    for (Eigen::Index q = 0; q < 4; ++q) w[q] = -std::log(1.0 - rng.uniform());
    cu.schedule = {w / w.sum()};
    return descent_slack(in.problem, cu, cfg.max_iters);
  }));

  out.push_back(sweep("descent of convex majorizer steps", runs, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 7);
    Rng rng = rng_for(k, 7);
    return descent_slack(in.problem, ConvexMajorizers{{rng.uniform()}}, cfg.max_iters);
  }));

  out.push_back(sweep("MU posterior form equals p-SBL(1)", runs, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 8);
    GammaVec a = GammaVec::Ones(in.problem.m());
    GammaVec b = a;
    double worst = -1.0;
    for (int j = 0; j < 20; ++j) {
      a = mu_step_posterior_form(in.problem, a);
      b = psbl_step(in.problem, b, 1.0);
      worst = std::max(worst, rel_diff(a, b) - 1e-10);
      b = a;
    }
    return worst;
  }));

  out.push_back(sweep("EM posterior form equals T form", runs, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 9);
    GammaVec a = GammaVec::Ones(in.problem.m());
    double worst = -1.0;
    for (int j = 0; j < 20; ++j) {
      const GammaVec b = em_step(in.problem, a);
      a = em_step_posterior_form(in.problem, a);
      worst = std::max(worst, rel_diff(a, b) - 1e-10);
    }
    return worst;
  }));

  out.push_back(sweep("convex majorizer endpoints reduce to EM and p-SBL(1/2)", runs, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 10);
    Rng rng = rng_for(k, 10);
    const GammaVec g = random_gamma(rng, in.problem.m());
    const double d1 = rel_diff(convex_majorizer_step(in.problem, g, 1.0), em_step(in.problem, g));
    const double d0 = rel_diff(convex_majorizer_step(in.problem, g, 0.0), psbl_step(in.problem, g, 0.5));
    return std::max(d1, d0) - 1e-12;
  }));

  out.push_back(sweep("majorizers bound the nll change", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 11);
    Rng rng = rng_for(k, 11);
    const GammaVec a = random_gamma(rng, in.problem.m());
    const GammaVec g = random_gamma(rng, in.problem.m());
    const double df = nll(in.problem, g) - nll(in.problem, a);
    const double alpha = rng.uniform();
    const double gaps[] = {g_em_gap(in.problem, g, a), g_psbl_gap(in.problem, g, a),
                           combined_majorizer_gap(in.problem, g, a, alpha)};
    double worst = -1.0;
    for (double gap : gaps) worst = std::max(worst, df - 1e-8 - gap);
    return worst;
  }));

  out.push_back(sweep("EM step descends the p-SBL majorizer", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 12);
    Rng rng = rng_for(k, 12);
    const GammaVec a = random_gamma(rng, in.problem.m());
    const DeltaCheck d = em_on_psbl_delta(in.problem, a);
    const double mismatch = std::abs(d.delta - d.direct) - 1e-8 * std::max(1.0, std::abs(d.direct));
    return std::max({d.direct - 1e-9, d.delta - 1e-9, mismatch});
  }));

  out.push_back(sweep("p-SBL steps descend their majorizer", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 13);
    Rng rng = rng_for(k, 13);
    const GammaVec a = random_gamma(rng, in.problem.m());
    const TStats t = t_stats(in.problem, a);
    const bool moving = ((t.t1 - t.t2).array().abs() > 1e-9 * t.t2.array()).any();
    double worst = -1.0;
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const double gap = g_psbl_gap(in.problem, psbl_step(in.problem, a, p), a);
      worst = std::max(worst, moving ? gap + 1e-12 : gap);
    }
    return worst;
  }));

  out.push_back(sweep("p-SBL(1) leaves its majorizer unchanged", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 14);
    Rng rng = rng_for(k, 14);
    const GammaVec a = random_gamma(rng, in.problem.m());
    const double gap = g_psbl_gap(in.problem, psbl_step(in.problem, a, 1.0), a);
    const TStats t = t_stats(in.problem, a);
    const double scale = std::max(1.0, (a.array() * t.t2.array()).sum());
    return std::abs(gap) / scale - 1e-10;
  }));

  out.push_back(sweep("strict Hessian check is positive", draws, cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 15);
    Rng rng = rng_for(k, 15);
    const GammaVec g = random_gamma(rng, in.problem.m());
    RVector v(g.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(1e-3, 1.0);
    return strict_hessian_check(in.problem, g, v) > 0.0 ? -1.0 : 1.0;
  }));

  out.push_back(sweep("convex majorizer step is stationary", std::min(draws, 300), cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 16);
    Rng rng = rng_for(k, 16);
    const GammaVec a = random_gamma(rng, in.problem.m());
    const double alpha = rng.uniform();
    const TStats t = t_stats(in.problem, a);
    const GammaVec g = convex_majorizer_update(a, t, alpha);
    double worst = -1.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (!(g[i] > 1e-8)) continue;
      const double h = 1e-6 * g[i];
      GammaVec gp = g, gm = g;
      gp[i] += h;
      gm[i] -= h;
      const double fd = (combined_gap_from(gp, a, t, alpha) - combined_gap_from(gm, a, t, alpha)) / (2.0 * h);
      // Scale-free: the gradient times gamma is dimensionless.
      worst = std::max(worst, std::abs(fd) * g[i] / std::max(1.0, a[i] * t.t2[i] + 1.0) - 1e-4);
    }
    return worst;
  }));

  out.push_back(sweep("DNN iterates positive and permutation equivariant", std::min(runs, 50), cfg.jobs,
                      [&](std::size_t k) {
                        const Instance in = inst(k, 17);
                        const DnnSblModel model = random_model(3, 8, derive_seed(cfg.seed, 17, k));
                        const auto& p = in.problem;
                        const RunTrace tr = dnn_run(p, model, GammaVec::Ones(p.m()));
                        double worst = -1.0;
                        for (const auto& g : tr.gammas) worst = std::max(worst, g.minCoeff() > 0.0 ? -1.0 : 1.0);
                        Rng rng = rng_for(k, 17);
                        std::vector<Eigen::Index> perm(static_cast<std::size_t>(p.m()));
                        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
                        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
                        SblProblem q = p;
                        GammaVec g0 = random_gamma(rng, p.m());
                        GammaVec g0p(p.m());
                        for (Eigen::Index i = 0; i < p.m(); ++i) {
                          q.phi.col(i) = p.phi.col(perm[static_cast<std::size_t>(i)]);
                          g0p[i] = g0[perm[static_cast<std::size_t>(i)]];
                        }
                        const GammaVec a = dnn_step(p, g0, model, 0);
                        const GammaVec b = dnn_step(q, g0p, model, 0);
                        for (Eigen::Index i = 0; i < p.m(); ++i) {
                          const double x = a[perm[static_cast<std::size_t>(i)]];
                          worst = std::max(worst, std::abs(x - b[i]) - 1e-10 * std::max(1.0, std::abs(x)));
                        }
                        return worst;
                      }));

  out.push_back(sweep("suppressed DNN reduces to the skip rule", std::min(runs, 50), cfg.jobs, [&](std::size_t k) {
    const Instance in = inst(k, 18);
    DnnSblModel model = random_model(5, 8, derive_seed(cfg.seed, 18, k));
    for (auto& net : model.iterations) {
      net.out_w.setZero();
      net.out_b = -40.0;
    }
    model.skip_logits.reset();
    model.skip_weights = RVector::Zero(5);
    model.skip_weights[4] = 1.0;
    const RunTrace tr = dnn_run(in.problem, model, GammaVec::Ones(in.problem.m()));
    StoppingCfg stop;
    stop.max_iters = 5;
    stop.min_iters_before_check = 5;
    const RunTrace ref = run(in.problem, Psbl{1.0}, GammaVec::Ones(in.problem.m()), stop);
    double worst = -1.0;
    for (std::size_t j = 0; j < tr.nll_values.size() && j < ref.nll_values.size(); ++j) {
      worst = std::max(worst, std::abs(tr.nll_values[j] - ref.nll_values[j]) /
                                  std::max(1.0, std::abs(ref.nll_values[j])) - 1e-9);
    }
    return worst;
  }));

  return out;
}

}  // namespace sbl
