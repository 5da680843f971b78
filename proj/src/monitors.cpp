#include "riccilab/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "riccilab/errors.hpp"
#include "riccilab/flow.hpp"
#include "riccilab/functionals.hpp"
#include "riccilab/heatflow.hpp"

namespace riccilab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Claim { nondecreasing_rate, nondecreasing, nonincreasing };

struct KindInfo {
  MonitorKind kind;
  const char* name;
  Claim claim;
};

constexpr KindInfo kKinds[] = {
    {MonitorKind::lambda, "lambda", Claim::nondecreasing_rate},
    {MonitorKind::lambdabar, "lambdabar", Claim::nondecreasing},
    {MonitorKind::F, "F", Claim::nondecreasing_rate},
    {MonitorKind::W, "W", Claim::nondecreasing_rate},
    {MonitorKind::nu, "nu", Claim::nondecreasing},
    {MonitorKind::vtilde, "vtilde", Claim::nonincreasing},
    {MonitorKind::minLbar, "minLbar", Claim::nonincreasing},
    {MonitorKind::minvu, "minvu", Claim::nondecreasing},
    {MonitorKind::maxvu, "maxvu", Claim::nondecreasing},
};

const KindInfo& info(MonitorKind k) {
  for (const auto& i : kKinds) {
    if (i.kind == k) return i;
  }
  throw ParameterError("unknown monitor kind");
}

double max_spacing(const WarpedMetric& g) {
  return *std::max_element(g.phi.begin(), g.phi.end()) * g.spacing();
}

std::vector<std::size_t> sampled(const FlowHistory& h, std::size_t every) {
  if (every == 0) throw ParameterError("monitor stride must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < h.size(); k += every) idx.push_back(k);
  if (idx.back() != h.size() - 1) idx.push_back(h.size() - 1);
  return idx;
}

ScalarField constant_potential(const WarpedMetric& g, double tau) {
  const double V = total_volume(analyze(g));
  const double c = std::log(V / std::pow(4.0 * std::numbers::pi * tau, 0.5 * g.n));
  return ScalarField{std::vector<double>(g.size(), c), FieldRole::potential};
}

}  // namespace

MonitorKind monitor_from_string(const std::string& s) {
  for (const auto& i : kKinds) {
    if (s == i.name) return i.kind;
  }
  throw ParameterError("unknown monitor '" + s + "'");
}

std::string to_string(MonitorKind k) { return info(k).name; }

std::vector<double> time_derivative(const std::vector<double>& t, const std::vector<double>& v) {
  const std::size_t n = t.size();
  if (v.size() != n) throw ParameterError("time_derivative: size mismatch");
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (v[1] - v[0]) / (t[1] - t[0]);
    return d;
  }
  {
    const double h0 = t[1] - t[0], h1 = t[2] - t[1];
    d[0] = (-(2.0 * h0 + h1) / (h0 * (h0 + h1))) * v[0] + ((h0 + h1) / (h0 * h1)) * v[1] -
           (h0 / (h1 * (h0 + h1))) * v[2];
  }
  {
    const double h0 = t[n - 2] - t[n - 3], h1 = t[n - 1] - t[n - 2];
    d[n - 1] = (h1 / (h0 * (h0 + h1))) * v[n - 3] - ((h0 + h1) / (h0 * h1)) * v[n - 2] +
               ((2.0 * h1 + h0) / (h1 * (h0 + h1))) * v[n - 1];
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    d[i] = (-h1 / (h0 * (h0 + h1))) * v[i - 1] + ((h1 - h0) / (h0 * h1)) * v[i] +
           (h0 / (h1 * (h0 + h1))) * v[i + 1];
  }
  return d;
}

MonitorSeries record(const FlowHistory& h, const MonitorConfig& cfg) {
  if (h.empty()) throw ParameterError("empty history");
  const KindInfo& ki = info(cfg.which);
  MonitorSeries s;
  s.name = ki.name;
  std::vector<double> spacing;  // h per sample
  std::vector<char> vacuous;
  const int n = h.n();

  switch (cfg.which) {
    case MonitorKind::lambda:
    case MonitorKind::lambdabar:
    case MonitorKind::nu: {
      NuOptions nopts;
      nopts.jobs = cfg.jobs;
      for (std::size_t k : sampled(h, cfg.every)) {
        const WarpedMetric& g = h.snapshot(k);
        s.t.push_back(h.times()[k]);
        spacing.push_back(max_spacing(g));
        if (cfg.which == MonitorKind::lambda) {
          const EntropyReport L = lambda(g);
          s.value.push_back(L.value);
          s.predicted_rhs.push_back(F_rate(g, *L.minimizer));
          vacuous.push_back(0);
        } else if (cfg.which == MonitorKind::lambdabar) {
          const double lb = lambda_bar(g);
          s.value.push_back(lb);
          s.predicted_rhs.push_back(0.0);
          vacuous.push_back(lb > 0.0);
        } else {
          s.value.push_back(nu(g, nopts).value);
          s.predicted_rhs.push_back(0.0);
          vacuous.push_back(0);
        }
      }
      break;
    }
    case MonitorKind::F:
    case MonitorKind::W: {
      const WarpedMetric& gT = h.snapshot(h.size() - 1);
      std::vector<ScalarField> fs;
      if (cfg.which == MonitorKind::F) {
        fs = evolve_potential(h, *lambda(gT).minimizer);
      } else {
        if (!(cfg.tau_terminal > 0.0)) throw ParameterError("W monitor needs tau_terminal > 0");
        ScalarField fT;
        if (cfg.f_terminal == "constant") {
          fT = constant_potential(gT, cfg.tau_terminal);
        } else if (cfg.f_terminal == "minimizer") {
          fT = *mu(gT, cfg.tau_terminal).minimizer;
        } else {
          throw ParameterError("f_terminal must be 'constant' or 'minimizer'");
        }
        fs = evolve_potential(h, fT, cfg.tau_terminal);
      }
      for (std::size_t k : sampled(h, cfg.every)) {
        const WarpedMetric& g = h.snapshot(k);
        s.t.push_back(h.times()[k]);
        spacing.push_back(max_spacing(g));
        vacuous.push_back(0);
        if (cfg.which == MonitorKind::F) {
          s.value.push_back(eval_F(g, fs[k]));
          s.predicted_rhs.push_back(F_rate(g, fs[k]));
        } else {
          const double tau = cfg.tau_terminal + h.t_last() - h.times()[k];
          s.value.push_back(eval_W(g, fs[k], tau).value);
          s.predicted_rhs.push_back(W_rate(g, fs[k], tau));
        }
      }
      break;
    }
    case MonitorKind::vtilde:
    case MonitorKind::minLbar: {
      const double t0 = cfg.t0 < 0.0 ? h.t_last() : cfg.t0;
      const double hi = cfg.tau_hi > 0.0 ? cfg.tau_hi : 0.9 * (t0 - h.t_first());
      const auto taus = geometric_ladder(cfg.tau_lo, hi, cfg.tau_count);
      LOptions lo = cfg.lgeo;
      lo.jobs = cfg.jobs;
      const LFan fan = shoot_fan(h, t0, taus, lo);
      for (std::size_t k = 0; k < taus.size(); ++k) {
        const ReducedField& f = fan.fields[k];
        s.t.push_back(taus[k]);
        spacing.push_back(max_spacing(f.g));
        vacuous.push_back(0);
        s.predicted_rhs.push_back(0.0);
        if (cfg.which == MonitorKind::vtilde) {
          s.value.push_back(reduced_volume(f, f.g, lo.coverage_threshold).value);
        } else {
          double mn = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < f.Lbar.size(); ++i) {
            if (f.covered[i]) mn = std::min(mn, f.Lbar[i] - 2.0 * n * taus[k]);
          }
          s.value.push_back(mn);
        }
      }
      break;
    }
    case MonitorKind::minvu:
    case MonitorKind::maxvu: {
      const double T = cfg.T < 0.0 ? h.t_last() : cfg.T;
      const ConjugateSolution sol = solve_conjugate(h, T, cfg.width);
      const auto fields = harnack_v(h, sol);
      const double cutoff = T - cfg.heat_window * (T - h.t_first());
      std::size_t count = 0;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        if (sol.times[k] > cutoff) continue;
        if (count++ % cfg.every != 0) continue;
        s.t.push_back(sol.times[k]);
        spacing.push_back(max_spacing(h.at(sol.times[k])));
        vacuous.push_back(0);
        s.predicted_rhs.push_back(0.0);
        s.value.push_back(cfg.which == MonitorKind::minvu ? fields[k].min_v_over_u : fields[k].max_v_over_u);
      }
      break;
    }
  }

  s.dvalue_dt = time_derivative(s.t, s.value);
  const std::size_t m = s.t.size();
  s.slack.resize(m);
  s.tol.resize(m);
  s.verdict.resize(m);
  bool any_active = false;
  for (std::size_t i = 0; i < m; ++i) {
    double dt = 0.0;
    if (i > 0) dt = std::max(dt, s.t[i] - s.t[i - 1]);
    if (i + 1 < m) dt = std::max(dt, s.t[i + 1] - s.t[i]);
    s.tol[i] = cfg.c1 * spacing[i] * spacing[i] + cfg.c2 * dt;
    s.slack[i] = s.dvalue_dt[i] - s.predicted_rhs[i];
    if (vacuous[i]) {
      s.verdict[i] = "vacuous";
      continue;
    }
    any_active = true;
    bool ok = false;
    double measure = 0.0;  // signed so that negative means a violation
    switch (ki.claim) {
      case Claim::nondecreasing_rate: {
        const double match = s.tol[i] + cfg.match_rel * std::abs(s.predicted_rhs[i]) - std::abs(s.slack[i]);
        measure = std::min(s.dvalue_dt[i] + s.tol[i], match);
        ok = measure >= 0.0;
        break;
      }
      case Claim::nondecreasing:
        measure = s.slack[i] + s.tol[i];
        ok = measure >= 0.0;
        break;
      case Claim::nonincreasing:
        measure = s.tol[i] - s.slack[i];
        ok = measure >= 0.0;
        break;
    }
    s.verdict[i] = ok ? "holds" : "violated";
    if (!ok) {
      s.violations.push_back({s.t[i], s.slack[i], s.tol[i] > 0.0 ? s.slack[i] / s.tol[i] : kNaN});
    }
  }
  if (!any_active) {
    s.overall = "vacuous";
  } else {
    s.overall = s.violations.empty() ? "holds" : "violated";
  }
  return s;
}

void write_monitor_csv(const MonitorSeries& s, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw FormatError("cannot open monitor output", path.string());
  std::fputs("t,value,dvalue_dt,predicted_rhs,slack,verdict\n", f);
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", s.t[i], s.value[i], s.dvalue_dt[i],
                 s.predicted_rhs[i], s.slack[i], s.verdict[i].c_str());
  }
  std::fclose(f);
}

}  // namespace riccilab
