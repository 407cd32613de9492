#include "gmclab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace gmclab::chaos {

namespace {

void trim(std::vector<std::uint8_t>& e) {
  while (!e.empty() && e.back() == 0) e.pop_back();
}

void check_same_shape(const ChaosExpansion& f, const ChaosExpansion& g,
                      const char* op) {
  if (f.n_vars != g.n_vars) {
    throw validation_error(std::string(op) + ": operands use " +
                           std::to_string(f.n_vars) + " and " +
                           std::to_string(g.n_vars) + " variables");
  }
}

}  // namespace

MultiIndex::MultiIndex(std::vector<std::uint8_t> e) : e_(std::move(e)) {
  trim(e_);
}

MultiIndex MultiIndex::unit(std::size_t var) {
  std::vector<std::uint8_t> e(var + 1, 0);
  e[var] = 1;
  return MultiIndex(std::move(e));
}

std::size_t MultiIndex::degree() const {
  std::size_t d = 0;
  for (auto v : e_) d += v;
  return d;
}

double MultiIndex::factorial() const {
  double f = 1.0;
  for (auto v : e_)
    for (int k = 2; k <= v; ++k) f *= k;
  return f;
}

double MultiIndex::weight_2n(double t) const {
  double w = 1.0;
  for (std::size_t i = 0; i < e_.size(); ++i) {
    if (e_[i] != 0) w *= std::pow(2.0 * static_cast<double>(i + 1),
                                  t * static_cast<double>(e_[i]));
  }
  return w;
}

MultiIndex MultiIndex::plus(const MultiIndex& o) const {
  std::vector<std::uint8_t> e(std::max(e_.size(), o.e_.size()), 0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    unsigned s = static_cast<unsigned>((*this)[i]) + o[i];
    if (s > 255) throw validation_error("MultiIndex: exponent overflow");
    e[i] = static_cast<std::uint8_t>(s);
  }
  return MultiIndex(std::move(e));
}

bool MultiIndex::dominates(const MultiIndex& o) const {
  for (std::size_t i = 0; i < o.e_.size(); ++i)
    if ((*this)[i] < o.e_[i]) return false;
  return true;
}

MultiIndex MultiIndex::minus(const MultiIndex& o) const {
  if (!dominates(o)) throw validation_error("MultiIndex: minus would go negative");
  std::vector<std::uint8_t> e(e_);
  for (std::size_t i = 0; i < o.e_.size(); ++i)
    e[i] = static_cast<std::uint8_t>(e[i] - o.e_[i]);
  return MultiIndex(std::move(e));
}

bool MultiIndex::operator<(const MultiIndex& o) const {
  std::size_t da = degree(), db = o.degree();
  if (da != db) return da < db;
  std::size_t n = std::max(e_.size(), o.e_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)[i] != o[i]) return (*this)[i] > o[i];
  }
  return false;
}

std::vector<MultiIndex> all_indices(std::size_t n_vars, std::size_t max_degree) {
  std::vector<MultiIndex> out;
  std::vector<std::uint8_t> cur(n_vars, 0);
  // Depth-first over exponent vectors with a running degree budget.
  auto rec = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
    if (pos == n_vars) {
      out.push_back(MultiIndex(cur));
      return;
    }
    for (std::size_t k = 0; k <= left; ++k) {
      cur[pos] = static_cast<std::uint8_t>(k);
      self(self, pos + 1, left - k);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, max_degree);
  std::sort(out.begin(), out.end());
  return out;
}

double hermite(int k, double x) {
  if (k < 0) throw validation_error("hermite: negative degree");
  if (k == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int j = 1; j < k; ++j) {
    double next = x * cur - static_cast<double>(j) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

ChaosExpansion ChaosExpansion::constant(std::size_t n_vars, double value,
                                        std::size_t cap) {
  ChaosExpansion f;
  f.n_vars = n_vars;
  f.degree_cap = cap;
  if (value != 0.0) f.coeffs[MultiIndex{}] = value;
  return f;
}

ChaosExpansion ChaosExpansion::variable(std::size_t var, std::size_t n_vars,
                                        std::size_t cap) {
  if (var >= n_vars) throw validation_error("ChaosExpansion: variable index out of range");
  if (cap < 1) throw validation_error("ChaosExpansion: cap below variable degree");
  ChaosExpansion f;
  f.n_vars = n_vars;
  f.degree_cap = cap;
  f.coeffs[MultiIndex::unit(var)] = 1.0;
  return f;
}

double ChaosExpansion::coeff(const MultiIndex& a) const {
  auto it = coeffs.find(a);
  return it == coeffs.end() ? 0.0 : it->second;
}

void ChaosExpansion::set(const MultiIndex& a, double v) {
  if (a.degree() > degree_cap)
    throw validation_error("ChaosExpansion: index degree exceeds the cap");
  if (a.width() > n_vars)
    throw validation_error("ChaosExpansion: index uses more variables than declared");
  if (v == 0.0)
    coeffs.erase(a);
  else
    coeffs[a] = v;
}

std::size_t ChaosExpansion::max_degree() const {
  std::size_t d = 0;
  for (const auto& [a, c] : coeffs)
    if (c != 0.0) d = std::max(d, a.degree());
  return d;
}

double ChaosExpansion::l2_norm_sq() const {
  double s = 0.0;
  for (const auto& [a, c] : coeffs) s += c * c * a.factorial();
  return s;
}

ChaosExpansion add(const ChaosExpansion& f, const ChaosExpansion& g) {
  check_same_shape(f, g, "add");
  ChaosExpansion r = f;
  r.degree_cap = std::max(f.degree_cap, g.degree_cap);
  r.truncation_loss = f.truncation_loss + g.truncation_loss;
  for (const auto& [a, c] : g.coeffs) {
    auto [it, fresh] = r.coeffs.try_emplace(a, c);
    if (!fresh) it->second += c;
  }
  return r;
}

ChaosExpansion scale(const ChaosExpansion& f, double s) {
  ChaosExpansion r = f;
  for (auto& [a, c] : r.coeffs) c *= s;
  r.truncation_loss = f.truncation_loss * s * s;
  return r;
}

ChaosExpansion wick_mul(const ChaosExpansion& f, const ChaosExpansion& g,
                        std::size_t cap) {
  check_same_shape(f, g, "wick_mul");
  ChaosExpansion r;
  r.n_vars = f.n_vars;
  r.degree_cap = std::min(cap, f.max_degree() + g.max_degree());
  // Contributions to one index are summed in sorted order, so the result is
  // bitwise independent of operand order.
  std::map<MultiIndex, std::vector<double>> kept, dropped;
  for (const auto& [a, ca] : f.coeffs) {
    for (const auto& [b, cb] : g.coeffs) {
      MultiIndex gamma = a.plus(b);
      auto& slot = gamma.degree() <= r.degree_cap ? kept : dropped;
      slot[std::move(gamma)].push_back(ca * cb);
    }
  }
  auto fold = [](std::vector<double>& parts) {
    std::sort(parts.begin(), parts.end());
    double s = 0.0;
    for (double v : parts) s += v;
    return s;
  };
  for (auto& [gamma, parts] : kept) r.coeffs[gamma] = fold(parts);
  double loss = 0.0;
  for (auto& [gamma, parts] : dropped) {
    double c = fold(parts);
    loss += c * c * gamma.factorial();
  }
  r.truncation_loss = loss + f.truncation_loss + g.truncation_loss;
  return r;
}

double GaussianPoint::var() const {
  double s = 0.0;
  for (double c : coeffs) s += c * c;
  return lambda * lambda * s;
}

std::vector<double> GaussianPoint::loaded() const {
  std::vector<double> b(coeffs);
  for (double& v : b) v *= lambda;
  return b;
}

ChaosExpansion wick_exp(const GaussianPoint& h, std::size_t cap) {
  std::vector<double> b = h.loaded();
  ChaosExpansion r;
  r.n_vars = b.size();
  r.degree_cap = cap;
  double var = h.var();
  if (var == 0.0) {
    r.coeffs[MultiIndex{}] = 1.0;
    return r;
  }
  double tail = 0.0;
  for (const MultiIndex& a : all_indices(b.size(), cap + 1)) {
    double c = 1.0;
    for (std::size_t i = 0; i < a.width(); ++i) {
      double fi = 1.0;
      for (int k = 1; k <= a[i]; ++k) fi *= k;
      c *= std::pow(b[i], static_cast<double>(a[i])) / fi;
    }
    if (c == 0.0) continue;
    if (a.degree() <= cap)
      r.coeffs[a] = c;
    else
      tail += c * c * a.factorial();
  }
  // First dropped degree stands in for the whole tail; the series decays
  // factorially so later degrees are negligible against it.
  r.truncation_loss = tail;
  return r;
}

namespace {

// Geometric growth of positive degree blocks over the upper half of the
// range, 0 when the blocks die out.
double block_growth(const std::vector<double>& blocks) {
  std::size_t top = blocks.size() - 1;
  while (top > 0 && blocks[top] == 0.0) --top;
  if (top < 2) return 0.0;
  std::size_t lo = top / 2;
  if (blocks[lo] == 0.0) return 0.0;
  return std::pow(blocks[top] / blocks[lo],
                  1.0 / static_cast<double>(top - lo));
}

}  // namespace

WickInverseResult wick_inverse(const ChaosExpansion& f, std::size_t cap) {
  double a0 = f.coeff(MultiIndex{});
  if (a0 == 0.0)
    throw validation_error("wick_inverse: mean coefficient is zero");

  WickInverseResult out;
  ChaosExpansion& g = out.inverse;
  g.n_vars = f.n_vars;
  g.degree_cap = cap;
  g.coeffs[MultiIndex{}] = 1.0 / a0;

  // Degrees add under the Wick product, so (F wick G)_gamma couples g_gamma
  // only to strictly lower-degree g entries: solve degree by degree.
  for (const MultiIndex& gamma : all_indices(f.n_vars, cap)) {
    if (gamma.degree() == 0) continue;
    double s = 0.0;
    for (const auto& [a, ca] : f.coeffs) {
      if (a.degree() == 0 || !gamma.dominates(a)) continue;
      auto it = g.coeffs.find(gamma.minus(a));
      if (it != g.coeffs.end()) s += ca * it->second;
    }
    if (s != 0.0) g.coeffs[gamma] = -s / a0;
  }

  std::vector<double> plain(cap + 1, 0.0);
  std::array<std::vector<double>, 3> weighted;
  const std::array<double, 3> qs = {2.0, 4.0, 8.0};
  for (auto& w : weighted) w.assign(cap + 1, 0.0);
  for (const auto& [a, c] : g.coeffs) {
    std::size_t d = a.degree();
    plain[d] += c * c;
    for (std::size_t j = 0; j < qs.size(); ++j)
      weighted[j][d] += c * c * a.weight_2n(-qs[j]);
  }
  out.l2_block_growth = block_growth(plain);
  out.l2_divergent = out.l2_block_growth > 1.0;
  bool all_grow = true;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    out.snorm_block_growth[j] = block_growth(weighted[j]);
    if (!(out.snorm_block_growth[j] > 1.0)) all_grow = false;
  }
  out.norm_divergent = all_grow;
  return out;
}

double s_transform(const ChaosExpansion& f, const GaussianPoint& pt) {
  if (pt.coeffs.size() != f.n_vars)
    throw validation_error("s_transform: point dimension does not match n_vars");
  std::vector<double> b = pt.loaded();
  double s = 0.0;
  for (const auto& [a, c] : f.coeffs) {
    double term = c;
    for (std::size_t i = 0; i < a.width(); ++i) {
      for (int k = 0; k < a[i]; ++k) term *= b[i];
    }
    s += term;
  }
  return s;
}

double hida_norm(const ChaosExpansion& f, double rho, double r) {
  if (rho < -1.0 || rho > 1.0)
    throw validation_error("hida_norm: rho must lie in [-1, 1]");
  double s = 0.0;
  for (const auto& [a, c] : f.coeffs)
    s += c * c * std::pow(a.factorial(), 1.0 + rho) * a.weight_2n(r);
  return s;
}

double evaluate(const ChaosExpansion& f, const std::vector<double>& xi) {
  if (xi.size() != f.n_vars)
    throw validation_error("evaluate: sample dimension does not match n_vars");
  double s = 0.0;
  for (const auto& [a, c] : f.coeffs) {
    double term = c;
    for (std::size_t i = 0; i < a.width(); ++i)
      if (a[i] != 0) term *= hermite(a[i], xi[i]);
    s += term;
  }
  return s;
}

std::string ChaosExpansion::to_json() const {
  nlohmann::json j;
  j["n_vars"] = n_vars;
  j["degree_cap"] = degree_cap;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [a, c] : coeffs) {
    std::vector<int> e(n_vars, 0);
    for (std::size_t i = 0; i < a.width(); ++i) e[i] = a[i];
    entries.push_back(nlohmann::json::array({e, c}));
  }
  j["entries"] = std::move(entries);
  return j.dump();
}

ChaosExpansion ChaosExpansion::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error(std::string("ChaosExpansion: bad json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("n_vars") || !j.contains("degree_cap") ||
      !j.contains("entries") || !j["entries"].is_array())
    throw validation_error("ChaosExpansion: json must carry n_vars, degree_cap, entries");
  ChaosExpansion f;
  try {
    f.n_vars = j["n_vars"].get<std::size_t>();
    f.degree_cap = j["degree_cap"].get<std::size_t>();
    for (const auto& entry : j["entries"]) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_array())
        throw validation_error("ChaosExpansion: each entry is [exponents, coefficient]");
      std::vector<std::uint8_t> e;
      for (const auto& v : entry[0]) {
        long long x = v.get<long long>();
        if (x < 0 || x > 255)
          throw validation_error("ChaosExpansion: exponent out of range");
        e.push_back(static_cast<std::uint8_t>(x));
      }
      if (e.size() > f.n_vars)
        throw validation_error("ChaosExpansion: entry wider than n_vars");
      MultiIndex a(std::move(e));
      if (a.degree() > f.degree_cap)
        throw validation_error("ChaosExpansion: entry degree exceeds the cap");
      f.coeffs[a] = entry[1].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("ChaosExpansion: bad json field: ") + e.what());
  }
  return f;
}

}  // namespace gmclab::chaos
